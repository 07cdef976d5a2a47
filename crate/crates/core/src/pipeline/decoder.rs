use super::bid_newer;
use crate::codec::{
    coefficients_from_seed, extract_systematic, reassemble_packets, unpad_block, DecoderState,
};
use crate::framing::{decapsulate, encode_ack, NcHeader, PacketKind};

/// Result of feeding one wire packet to a decoder worker.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Received {
    /// `(tid, bid)` to acknowledge, at most once per block.
    pub ack: Option<(u8, u8)>,
    pub delivered: Vec<Vec<u8>>,
}

impl Received {
    pub fn ack_wire(&self) -> Option<Vec<u8>> {
        self.ack.map(|(t, b)| encode_ack(t, b))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecoderCounters {
    pub packets: u64,
    pub innovative: u64,
    pub redundant: u64,
    pub stale: u64,
    /// Packets for a block that was already decoded.
    pub after_decode: u64,
    /// Packets whose ns or segment length disagree with their block.
    pub inconsistent: u64,
    pub malformed: u64,
    pub unknown_tid: u64,
    pub blocks_opened: u64,
    pub blocks_decoded: u64,
    pub blocks_abandoned: u64,
    /// Decoded blocks whose padding or packet walk failed.
    pub corrupt_blocks: u64,
    pub delivered_decoded: u64,
    pub delivered_extracted: u64,
    pub acks: u64,
}

struct Open {
    bid: u8,
    state: DecoderState,
    starts: Vec<Option<u16>>,
    decoded: bool,
}

/// Decoder side of one worker pair: one block in flight.
pub struct DecoderWorker {
    tid: u8,
    open: Option<Open>,
    counters: DecoderCounters,
}

impl DecoderWorker {
    pub fn new(tid: u8) -> Self {
        DecoderWorker {
            tid,
            open: None,
            counters: DecoderCounters::default(),
        }
    }

    pub fn counters(&self) -> &DecoderCounters {
        &self.counters
    }

    /// Rank of the block in flight.
    pub fn rank(&self) -> Option<(u8, usize)> {
        self.open.as_ref().map(|o| (o.bid, o.state.rank()))
    }

    pub fn ingest(&mut self, header: &NcHeader, segment: &[u8]) -> Received {
        let mut out = Received::default();
        self.counters.packets += 1;
        let ns = usize::from(header.ns);
        if ns == 0 || segment.is_empty() {
            self.counters.malformed += 1;
            return out;
        }
        match &self.open {
            Some(o) if o.bid == header.bid => {}
            Some(o) if !bid_newer(header.bid, o.bid) => {
                self.counters.stale += 1;
                return out;
            }
            _ => {
                out.delivered = self.close();
                self.counters.blocks_opened += 1;
                self.open = Some(Open {
                    bid: header.bid,
                    state: DecoderState::new(ns, segment.len()),
                    starts: vec![None; ns],
                    decoded: false,
                });
            }
        }
        let o = self.open.as_mut().expect("opened above");
        if o.decoded {
            self.counters.after_decode += 1;
            return out;
        }
        if o.state.segments() != ns || o.state.segment_len() != segment.len() {
            self.counters.inconsistent += 1;
            return out;
        }
        let innovative = match header.kind {
            PacketKind::Systematic { segn } => {
                let i = usize::from(segn);
                if i >= ns {
                    self.counters.malformed += 1;
                    return out;
                }
                o.starts[i] = header.start;
                o.state.ingest_systematic(i, segment)
            }
            PacketKind::Coded { seed } => {
                o.state.ingest(&coefficients_from_seed(seed, ns), segment)
            }
        };
        if innovative {
            self.counters.innovative += 1;
        } else {
            self.counters.redundant += 1;
        }
        if o.state.is_decoded() {
            o.decoded = true;
            self.counters.blocks_decoded += 1;
            self.counters.acks += 1;
            out.ack = Some((self.tid, o.bid));
            let payload = o.state.decoded_payload().expect("rank is full");
            match unpad_block(&payload).and_then(reassemble_packets) {
                Ok(pkts) => {
                    self.counters.delivered_decoded += pkts.len() as u64;
                    out.delivered.extend(pkts);
                }
                Err(_) => self.counters.corrupt_blocks += 1,
            }
        }
        out
    }

    /// Abandons the block in flight, returning whatever whole packets its
    /// systematic segments still hold.
    pub fn close(&mut self) -> Vec<Vec<u8>> {
        match self.open.take() {
            Some(o) if !o.decoded => {
                self.counters.blocks_abandoned += 1;
                let pkts = extract_systematic(&o.state, &o.starts);
                self.counters.delivered_extracted += pkts.len() as u64;
                pkts
            }
            _ => Vec::new(),
        }
    }

    /// End of stream: like [`close`](Self::close) but keeps the BID so late
    /// duplicates stay stale.
    pub fn flush(&mut self) -> Vec<Vec<u8>> {
        let bid = self.open.as_ref().map(|o| o.bid);
        let out = self.close();
        if let Some(bid) = bid {
            self.open = Some(Open {
                bid,
                state: DecoderState::new(1, 1),
                starts: Vec::new(),
                decoded: true,
            });
        }
        out
    }
}

/// Routes wire packets to decoder workers by TID.
pub struct DecoderMaster {
    workers: Vec<DecoderWorker>,
    unknown_tid: u64,
    malformed: u64,
}

impl DecoderMaster {
    pub fn new(workers: usize) -> Self {
        DecoderMaster {
            workers: (0..workers).map(|t| DecoderWorker::new(t as u8)).collect(),
            unknown_tid: 0,
            malformed: 0,
        }
    }

    pub fn receive(&mut self, wire: &[u8]) -> Received {
        let Ok((h, seg)) = decapsulate(wire) else {
            self.malformed += 1;
            return Received::default();
        };
        match self.workers.get_mut(usize::from(h.tid)) {
            Some(w) => w.ingest(&h, seg),
            None => {
                self.unknown_tid += 1;
                Received::default()
            }
        }
    }

    pub fn flush(&mut self) -> Vec<Vec<u8>> {
        self.workers
            .iter_mut()
            .flat_map(DecoderWorker::flush)
            .collect()
    }

    pub fn workers(&self) -> &[DecoderWorker] {
        &self.workers
    }

    /// Counters summed over workers, plus the master's own drops.
    pub fn counters(&self) -> DecoderCounters {
        let mut c = DecoderCounters::default();
        for w in &self.workers {
            let x = w.counters();
            c.packets += x.packets;
            c.innovative += x.innovative;
            c.redundant += x.redundant;
            c.stale += x.stale;
            c.after_decode += x.after_decode;
            c.inconsistent += x.inconsistent;
            c.malformed += x.malformed;
            c.blocks_opened += x.blocks_opened;
            c.blocks_decoded += x.blocks_decoded;
            c.blocks_abandoned += x.blocks_abandoned;
            c.corrupt_blocks += x.corrupt_blocks;
            c.delivered_decoded += x.delivered_decoded;
            c.delivered_extracted += x.delivered_extracted;
            c.acks += x.acks;
        }
        c.unknown_tid = self.unknown_tid;
        c.malformed += self.malformed;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{CodecParams, SequentialSeeds};
    use crate::framing::datagram;
    use crate::pipeline::{BufferList, EncoderWorker, Step};
    use std::time::Duration;

    fn wire_block(
        tid: u8,
        first_id: u32,
        n: u32,
        redundancy: usize,
    ) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
        let packets: Vec<Vec<u8>> = (first_id..first_id + n)
            .map(|i| datagram::build(i, 1400))
            .collect();
        let mut w = EncoderWorker::new(
            tid,
            CodecParams::default().with_redundancy(redundancy),
            4,
            Box::new(SequentialSeeds::default()),
        );
        w.offer(BufferList {
            len: packets.iter().map(Vec::len).sum(),
            packets: packets.clone(),
        })
        .unwrap();
        let mut wire = Vec::new();
        while let Step::Emit(p) = w.step(Duration::ZERO) {
            wire.push(p);
        }
        (packets, wire)
    }

    #[test]
    fn systematic_set_delivers_and_acks_once() {
        let (pkts, wire) = wire_block(0, 0, 16, 10);
        let mut m = DecoderMaster::new(1);
        let mut delivered = Vec::new();
        let mut acks = Vec::new();
        for p in &wire {
            let r = m.receive(p);
            delivered.extend(r.delivered);
            acks.extend(r.ack);
        }
        assert_eq!(delivered, pkts);
        assert_eq!(acks, [(0, 0)]);
        assert_eq!(m.counters().after_decode, 10);
    }

    #[test]
    fn coded_packets_fill_erasures() {
        let (pkts, wire) = wire_block(0, 0, 16, 30);
        let mut m = DecoderMaster::new(1);
        let mut delivered = Vec::new();
        // Lose every fourth systematic packet.
        for (i, p) in wire.iter().enumerate() {
            if i < 120 && i % 4 == 0 {
                continue;
            }
            delivered.extend(m.receive(p).delivered);
        }
        assert_eq!(delivered, pkts);
        assert_eq!(m.counters().blocks_decoded, 1);
    }

    #[test]
    fn newer_block_extracts_previous() {
        let (pkts, wire) = wire_block(0, 0, 16, 0);
        let mut w = DecoderWorker::new(0);
        // Segments 0..99 arrive; the rest of block 0 is lost.
        for p in &wire[..100] {
            let (h, s) = decapsulate(p).unwrap();
            assert!(w.ingest(&h, s).delivered.is_empty());
        }
        assert_eq!(w.rank(), Some((0, 100)));
        let (h, s) = decapsulate(&wire[0]).unwrap();
        let next = NcHeader { bid: 1, ..h };
        let r = w.ingest(&next, s);
        // 100 segments of 187 bytes hold 18 700 bytes: 13 whole packets.
        assert_eq!(r.delivered, pkts[..13]);
        assert_eq!(w.rank(), Some((1, 1)));
        assert_eq!(w.counters().blocks_abandoned, 1);
        // Stale BID is dropped.
        let r = w.ingest(&h, s);
        assert!(r.delivered.is_empty() && r.ack.is_none());
        assert_eq!(w.counters().stale, 1);
    }

    #[test]
    fn unknown_tid_counted() {
        let (_, wire) = wire_block(5, 0, 1, 0);
        let mut m = DecoderMaster::new(2);
        m.receive(&wire[0]);
        assert_eq!(m.counters().unknown_tid, 1);
        let mut bad = wire[0].clone();
        bad[30] ^= 1;
        m.receive(&bad);
        assert_eq!(m.counters().malformed, 1);
    }

    #[test]
    fn flush_extracts_then_ignores_tail() {
        let (pkts, wire) = wire_block(0, 0, 16, 10);
        let mut w = DecoderWorker::new(0);
        for p in &wire[..119] {
            let (h, s) = decapsulate(p).unwrap();
            w.ingest(&h, s);
        }
        assert_eq!(w.flush(), pkts[..15]);
        let (h, s) = decapsulate(&wire[120]).unwrap();
        assert_eq!(w.ingest(&h, s), Received::default());
        assert!(w.flush().is_empty());
    }
}
