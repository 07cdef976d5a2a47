//! The pipeline on OS threads: one master and `Np` workers per side,
//! connected by channels, with an in-process loopback in place of the network.

use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use super::{
    BufferList, DecoderCounters, DecoderWorker, EncoderWorker, MasterBatcher, RoundRobin, Step,
};
use crate::codec::{CodecParams, DistinctSeeds};
use crate::framing::{decapsulate, decode_ack};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopbackReport {
    pub delivered: Vec<Vec<u8>>,
    pub acks: u64,
    pub emitted: u64,
    pub decoder: DecoderCounters,
}

enum ToEncoder {
    List(BufferList),
    Ack(u8),
    /// No more lists will follow.
    Close,
}

/// Pushes `packets` through encoder threads, a loopback that drops every
/// packet for which `erase` returns true, and decoder threads. ACKs travel
/// back to the encoders. Blocks until every thread finishes.
pub fn run_loopback(
    packets: Vec<Vec<u8>>,
    params: &CodecParams,
    workers: usize,
    seed: u64,
    mut erase: impl FnMut(&[u8]) -> bool + Send + 'static,
) -> LoopbackReport {
    let n = workers.clamp(1, 256);
    let (wire_tx, wire_rx) = mpsc::channel::<Vec<u8>>();
    let (out_tx, out_rx) = mpsc::channel::<(usize, Vec<Vec<u8>>)>();
    let mut enc_tx = Vec::new();
    let mut enc_handles = Vec::new();

    for t in 0..n {
        let (tx, rx) = mpsc::channel::<ToEncoder>();
        enc_tx.push(tx);
        let wire = wire_tx.clone();
        let params = params.clone();
        enc_handles.push(thread::spawn(move || {
            let seeds = Box::new(DistinctSeeds::new(seed.wrapping_add(t as u64)));
            let mut w = EncoderWorker::new(t as u8, params, usize::MAX, seeds);
            let start = Instant::now();
            let mut open = true;
            while open || !w.is_idle() {
                // Block for work only when there is nothing to send.
                loop {
                    let msg = if w.is_idle() && open {
                        rx.recv().ok()
                    } else {
                        rx.try_recv().ok()
                    };
                    match msg {
                        Some(ToEncoder::List(l)) => {
                            let _ = w.offer(l);
                        }
                        Some(ToEncoder::Ack(bid)) => {
                            w.on_ack(bid);
                        }
                        Some(ToEncoder::Close) | None if w.is_idle() => {
                            open = false;
                            break;
                        }
                        Some(ToEncoder::Close) => open = false,
                        None => break,
                    }
                }
                match w.step(start.elapsed()) {
                    Step::Emit(p) => {
                        if wire.send(p).is_err() {
                            break;
                        }
                    }
                    Step::Wait(t) => thread::sleep(t.saturating_sub(start.elapsed())),
                    Step::Idle => {}
                }
            }
            w.counters().emitted
        }));
    }
    drop(wire_tx);

    // Decoder side: a master thread routing to one thread per worker.
    let (ack_tx, ack_rx) = mpsc::channel::<(u8, u8)>();
    let mut dec_tx = Vec::new();
    let mut dec_handles = Vec::new();
    for t in 0..n {
        let (tx, rx) = mpsc::channel::<Vec<u8>>();
        dec_tx.push(tx);
        let out = out_tx.clone();
        let acks = ack_tx.clone();
        dec_handles.push(thread::spawn(move || {
            let mut w = DecoderWorker::new(t as u8);
            for pkt in rx {
                let Ok((h, seg)) = decapsulate(&pkt) else {
                    continue;
                };
                let r = w.ingest(&h, seg);
                if let Some(a) = r.ack {
                    let _ = acks.send(a);
                }
                if !r.delivered.is_empty() {
                    let _ = out.send((t, r.delivered));
                }
            }
            let tail = w.flush();
            if !tail.is_empty() {
                let _ = out.send((t, tail));
            }
            w.counters().clone()
        }));
    }
    drop(out_tx);
    drop(ack_tx);

    let router = thread::spawn(move || {
        for pkt in wire_rx {
            if erase(&pkt) {
                continue;
            }
            if let Ok((h, _)) = decapsulate(&pkt) {
                if let Some(tx) = dec_tx.get(usize::from(h.tid)) {
                    let _ = tx.send(pkt);
                }
            }
        }
    });

    let ack_router = {
        let enc_tx = enc_tx.clone();
        thread::spawn(move || {
            let mut n = 0u64;
            for (tid, bid) in ack_rx {
                let wire = crate::framing::encode_ack(tid, bid);
                if let Ok((tid, bid)) = decode_ack(&wire) {
                    n += 1;
                    if let Some(tx) = enc_tx.get(usize::from(tid)) {
                        let _ = tx.send(ToEncoder::Ack(bid));
                    }
                }
            }
            n
        })
    };

    // Encoder master.
    let mut batcher = MasterBatcher::new(params);
    let mut rr = RoundRobin::new(n);
    let start = Instant::now();
    let mut lists = Vec::new();
    for p in packets {
        lists.extend(batcher.push(p, start.elapsed()));
    }
    lists.extend(batcher.flush());
    for l in lists {
        let _ = enc_tx[rr.next_worker()].send(ToEncoder::List(l));
    }
    for tx in &enc_tx {
        let _ = tx.send(ToEncoder::Close);
    }
    drop(enc_tx);

    let emitted = enc_handles
        .into_iter()
        .map(|h| h.join().expect("encoder thread"))
        .sum();
    router.join().expect("router thread");
    let mut decoder = DecoderCounters::default();
    for h in dec_handles {
        let c = h.join().expect("decoder thread");
        decoder.blocks_decoded += c.blocks_decoded;
        decoder.blocks_abandoned += c.blocks_abandoned;
        decoder.packets += c.packets;
        decoder.delivered_decoded += c.delivered_decoded;
        decoder.delivered_extracted += c.delivered_extracted;
    }
    let acks = ack_router.join().expect("ack thread");
    let delivered = out_rx.into_iter().flat_map(|(_, v)| v).collect();
    LoopbackReport {
        delivered,
        acks,
        emitted,
        decoder,
    }
}
