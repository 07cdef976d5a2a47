//! The pipeline driven by the discrete-event channel.
//!
//! Encoder workers are paced by the downlink: a worker is asked for its next
//! packet only when the link is free, workers taking turns. Lists that find a
//! worker's queue full are dropped at the master.

use serde::{Deserialize, Serialize};

use super::{
    BlockRecord, DecoderCounters, DecoderMaster, EncoderCounters, EncoderWorker, MasterBatcher,
    RoundRobin, Step,
};
use crate::channel::{
    ChannelModel, EventQueue, HarqConfig, Link, LossModel, Offer, TransferOutcome, Transmit,
};
use crate::codec::{CodecParams, DistinctSeeds, SeedSource, SequentialSeeds};
use crate::framing::{datagram, decode_ack, ACK_LEN};
use crate::time::SimTime;

/// How coded packets pick their PRNG seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    #[default]
    Distinct,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub workers: usize,
    /// Buffer lists each encoder worker may hold besides the block in flight.
    pub worker_queue: usize,
    pub seeds: SeedMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workers: 1,
            worker_queue: 4,
            seeds: SeedMode::Distinct,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NcOutcome {
    pub transfer: TransferOutcome,
    pub encoder: EncoderCounters,
    pub decoder: DecoderCounters,
    pub blocks: Vec<BlockRecord>,
    pub acks_sent: u64,
    pub acks_lost: u64,
    /// Application packets still in the master batcher or a worker queue at shutdown.
    pub stranded: u64,
}

#[derive(Debug)]
enum Ev {
    Offer(usize),
    BatchDeadline,
    Pump,
    Arrive(Vec<u8>),
    AckArrive(Vec<u8>),
}

fn seed_source(mode: SeedMode, seed: u64) -> Box<dyn SeedSource + Send> {
    match mode {
        SeedMode::Distinct => Box::new(DistinctSeeds::new(seed)),
        SeedMode::Sequential => Box::new(SequentialSeeds::default()),
    }
}

struct Sim<'a> {
    offers: &'a [Offer],
    q: EventQueue<Ev>,
    batcher: MasterBatcher,
    rr: RoundRobin,
    workers: Vec<EncoderWorker>,
    turn: usize,
    down: Link,
    up: Link,
    harq: Option<&'a HarqConfig>,
    decoders: DecoderMaster,
    out: NcOutcome,
    pump_at: Option<SimTime>,
    deadline_at: Option<SimTime>,
}

impl Sim<'_> {
    fn schedule_pump(&mut self, at: SimTime) {
        if self.pump_at.is_none_or(|p| at < p) {
            self.pump_at = Some(at);
            self.q.push(at, Ev::Pump);
        }
    }

    fn dispatch(&mut self, list: super::BufferList, now: SimTime) {
        let w = self.rr.next_worker();
        if self.workers[w].offer(list).is_ok() {
            self.schedule_pump(now.max(self.down.busy_until()));
        }
    }

    fn pump(&mut self, now: SimTime) {
        if !self.down.is_idle(now) {
            self.schedule_pump(self.down.busy_until());
            return;
        }
        let n = self.workers.len();
        let mut wake: Option<SimTime> = None;
        for k in 0..n {
            let w = (self.turn + k) % n;
            match self.workers[w].step(now) {
                Step::Emit(pkt) => {
                    self.turn = (w + 1) % n;
                    let t = match self.harq {
                        Some(cfg) => self.down.transmit_harq(now, pkt.len(), cfg),
                        None => self.down.transmit(now, pkt.len()),
                    };
                    if let Transmit::Sent { done, arrival, .. } = t {
                        if let Some(a) = arrival {
                            self.q.push(a, Ev::Arrive(pkt));
                        }
                        self.schedule_pump(done);
                    }
                    return;
                }
                Step::Wait(t) => wake = Some(wake.map_or(t, |x| x.min(t))),
                Step::Idle => {}
            }
        }
        if let Some(t) = wake {
            self.schedule_pump(t);
        }
    }

    fn deliver(&mut self, pkts: Vec<Vec<u8>>, now: SimTime) {
        for p in pkts {
            if let Some(id) = datagram::id_of(&p) {
                self.out.transfer.delivered.push((id, now));
            }
        }
    }

    fn run(mut self) -> NcOutcome {
        for (i, o) in self.offers.iter().enumerate() {
            self.q.push(o.at, Ev::Offer(i));
        }
        let mut now = SimTime::ZERO;
        while let Some((t, ev)) = self.q.pop() {
            now = t;
            match ev {
                Ev::Offer(i) => {
                    let o = self.offers[i];
                    if let Some(list) = self.batcher.push(datagram::build(o.id, o.len), now) {
                        self.dispatch(list, now);
                    }
                    if let Some(d) = self.batcher.deadline() {
                        if self.deadline_at != Some(d) {
                            self.deadline_at = Some(d);
                            self.q.push(d, Ev::BatchDeadline);
                        }
                    }
                }
                Ev::BatchDeadline => {
                    if let Some(list) = self.batcher.poll(now) {
                        self.dispatch(list, now);
                    }
                }
                Ev::Pump => {
                    if self.pump_at == Some(now) {
                        self.pump_at = None;
                        self.pump(now);
                    }
                }
                Ev::Arrive(pkt) => {
                    let r = self.decoders.receive(&pkt);
                    self.deliver(r.delivered, now);
                    if let Some(ack) = r.ack.map(|(t, b)| crate::framing::encode_ack(t, b)) {
                        self.out.acks_sent += 1;
                        match self.up.transmit(now, ACK_LEN) {
                            Transmit::Sent {
                                arrival: Some(a), ..
                            } => self.q.push(a, Ev::AckArrive(ack)),
                            _ => self.out.acks_lost += 1,
                        }
                    }
                }
                Ev::AckArrive(wire) => {
                    if let Ok((tid, bid)) = decode_ack(&wire) {
                        if let Some(w) = self.workers.get_mut(usize::from(tid)) {
                            w.on_ack(bid);
                        }
                    }
                }
            }
        }
        let tail = self.decoders.flush();
        self.deliver(tail, now);

        let mut out = self.out;
        out.stranded = self.batcher.pending_packets() as u64;
        for w in &self.workers {
            let c = w.counters();
            out.encoder.lists_accepted += c.lists_accepted;
            out.encoder.lists_rejected += c.lists_rejected;
            out.encoder.packets_rejected += c.packets_rejected;
            out.encoder.oversize_lists += c.oversize_lists;
            out.encoder.oversize_packets += c.oversize_packets;
            out.encoder.blocks += c.blocks;
            out.encoder.emitted += c.emitted;
            out.encoder.acks_applied += c.acks_applied;
            out.encoder.acks_ignored += c.acks_ignored;
            out.encoder.sid_overflow += c.sid_overflow;
            out.blocks.extend_from_slice(w.records());
        }
        out.decoder = self.decoders.counters();
        let s = &mut out.transfer.stats;
        let d = self.down.stats();
        s.link_erasures = d.erased;
        s.link_queue_drops = d.queue_drops;
        s.harq_attempts = if self.harq.is_some() { d.attempts } else { 0 };
        s.downlink_bytes = d.bytes;
        s.uplink_bytes = self.up.stats().bytes;
        s.undelivered = (self.offers.len() - out.transfer.delivered.len()) as u64;
        out
    }
}

/// Runs application packets through batcher, encoder workers, the lossy
/// downlink and the decoders, with ACKs on the uplink.
pub fn nc_transfer(
    offers: &[Offer],
    params: &CodecParams,
    pipeline: &PipelineConfig,
    harq: Option<&HarqConfig>,
    model: &ChannelModel,
    seed: u64,
) -> NcOutcome {
    let n = pipeline.workers.clamp(1, 256);
    let workers = (0..n)
        .map(|t| {
            let s = seed_source(
                pipeline.seeds,
                seed.wrapping_add(0x9E37_79B9 * (t as u64 + 1)),
            );
            EncoderWorker::new(t as u8, params.clone(), pipeline.worker_queue, s)
        })
        .collect();
    let down = model.downlink(seed);
    Sim {
        offers,
        q: EventQueue::new(),
        batcher: MasterBatcher::new(params),
        rr: RoundRobin::new(n),
        workers,
        turn: 0,
        down,
        up: model.uplink(
            LossModel::Bernoulli { p: model.ack_loss },
            seed ^ 0xACC_5EED,
        ),
        harq,
        decoders: DecoderMaster::new(n),
        out: NcOutcome::default(),
        pump_at: None,
        deadline_at: None,
    }
    .run()
}
