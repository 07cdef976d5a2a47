use std::collections::VecDeque;

use super::BufferList;
use crate::codec::{AckSignal, BlockEncoder, CodecParams, CodingBlock, SeedSource};
use crate::framing::{encapsulate, NcHeader};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// A packet ready for the wire.
    Emit(Vec<u8>),
    /// Nothing to send before this instant (inter-round pause).
    Wait(SimTime),
    /// No work queued.
    Idle,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncoderCounters {
    pub lists_accepted: u64,
    pub lists_rejected: u64,
    pub packets_rejected: u64,
    /// Lists whose block would need more than 255 segments.
    pub oversize_lists: u64,
    pub oversize_packets: u64,
    pub blocks: u64,
    pub emitted: u64,
    pub acks_applied: u64,
    pub acks_ignored: u64,
    /// Emissions whose SID no longer fits one byte.
    pub sid_overflow: u64,
}

/// What happened to one coding block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRecord {
    pub bid: u8,
    pub segments: usize,
    pub packets: usize,
    pub emitted: usize,
    pub planned: usize,
    pub acked: bool,
}

struct Active {
    bid: u8,
    enc: BlockEncoder,
    packets: usize,
    waited_for: Option<usize>,
    resume_at: Option<SimTime>,
}

/// One encoder worker: a queue of buffer lists and at most one block in flight.
pub struct EncoderWorker {
    tid: u8,
    params: CodecParams,
    queue: VecDeque<BufferList>,
    queue_cap: usize,
    next_bid: u8,
    active: Option<Active>,
    seeds: Box<dyn SeedSource + Send>,
    counters: EncoderCounters,
    records: Vec<BlockRecord>,
}

impl EncoderWorker {
    pub fn new(
        tid: u8,
        params: CodecParams,
        queue_cap: usize,
        seeds: Box<dyn SeedSource + Send>,
    ) -> Self {
        EncoderWorker {
            tid,
            params,
            queue: VecDeque::new(),
            queue_cap: queue_cap.max(1),
            next_bid: 0,
            active: None,
            seeds,
            counters: EncoderCounters::default(),
            records: Vec::new(),
        }
    }

    pub fn tid(&self) -> u8 {
        self.tid
    }

    /// Queues a list, or hands it back when the queue is full.
    pub fn offer(&mut self, list: BufferList) -> Result<(), BufferList> {
        if self.queue.len() >= self.queue_cap {
            self.counters.lists_rejected += 1;
            self.counters.packets_rejected += list.packets.len() as u64;
            return Err(list);
        }
        self.counters.lists_accepted += 1;
        self.queue.push_back(list);
        Ok(())
    }

    /// Cancels the current block's remaining emissions if `bid` names it.
    pub fn on_ack(&mut self, bid: u8) -> bool {
        match &self.active {
            Some(a) if a.bid == bid && !a.enc.ack_signal().is_fired() => {
                a.enc.ack_signal().fire();
                self.counters.acks_applied += 1;
                true
            }
            _ => {
                self.counters.acks_ignored += 1;
                false
            }
        }
    }

    /// BID and cancellation token of the block in flight.
    pub fn current(&self) -> Option<(u8, AckSignal)> {
        self.active
            .as_ref()
            .map(|a| (a.bid, a.enc.ack_signal().clone()))
    }

    pub fn is_idle(&self) -> bool {
        self.active.is_none() && self.queue.is_empty()
    }

    pub fn counters(&self) -> &EncoderCounters {
        &self.counters
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }

    fn retire(&mut self) {
        if let Some(a) = self.active.take() {
            self.records.push(BlockRecord {
                bid: a.bid,
                segments: a.enc.block().segment_count(),
                packets: a.packets,
                emitted: a.enc.emitted(),
                planned: a.enc.planned(),
                acked: a.enc.ack_signal().is_fired(),
            });
        }
    }

    fn activate(&mut self) -> bool {
        while let Some(list) = self.queue.pop_front() {
            let bid = self.next_bid;
            match CodingBlock::new(self.tid, bid, &list.packets, &self.params) {
                Ok(block) => {
                    self.next_bid = bid.wrapping_add(1);
                    self.counters.blocks += 1;
                    self.active = Some(Active {
                        bid,
                        enc: BlockEncoder::new(block, &self.params, AckSignal::new()),
                        packets: list.packets.len(),
                        waited_for: None,
                        resume_at: None,
                    });
                    return true;
                }
                Err(_) => {
                    self.counters.oversize_lists += 1;
                    self.counters.oversize_packets += list.packets.len() as u64;
                }
            }
        }
        false
    }

    pub fn step(&mut self, now: SimTime) -> Step {
        loop {
            if self.active.as_ref().is_some_and(|a| a.enc.is_finished()) {
                self.retire();
            }
            if self.active.is_none() && !self.activate() {
                return Step::Idle;
            }
            let a = self.active.as_mut().expect("activated");
            let pause = a.enc.pause_before_next();
            if !pause.is_zero() && a.waited_for != Some(a.enc.emitted()) {
                a.waited_for = Some(a.enc.emitted());
                a.resume_at = Some(now + pause);
            }
            if let Some(t) = a.resume_at {
                if now < t {
                    return Step::Wait(t);
                }
                a.resume_at = None;
            }
            let ns = a.enc.block().segment_count();
            let e = a
                .enc
                .next_emission(self.seeds.as_mut())
                .expect("encoder not finished");
            match NcHeader::for_emission(self.tid, a.bid, ns, &e)
                .and_then(|h| encapsulate(&h, &e.payload))
            {
                Ok(wire) => {
                    self.counters.emitted += 1;
                    return Step::Emit(wire);
                }
                Err(_) => {
                    // Nothing past this SID can be framed; end the block here.
                    self.counters.sid_overflow += 1;
                    a.enc.ack_signal().fire();
                }
            }
        }
    }
}
