//! Master/worker encoder and decoder processes.
//!
//! The components here are plain state machines driven by the caller's
//! clock. [`sim`] drives them from the discrete-event channel; [`threaded`]
//! runs one OS thread per master and worker connected by channels.

mod decoder;
mod encoder;
pub mod sim;
pub mod threaded;

use std::time::Duration;

use crate::codec::CodecParams;
use crate::time::SimTime;

pub use decoder::{DecoderCounters, DecoderMaster, DecoderWorker, Received};
pub use encoder::{BlockRecord, EncoderCounters, EncoderWorker, Step};

/// Packets collected by the encoder master before they are handed to a worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BufferList {
    pub packets: Vec<Vec<u8>>,
    pub len: usize,
}

/// Accumulates ingress packets until the list reaches `Lt` bytes or has been
/// open for `Ti`. The timer starts with the first packet of each list.
#[derive(Debug, Clone)]
pub struct MasterBatcher {
    threshold: usize,
    interval: Duration,
    packets: Vec<Vec<u8>>,
    len: usize,
    opened_at: Option<SimTime>,
}

impl MasterBatcher {
    pub fn new(params: &CodecParams) -> Self {
        MasterBatcher {
            threshold: params.buffer_threshold,
            interval: params.buffer_interval,
            packets: Vec::new(),
            len: 0,
            opened_at: None,
        }
    }

    pub fn push(&mut self, packet: Vec<u8>, now: SimTime) -> Option<BufferList> {
        self.opened_at.get_or_insert(now);
        self.len += packet.len();
        self.packets.push(packet);
        if self.len >= self.threshold {
            self.flush()
        } else {
            None
        }
    }

    /// When the open list times out, if one is open.
    pub fn deadline(&self) -> Option<SimTime> {
        self.opened_at.map(|t| t + self.interval)
    }

    pub fn poll(&mut self, now: SimTime) -> Option<BufferList> {
        match self.deadline() {
            Some(d) if now >= d => self.flush(),
            _ => None,
        }
    }

    pub fn flush(&mut self) -> Option<BufferList> {
        self.opened_at = None;
        if self.packets.is_empty() {
            return None;
        }
        let len = std::mem::take(&mut self.len);
        Some(BufferList {
            packets: std::mem::take(&mut self.packets),
            len,
        })
    }

    pub fn pending_packets(&self) -> usize {
        self.packets.len()
    }
}

/// Round-robin assignment of buffer lists to encoder workers.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    n: usize,
    next: usize,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one worker");
        RoundRobin { n, next: 0 }
    }

    pub fn next_worker(&mut self) -> usize {
        let w = self.next;
        self.next = (self.next + 1) % self.n;
        w
    }
}

/// `a` is newer than `b` under mod-256 serial-number arithmetic.
pub fn bid_newer(a: u8, b: u8) -> bool {
    let d = a.wrapping_sub(b);
    d != 0 && d < 128
}
