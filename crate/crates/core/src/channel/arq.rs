use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    ChannelModel, EventQueue, HarqConfig, Link, LossModel, Offer, TransferOutcome, Transmit,
};
use crate::time::SimTime;

/// Selective-repeat ARQ parameters. Defaults are the base-station settings
/// of the reference deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArqConfig {
    /// Wait after the last transmission of an unacknowledged block before resending it.
    #[serde(rename = "retry_timeout_ms", with = "crate::time::ms")]
    pub retry_timeout: Duration,
    pub block_size: usize,
    /// Maximum number of outstanding blocks.
    pub window: usize,
    /// A block still unacknowledged this long after its first transmission is discarded.
    #[serde(rename = "block_lifetime_ms", with = "crate::time::ms")]
    pub block_lifetime: Duration,
    pub in_order: bool,
    /// Receiver gives up on a hole after this long.
    #[serde(rename = "rx_purge_timeout_ms", with = "crate::time::ms")]
    pub rx_purge_timeout: Duration,
    /// Transmit window start frozen this long counts as a loss of sync and resets the window.
    #[serde(rename = "sync_loss_timeout_ms", with = "crate::time::ms")]
    pub sync_loss_timeout: Duration,
    /// Receiver batches acknowledgements for this long.
    #[serde(rename = "feedback_interval_ms", with = "crate::time::ms")]
    pub feedback_interval: Duration,
    pub feedback_bytes: usize,
    /// Erasure probability of feedback messages; `None` reuses the data loss model.
    pub feedback_loss: Option<f64>,
    /// Bytes of SDUs waiting for the window before new ones are tail-dropped.
    pub mac_queue_bytes: usize,
}

impl Default for ArqConfig {
    fn default() -> Self {
        ArqConfig {
            retry_timeout: Duration::from_millis(100),
            block_size: 256,
            window: 1024,
            block_lifetime: Duration::from_millis(500),
            in_order: true,
            rx_purge_timeout: Duration::from_millis(500),
            sync_loss_timeout: Duration::from_millis(1000),
            feedback_interval: Duration::from_millis(5),
            feedback_bytes: 16,
            feedback_loss: None,
            mac_queue_bytes: 1 << 20,
        }
    }
}

impl ArqConfig {
    pub fn validate(&self) -> Result<(), super::ChannelError> {
        let bad = |field, reason: &str| {
            Err(super::ChannelError {
                field,
                reason: reason.to_string(),
            })
        };
        if self.block_size == 0 {
            return bad("arq.block_size", "must be positive");
        }
        if self.window == 0 {
            return bad("arq.window", "must be at least 1");
        }
        if self.retry_timeout.is_zero() || self.block_lifetime.is_zero() {
            return bad(
                "arq timers",
                "retry timeout and block lifetime must be positive",
            );
        }
        if let Some(p) = self.feedback_loss {
            super::check_prob("arq.feedback_loss", p)?;
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Ev {
    Offer(usize),
    LinkFree,
    Arrive(usize),
    Retry(usize, u32),
    Expire(usize),
    Feedback,
    FeedbackArrive(usize),
    DiscardNotice(usize),
    Purge(usize),
    SyncCheck(usize),
}

#[derive(Debug, Default)]
struct Block {
    sdu: usize,
    bytes: usize,
    first_tx: Option<SimTime>,
    tx_count: u32,
    acked: bool,
    discarded: bool,
    rx: bool,
    rx_skipped: bool,
}

#[derive(Debug)]
struct Sdu {
    id: u32,
    last_block: usize,
    missing: usize,
    broken: bool,
}

struct Sim<'a> {
    cfg: &'a ArqConfig,
    harq: Option<&'a HarqConfig>,
    offers: &'a [Offer],
    down: Link,
    up: Link,
    q: EventQueue<Ev>,
    out: TransferOutcome,

    sdus: Vec<Sdu>,
    blocks: Vec<Block>,
    // Sender.
    next_new: usize,
    base: usize,
    base_since: SimTime,
    retx: VecDeque<usize>,
    mac_bytes: usize,
    link_wake: Option<SimTime>,
    // Receiver.
    log: Vec<usize>,
    acked_upto: usize,
    feedback_pending: bool,
    rx_next: usize,
    rx_max: Option<usize>,
    purge_for: Option<usize>,
}

impl<'a> Sim<'a> {
    fn pump(&mut self, now: SimTime) {
        if !self.down.is_idle(now) {
            let at = self.down.busy_until();
            if self.link_wake != Some(at) {
                self.link_wake = Some(at);
                self.q.push(at, Ev::LinkFree);
            }
            return;
        }
        let seq = loop {
            match self.retx.pop_front() {
                Some(s) if self.blocks[s].acked || self.blocks[s].discarded => continue,
                Some(s) => break Some(s),
                None => {}
            }
            if self.next_new < self.blocks.len() && self.next_new < self.base + self.cfg.window {
                let s = self.next_new;
                self.next_new += 1;
                self.mac_bytes -= self.blocks[s].bytes;
                if self.base == s {
                    self.base_since = now;
                    self.q
                        .push(now + self.cfg.sync_loss_timeout, Ev::SyncCheck(s));
                }
                break Some(s);
            }
            break None;
        };
        let Some(seq) = seq else { return };

        let bytes = self.blocks[seq].bytes;
        let t = match self.harq {
            Some(h) => self.down.transmit_harq(now, bytes, h),
            None => self.down.transmit(now, bytes),
        };
        let b = &mut self.blocks[seq];
        b.tx_count += 1;
        if b.tx_count > 1 {
            self.out.stats.arq_retransmissions += 1;
        }
        if b.first_tx.is_none() {
            b.first_tx = Some(now);
            self.q.push(now + self.cfg.block_lifetime, Ev::Expire(seq));
        }
        let n = b.tx_count;
        if let Transmit::Sent { done, arrival, .. } = t {
            self.q
                .push(done + self.cfg.retry_timeout, Ev::Retry(seq, n));
            if let Some(a) = arrival {
                self.q.push(a, Ev::Arrive(seq));
            }
            self.link_wake = Some(done);
            self.q.push(done, Ev::LinkFree);
        }
    }

    fn offer(&mut self, now: SimTime, i: usize) {
        let o = self.offers[i];
        let n = o.len.div_ceil(self.cfg.block_size).max(1);
        let queued = o.len.max(1);
        if self.mac_bytes + queued > self.cfg.mac_queue_bytes {
            self.out.stats.mac_queue_drops += 1;
            return;
        }
        let sdu = self.sdus.len();
        let first = self.blocks.len();
        for k in 0..n {
            let bytes = (o.len - k * self.cfg.block_size)
                .min(self.cfg.block_size)
                .max(1);
            self.blocks.push(Block {
                sdu,
                bytes,
                ..Block::default()
            });
        }
        self.sdus.push(Sdu {
            id: o.id,
            last_block: first + n - 1,
            missing: n,
            broken: false,
        });
        self.mac_bytes += queued;
        self.pump(now);
    }

    fn advance_base(&mut self, now: SimTime) {
        let old = self.base;
        while self.base < self.next_new
            && (self.blocks[self.base].acked || self.blocks[self.base].discarded)
        {
            self.base += 1;
        }
        if self.base != old {
            self.base_since = now;
            if self.base < self.next_new {
                self.q
                    .push(now + self.cfg.sync_loss_timeout, Ev::SyncCheck(self.base));
            }
            self.pump(now);
        }
    }

    fn discard(&mut self, now: SimTime, seq: usize) {
        let b = &mut self.blocks[seq];
        if b.acked || b.discarded {
            return;
        }
        b.discarded = true;
        self.out.stats.arq_discards += 1;
        self.q.push(now + self.down.delay(), Ev::DiscardNotice(seq));
    }

    fn arrive(&mut self, now: SimTime, seq: usize) {
        if !self.feedback_pending {
            self.feedback_pending = true;
            self.q.push(now + self.cfg.feedback_interval, Ev::Feedback);
        }
        if self.blocks[seq].rx {
            return;
        }
        self.blocks[seq].rx = true;
        self.log.push(seq);
        if self.cfg.in_order {
            if seq >= self.rx_next {
                self.rx_max = Some(self.rx_max.map_or(seq, |m| m.max(seq)));
            }
            self.release(now);
        } else {
            let s = self.blocks[seq].sdu;
            self.sdus[s].missing -= 1;
            if self.sdus[s].missing == 0 {
                self.out.delivered.push((self.sdus[s].id, now));
            }
        }
    }

    fn release(&mut self, now: SimTime) {
        while self.rx_next < self.blocks.len() {
            let b = &self.blocks[self.rx_next];
            if !(b.rx || b.rx_skipped) {
                break;
            }
            let s = b.sdu;
            if !b.rx {
                self.sdus[s].broken = true;
            }
            if self.sdus[s].last_block == self.rx_next && !self.sdus[s].broken {
                self.out.delivered.push((self.sdus[s].id, now));
            }
            self.rx_next += 1;
        }
        let hole = self.rx_max.is_some_and(|m| m > self.rx_next);
        if hole && self.purge_for != Some(self.rx_next) {
            self.purge_for = Some(self.rx_next);
            self.q
                .push(now + self.cfg.rx_purge_timeout, Ev::Purge(self.rx_next));
        }
    }

    fn skip(&mut self, now: SimTime, seq: usize) {
        if self.cfg.in_order && seq >= self.rx_next && !self.blocks[seq].rx {
            self.blocks[seq].rx_skipped = true;
            self.release(now);
        }
    }

    fn handle(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::Offer(i) => self.offer(now, i),
            Ev::LinkFree => {
                if self.link_wake == Some(now) {
                    self.link_wake = None;
                }
                self.pump(now);
            }
            Ev::Arrive(seq) => self.arrive(now, seq),
            Ev::Retry(seq, n) => {
                let b = &self.blocks[seq];
                let alive = !(b.acked || b.discarded) && b.tx_count == n;
                let in_lifetime = b
                    .first_tx
                    .is_some_and(|t| now < t + self.cfg.block_lifetime);
                if alive && in_lifetime {
                    self.retx.push_back(seq);
                    self.pump(now);
                }
            }
            Ev::Expire(seq) => {
                self.discard(now, seq);
                self.advance_base(now);
            }
            Ev::Feedback => {
                self.feedback_pending = false;
                let k = self.log.len();
                let bytes = self.cfg.feedback_bytes;
                self.out.stats.uplink_bytes += bytes as u64;
                if let Transmit::Sent {
                    arrival: Some(a), ..
                } = self.up.transmit(now, bytes)
                {
                    self.q.push(a, Ev::FeedbackArrive(k));
                }
            }
            Ev::FeedbackArrive(k) => {
                for i in self.acked_upto..k.max(self.acked_upto) {
                    let b = &mut self.blocks[self.log[i]];
                    if !b.discarded {
                        b.acked = true;
                    }
                }
                self.acked_upto = self.acked_upto.max(k);
                self.advance_base(now);
            }
            Ev::DiscardNotice(seq) => self.skip(now, seq),
            Ev::Purge(seq) => {
                if self.purge_for == Some(seq) {
                    self.purge_for = None;
                }
                self.skip(now, seq);
            }
            Ev::SyncCheck(b) => {
                let frozen = self.base == b && self.base < self.next_new;
                if frozen && now >= self.base_since + self.cfg.sync_loss_timeout {
                    self.out.stats.sync_resets += 1;
                    for seq in self.base..self.next_new {
                        self.discard(now, seq);
                    }
                    self.retx.clear();
                    self.advance_base(now);
                }
            }
        }
    }
}

/// Runs `offers` through a selective-repeat ARQ sender and receiver over the
/// downlink of `model`, with feedback on the uplink. With `harq`, every ARQ
/// block transmission is a CC-HARQ burst.
pub fn arq_transfer(
    offers: &[Offer],
    cfg: &ArqConfig,
    harq: Option<&HarqConfig>,
    model: &ChannelModel,
    seed: u64,
) -> TransferOutcome {
    // The ARQ sender is link-paced; its bounded MAC queue replaces the link's.
    let down = Link::new(
        model.rate_bps,
        model.one_way_delay,
        None,
        super::LossProcess::new(model.loss.clone(), seed),
    );
    let feedback_loss = match cfg.feedback_loss {
        Some(p) => LossModel::Bernoulli { p },
        None => model.loss.clone(),
    };
    let up = model.uplink(feedback_loss, seed ^ 0x5EED_F00D_u64);
    let mut sim = Sim {
        cfg,
        harq,
        offers,
        down,
        up,
        q: EventQueue::new(),
        out: TransferOutcome::default(),
        sdus: Vec::with_capacity(offers.len()),
        blocks: Vec::new(),
        next_new: 0,
        base: 0,
        base_since: Duration::ZERO,
        retx: VecDeque::new(),
        mac_bytes: 0,
        link_wake: None,
        log: Vec::new(),
        acked_upto: 0,
        feedback_pending: false,
        rx_next: 0,
        rx_max: None,
        purge_for: None,
    };
    for (i, o) in offers.iter().enumerate() {
        sim.q.push(o.at, Ev::Offer(i));
    }
    while let Some((now, ev)) = sim.q.pop() {
        sim.handle(now, ev);
    }
    let s = sim.down.stats().clone();
    let mut out = sim.out;
    out.stats.link_erasures = s.erased;
    out.stats.downlink_bytes = s.bytes;
    out.stats.harq_attempts = if harq.is_some() { s.attempts } else { 0 };
    out.stats.undelivered = (offers.len() - out.delivered.len()) as u64;
    out
}
