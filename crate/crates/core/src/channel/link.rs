use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{HarqConfig, LossModel};
use crate::time::SimTime;

/// A seeded realisation of a [`LossModel`].
#[derive(Debug, Clone)]
pub struct LossProcess {
    model: LossModel,
    bad: bool,
    rng: ChaCha8Rng,
}

impl LossProcess {
    pub fn new(model: LossModel, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Start Gilbert-Elliott chains in their stationary distribution.
        let bad = match model {
            LossModel::GilbertElliott {
                good_to_bad,
                bad_to_good,
                ..
            } if good_to_bad + bad_to_good > 0.0 => {
                rng.random::<f64>() < good_to_bad / (good_to_bad + bad_to_good)
            }
            _ => false,
        };
        LossProcess { model, bad, rng }
    }

    /// Advances one packet and returns the erasure probability that applies to it.
    pub fn step(&mut self) -> f64 {
        match self.model {
            LossModel::Bernoulli { p } => p,
            LossModel::GilbertElliott {
                p_good,
                p_bad,
                good_to_bad,
                bad_to_good,
            } => {
                let flip = if self.bad { bad_to_good } else { good_to_bad };
                if self.rng.random::<f64>() < flip {
                    self.bad = !self.bad;
                }
                if self.bad {
                    p_bad
                } else {
                    p_good
                }
            }
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn erase(&mut self) -> bool {
        let p = self.step();
        self.uniform() < p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmit {
    /// Tail-dropped at the transmit queue.
    Dropped,
    Sent {
        /// When the last bit leaves the sender.
        done: SimTime,
        /// `None` when erased.
        arrival: Option<SimTime>,
        attempts: u32,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub sent: u64,
    pub erased: u64,
    pub queue_drops: u64,
    pub bytes: u64,
    pub attempts: u64,
}

/// FIFO point-to-point link: serialization at `rate_bps`, then a fixed
/// propagation delay, then an erasure draw.
#[derive(Debug, Clone)]
pub struct Link {
    rate_bps: f64,
    delay: Duration,
    queue_limit: Option<usize>,
    busy_until: SimTime,
    loss: LossProcess,
    stats: LinkStats,
}

impl Link {
    pub fn new(
        rate_bps: f64,
        delay: Duration,
        queue_limit: Option<usize>,
        loss: LossProcess,
    ) -> Self {
        assert!(rate_bps > 0.0, "link rate must be positive");
        Link {
            rate_bps,
            delay,
            queue_limit,
            busy_until: Duration::ZERO,
            loss,
            stats: LinkStats::default(),
        }
    }

    pub fn serialization(&self, bytes: usize) -> Duration {
        Duration::from_secs_f64(bytes as f64 * 8.0 / self.rate_bps)
    }

    pub fn delay(&self) -> Duration {
        self.delay
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    pub fn is_idle(&self, now: SimTime) -> bool {
        self.busy_until <= now
    }

    /// Bytes still waiting to be serialized at `now`.
    pub fn backlog_bytes(&self, now: SimTime) -> usize {
        let wait = self.busy_until.saturating_sub(now);
        (wait.as_secs_f64() * self.rate_bps / 8.0).round() as usize
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    fn reserve(&mut self, now: SimTime, bytes: usize, attempts: u32) -> Option<SimTime> {
        if let Some(limit) = self.queue_limit {
            if self.backlog_bytes(now) + bytes > limit {
                self.stats.queue_drops += 1;
                return None;
            }
        }
        let start = self.busy_until.max(now);
        let done = start + self.serialization(bytes) * attempts;
        self.busy_until = done;
        self.stats.sent += 1;
        self.stats.bytes += (bytes as u64) * u64::from(attempts);
        self.stats.attempts += u64::from(attempts);
        Some(done)
    }

    pub fn transmit(&mut self, now: SimTime, bytes: usize) -> Transmit {
        let Some(done) = self.reserve(now, bytes, 1) else {
            return Transmit::Dropped;
        };
        let arrival = if self.loss.erase() {
            self.stats.erased += 1;
            None
        } else {
            Some(done + self.delay)
        };
        Transmit::Sent {
            done,
            arrival,
            attempts: 1,
        }
    }

    /// Sends one HARQ burst. Attempts occupy consecutive airtime; a success on
    /// attempt `k` (0-based) is additionally held back by `k` HARQ round trips.
    pub fn transmit_harq(&mut self, now: SimTime, bytes: usize, cfg: &HarqConfig) -> Transmit {
        let p = self.loss.step();
        let mut success = None;
        let mut attempts = 0;
        for k in 0..=cfg.max_retx {
            attempts += 1;
            if self.loss.uniform() >= cfg.combining.failure_prob(p, k) {
                success = Some(k);
                break;
            }
        }
        let Some(done) = self.reserve(now, bytes, attempts) else {
            return Transmit::Dropped;
        };
        let arrival = match success {
            Some(k) => Some(done + self.delay + cfg.retry_gap() * k),
            None => {
                self.stats.erased += 1;
                None
            }
        };
        Transmit::Sent {
            done,
            arrival,
            attempts,
        }
    }
}
