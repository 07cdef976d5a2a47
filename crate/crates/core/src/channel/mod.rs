//! Discrete-event erasure links and the ARQ / CC-HARQ baseline models.
//!
//! Everything runs on a virtual clock. Randomness comes from seeded ChaCha
//! streams, so a run is a pure function of its configuration and seeds.

mod arq;
mod events;
mod harq;
mod link;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

pub use arq::{arq_transfer, ArqConfig};
pub use events::EventQueue;
pub use harq::{harq_transfer, raw_transfer, Combining, HarqConfig};
pub use link::{Link, LinkStats, LossProcess, Transmit};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid channel parameter {field}: {reason}")]
pub struct ChannelError {
    pub field: &'static str,
    pub reason: String,
}

fn check_prob(field: &'static str, p: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ChannelError {
            field,
            reason: format!("probability {p} outside [0, 1]"),
        })
    }
}

/// Per-packet erasure process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossModel {
    Bernoulli {
        p: f64,
    },
    /// Two-state Markov chain stepped once per packet.
    GilbertElliott {
        p_good: f64,
        p_bad: f64,
        good_to_bad: f64,
        bad_to_good: f64,
    },
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel::Bernoulli { p: 0.0 }
    }
}

impl LossModel {
    /// Long-run erasure probability.
    pub fn mean_loss(&self) -> f64 {
        match *self {
            LossModel::Bernoulli { p } => p,
            LossModel::GilbertElliott {
                p_good,
                p_bad,
                good_to_bad,
                bad_to_good,
            } => {
                let total = good_to_bad + bad_to_good;
                if total == 0.0 {
                    p_good
                } else {
                    let bad = good_to_bad / total;
                    bad * p_bad + (1.0 - bad) * p_good
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            LossModel::Bernoulli { p } => check_prob("loss.p", p),
            LossModel::GilbertElliott {
                p_good,
                p_bad,
                good_to_bad,
                bad_to_good,
            } => {
                check_prob("loss.p_good", p_good)?;
                check_prob("loss.p_bad", p_bad)?;
                check_prob("loss.good_to_bad", good_to_bad)?;
                check_prob("loss.bad_to_good", bad_to_good)
            }
        }
    }
}

/// Downlink erasure link plus the reverse path used for feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelModel {
    pub loss: LossModel,
    pub rate_bps: f64,
    pub uplink_rate_bps: f64,
    #[serde(rename = "one_way_delay_ms", with = "crate::time::ms")]
    pub one_way_delay: Duration,
    /// Erasure probability of NC ACK packets on the reverse path.
    pub ack_loss: f64,
    /// Tail-drop limit on the downlink transmit queue, in bytes.
    pub queue_limit_bytes: Option<usize>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            loss: LossModel::default(),
            rate_bps: 25.2e6,
            uplink_rate_bps: 1.344e6,
            one_way_delay: Duration::from_millis(10),
            ack_loss: 0.0,
            queue_limit_bytes: Some(1 << 20),
        }
    }
}

impl ChannelModel {
    pub fn bernoulli(p: f64) -> Self {
        ChannelModel {
            loss: LossModel::Bernoulli { p },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.loss.validate()?;
        check_prob("ack_loss", self.ack_loss)?;
        for (field, r) in [
            ("rate_bps", self.rate_bps),
            ("uplink_rate_bps", self.uplink_rate_bps),
        ] {
            if !(r.is_finite() && r > 0.0) {
                return Err(ChannelError {
                    field,
                    reason: format!("rate {r} must be positive"),
                });
            }
        }
        Ok(())
    }

    pub fn downlink(&self, seed: u64) -> Link {
        Link::new(
            self.rate_bps,
            self.one_way_delay,
            self.queue_limit_bytes,
            LossProcess::new(self.loss.clone(), seed),
        )
    }

    /// Reverse path at the uplink rate with its own erasure process.
    pub fn uplink(&self, loss: LossModel, seed: u64) -> Link {
        Link::new(
            self.uplink_rate_bps,
            self.one_way_delay,
            None,
            LossProcess::new(loss, seed),
        )
    }
}

/// One application packet handed to a transport at a given instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offer {
    pub at: SimTime,
    pub id: u32,
    pub len: usize,
}

/// Packets offered at a constant bit rate, ids starting at `first_id`.
pub fn constant_rate(
    ids: impl IntoIterator<Item = u32>,
    len: usize,
    rate_bps: f64,
    start: SimTime,
) -> Vec<Offer> {
    let gap = len as f64 * 8.0 / rate_bps;
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| Offer {
            at: start + Duration::from_secs_f64(i as f64 * gap),
            id,
            len,
        })
        .collect()
}

/// Loss and cost counters common to every transport.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferStats {
    pub link_erasures: u64,
    pub link_queue_drops: u64,
    pub mac_queue_drops: u64,
    pub arq_discards: u64,
    pub arq_retransmissions: u64,
    pub sync_resets: u64,
    pub harq_attempts: u64,
    /// Packets offered but not delivered by the transport, whatever the reason.
    pub undelivered: u64,
    pub downlink_bytes: u64,
    pub uplink_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferOutcome {
    /// `(id, delivery time)` in delivery order.
    pub delivered: Vec<(u32, SimTime)>,
    pub stats: TransferStats,
}

impl TransferOutcome {
    pub fn last_delivery(&self) -> Option<SimTime> {
        self.delivered.iter().map(|&(_, t)| t).max()
    }
}
