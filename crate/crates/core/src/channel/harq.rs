use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChannelModel, Offer, TransferOutcome, Transmit};

/// How retransmitted copies of a burst combine at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combining {
    /// Chase combining: attempt `k` fails with probability `p^(k+1)`.
    #[default]
    Chase,
    /// No combining gain: every attempt fails with probability `p`.
    Independent,
}

impl Combining {
    pub fn failure_prob(self, p: f64, attempt: u32) -> f64 {
        match self {
            Combining::Chase => p.powi(attempt as i32 + 1),
            Combining::Independent => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarqConfig {
    pub max_retx: u32,
    pub ul_ack_delay_frames: u32,
    pub dl_ack_delay_frames: u32,
    #[serde(rename = "frame_ms", with = "crate::time::ms")]
    pub frame: Duration,
    pub combining: Combining,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig {
            max_retx: 4,
            ul_ack_delay_frames: 3,
            dl_ack_delay_frames: 1,
            frame: Duration::from_millis(5),
            combining: Combining::Chase,
        }
    }
}

impl HarqConfig {
    /// Extra latency per downlink retransmission: wait for the ACK/NACK,
    /// then go out in the next frame.
    pub fn retry_gap(&self) -> Duration {
        self.frame * (self.dl_ack_delay_frames + 1)
    }

    /// Probability that every attempt of one burst fails at erasure rate `p`.
    pub fn residual_loss(&self, p: f64) -> f64 {
        (0..=self.max_retx)
            .map(|k| self.combining.failure_prob(p, k))
            .product()
    }
}

fn run(
    offers: &[Offer],
    model: &ChannelModel,
    seed: u64,
    harq: Option<&HarqConfig>,
) -> TransferOutcome {
    let mut link = model.downlink(seed);
    let mut out = TransferOutcome::default();
    for o in offers {
        let t = match harq {
            Some(cfg) => link.transmit_harq(o.at, o.len, cfg),
            None => link.transmit(o.at, o.len),
        };
        if let Transmit::Sent {
            arrival: Some(a), ..
        } = t
        {
            out.delivered.push((o.id, a));
        }
    }
    // HARQ retries can reorder arrivals.
    out.delivered.sort_by_key(|&(id, t)| (t, id));
    let s = link.stats();
    out.stats.link_erasures = s.erased;
    out.stats.link_queue_drops = s.queue_drops;
    out.stats.harq_attempts = if harq.is_some() { s.attempts } else { 0 };
    out.stats.downlink_bytes = s.bytes;
    out.stats.undelivered = (offers.len() - out.delivered.len()) as u64;
    out
}

/// Packets straight onto the erasure link.
pub fn raw_transfer(offers: &[Offer], model: &ChannelModel, seed: u64) -> TransferOutcome {
    run(offers, model, seed, None)
}

/// Every packet is one HARQ burst.
pub fn harq_transfer(
    offers: &[Offer],
    cfg: &HarqConfig,
    model: &ChannelModel,
    seed: u64,
) -> TransferOutcome {
    run(offers, model, seed, Some(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::constant_rate;

    #[test]
    fn lossless_first_attempt() {
        let offers = constant_rate(0..1000, 1400, 6e6, Duration::ZERO);
        let out = harq_transfer(
            &offers,
            &HarqConfig::default(),
            &ChannelModel::bernoulli(0.0),
            1,
        );
        assert_eq!(out.delivered.len(), 1000);
        assert_eq!(out.stats.harq_attempts, 1000);
    }

    #[test]
    fn no_retx_matches_raw() {
        let offers = constant_rate(0..20_000, 1400, 6e6, Duration::ZERO);
        let m = ChannelModel::bernoulli(0.3);
        let cfg = HarqConfig {
            max_retx: 0,
            ..HarqConfig::default()
        };
        let h = harq_transfer(&offers, &cfg, &m, 5).delivered.len() as f64 / 20_000.0;
        let r = raw_transfer(&offers, &m, 6).delivered.len() as f64 / 20_000.0;
        assert!((h - r).abs() < 0.015, "{h} vs {r}");
        assert!((r - 0.7).abs() < 0.015);
    }

    #[test]
    fn chase_residual() {
        let cfg = HarqConfig::default();
        let analytic = 0.3f64.powi(15);
        assert!((cfg.residual_loss(0.3) - analytic).abs() < 1e-20);
        assert!(analytic < 1.5e-8 && analytic > 1.4e-8);
        let offers = constant_rate(0..100_000, 100, 6e6, Duration::ZERO);
        let out = harq_transfer(&offers, &cfg, &ChannelModel::bernoulli(0.3), 8);
        assert_eq!(out.delivered.len(), 100_000);
        // Retries arrive later by whole HARQ round trips.
        let gap = cfg.retry_gap();
        assert_eq!(gap, Duration::from_millis(10));
    }
}
