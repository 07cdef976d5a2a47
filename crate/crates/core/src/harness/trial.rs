use std::time::Duration;

use super::{
    code_rate, derive_seed, redundancy_bandwidth, tlr, Drops, ExperimentConfig, HarnessError,
    MetricsReport, Reliability, TrialKind,
};
use crate::channel::{
    arq_transfer, constant_rate, harq_transfer, raw_transfer, Offer, TransferOutcome, TransferStats,
};
use crate::exec::{map_ordered, Execution};
use crate::framing::datagram;
use crate::pipeline::sim::{nc_transfer, NcOutcome};
use crate::time::SimTime;

/// `Nm` values of the reliability ladder, in increasing redundancy.
pub const NC_LADDER: [usize; 8] = [10, 15, 20, 24, 30, 40, 60, 120];

#[derive(Debug, Default)]
struct Run {
    transfer: TransferOutcome,
    drops: Drops,
    nc: Option<NcOutcome>,
}

fn transport(cfg: &ExperimentConfig, rel: Reliability, offers: &[Offer], seed: u64) -> Run {
    let ch = &cfg.channel;
    let mut run = Run::default();
    match rel {
        Reliability::Raw | Reliability::Harq => {
            run.transfer = if rel == Reliability::Raw {
                raw_transfer(offers, ch, seed)
            } else {
                harq_transfer(offers, &cfg.harq, ch, seed)
            };
            let s = &run.transfer.stats;
            run.drops.link_queue = s.link_queue_drops;
            run.drops.channel = s.undelivered - s.link_queue_drops;
        }
        Reliability::Arq | Reliability::HarqArq => {
            let harq = (rel == Reliability::HarqArq).then_some(&cfg.harq);
            run.transfer = arq_transfer(offers, &cfg.arq, harq, ch, seed);
            let s = &run.transfer.stats;
            run.drops.mac_queue = s.mac_queue_drops;
            run.drops.arq = s.undelivered - s.mac_queue_drops;
        }
        Reliability::Nc(nm) => {
            let params = cfg.codec.clone().with_redundancy(nm);
            let out = nc_transfer(offers, &params, &cfg.pipeline, None, ch, seed);
            run.drops.encoder_queue = out.encoder.packets_rejected + out.encoder.oversize_packets;
            run.drops.undecoded = out.transfer.stats.undelivered - run.drops.encoder_queue;
            run.transfer = out.transfer.clone();
            run.nc = Some(out);
        }
        Reliability::NcBest => unreachable!("nc-best is resolved before transport"),
    }
    run
}

/// Ladder entries nc-best may choose from at this configuration's loss rate.
pub(super) fn nc_best_candidates(cfg: &ExperimentConfig) -> Vec<usize> {
    let p = cfg.channel.loss.mean_loss();
    let limit = 1.0 - p - cfg.nc_best_margin;
    let nr = cfg.codec.preferred_segments;
    let nk = cfg.codec.redundancy_rounds;
    let ok: Vec<usize> = NC_LADDER
        .iter()
        .copied()
        .filter(|&nm| {
            let cr = code_rate(nr, nk, nm);
            (*cr.numer() as f64 / *cr.denom() as f64) <= limit + 1e-12
        })
        .collect();
    if ok.is_empty() {
        vec![*NC_LADDER.last().expect("ladder is non-empty")]
    } else {
        ok
    }
}

fn redundancy(cfg: &ExperimentConfig, rel: Reliability) -> f64 {
    match rel {
        Reliability::Nc(nm) => redundancy_bandwidth(
            cfg.codec.redundancy_rounds * nm,
            cfg.codec.preferred_segments,
            cfg.offered_load_bps,
        ),
        _ => 0.0,
    }
}

fn add_stats(a: &mut TransferStats, b: &TransferStats) {
    a.link_erasures += b.link_erasures;
    a.link_queue_drops += b.link_queue_drops;
    a.mac_queue_drops += b.mac_queue_drops;
    a.arq_discards += b.arq_discards;
    a.arq_retransmissions += b.arq_retransmissions;
    a.sync_resets += b.sync_resets;
    a.harq_attempts += b.harq_attempts;
    a.undelivered += b.undelivered;
    a.downlink_bytes += b.downlink_bytes;
    a.uplink_bytes += b.uplink_bytes;
}

fn add_drops(a: &mut Drops, b: &Drops) {
    a.channel += b.channel;
    a.link_queue += b.link_queue;
    a.mac_queue += b.mac_queue;
    a.arq += b.arq;
    a.encoder_queue += b.encoder_queue;
    a.undecoded += b.undecoded;
}

struct Totals {
    sent: u64,
    delivered: u64,
    app_bytes_sent: u64,
    stats: TransferStats,
    drops: Drops,
    nc_blocks: u64,
    nc_decoded: u64,
    nc_acks: u64,
}

impl Totals {
    fn new() -> Self {
        Totals {
            sent: 0,
            delivered: 0,
            app_bytes_sent: 0,
            stats: TransferStats::default(),
            drops: Drops::default(),
            nc_blocks: 0,
            nc_decoded: 0,
            nc_acks: 0,
        }
    }

    fn add(&mut self, offers: &[Offer], run: &Run) {
        self.sent += offers.len() as u64;
        self.app_bytes_sent += offers.iter().map(|o| o.len as u64).sum::<u64>();
        self.delivered += run.transfer.delivered.len() as u64;
        add_stats(&mut self.stats, &run.transfer.stats);
        add_drops(&mut self.drops, &run.drops);
        if let Some(nc) = &run.nc {
            self.nc_blocks += nc.encoder.blocks;
            self.nc_decoded += nc.decoder.blocks_decoded;
            self.nc_acks += nc.acks_sent;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        self,
        cfg: &ExperimentConfig,
        resolved: Reliability,
        throughput_bps: f64,
        loss_bps: f64,
        elapsed: f64,
        delay: Option<f64>,
        rounds: Option<u32>,
    ) -> MetricsReport {
        let redundancy_bps = redundancy(cfg, resolved);
        let lost = self.sent - self.delivered;
        MetricsReport {
            name: cfg.name.clone(),
            kind: cfg.kind,
            reliability: cfg.reliability,
            resolved,
            loss_prob: cfg.channel.loss.mean_loss(),
            seed: cfg.seed,
            offered_bps: cfg.offered_load_bps,
            sent: self.sent,
            delivered: self.delivered,
            throughput_bps,
            loss_bps,
            loss_pct: if self.sent == 0 {
                0.0
            } else {
                lost as f64 / self.sent as f64 * 100.0
            },
            redundancy_bps,
            redundancy_exact_bps: self
                .stats
                .downlink_bytes
                .saturating_sub(self.app_bytes_sent) as f64
                * 8.0
                / elapsed,
            tlr: tlr(throughput_bps, loss_bps, redundancy_bps),
            transfer_delay_s: delay,
            rounds,
            drops: self.drops,
            downlink_bytes: self.stats.downlink_bytes,
            uplink_bytes: self.stats.uplink_bytes,
            arq_retransmissions: self.stats.arq_retransmissions,
            harq_attempts: self.stats.harq_attempts,
            nc_blocks: self.nc_blocks,
            nc_blocks_decoded: self.nc_decoded,
            nc_acks: self.nc_acks,
        }
    }
}

fn stream_once(cfg: &ExperimentConfig, rel: Reliability) -> MetricsReport {
    let bits = cfg.packet_size as f64 * 8.0;
    let n = (cfg.duration_s * cfg.offered_load_bps / bits).floor() as u32;
    let offers = constant_rate(0..n, cfg.packet_size, cfg.offered_load_bps, Duration::ZERO);
    let run = transport(cfg, rel, &offers, cfg.seed);
    let mut t = Totals::new();
    t.add(&offers, &run);
    let throughput = t.delivered as f64 * bits / cfg.duration_s;
    let offered = n as f64 * bits / cfg.duration_s;
    let loss = (offered - throughput).max(0.0);
    t.report(cfg, rel, throughput, loss, cfg.duration_s, None, None)
}

fn file_once(cfg: &ExperimentConfig, rel: Reliability) -> Result<MetricsReport, HarnessError> {
    let size = cfg.packet_size;
    let n = cfg.file_size_bytes.div_ceil(size);
    let last = (cfg.file_size_bytes - (n - 1) * size).max(datagram::MIN_LEN);
    let len_of = |id: u32| if id as usize == n - 1 { last } else { size };
    let gap = |len: usize| Duration::from_secs_f64(len as f64 * 8.0 / cfg.offered_load_bps);
    let owd = cfg.channel.one_way_delay;

    let mut have = vec![false; n];
    let mut missing: Vec<u32> = (0..n as u32).collect();
    let mut t = Totals::new();
    let mut start = SimTime::ZERO;
    let mut done_at = SimTime::ZERO;
    for round in 1..=cfg.max_rounds {
        let mut offers = Vec::with_capacity(missing.len());
        let mut at = start;
        for &id in &missing {
            offers.push(Offer {
                at,
                id,
                len: len_of(id),
            });
            at += gap(len_of(id));
        }
        let seed = if round == 1 {
            cfg.seed
        } else {
            derive_seed(cfg.seed, u64::from(round))
        };
        let mut run = transport(cfg, rel, &offers, seed);
        // A retransmitted copy may arrive after an earlier one already did.
        run.transfer
            .delivered
            .retain(|&(id, _)| !std::mem::replace(&mut have[id as usize], true));
        for &(_, when) in &run.transfer.delivered {
            done_at = done_at.max(when);
        }
        t.add(&offers, &run);
        missing.retain(|&id| !have[id as usize]);
        if missing.is_empty() {
            let delay = done_at.as_secs_f64();
            let file_bits = cfg.file_size_bytes as f64 * 8.0;
            let resent_bits = (t.app_bytes_sent as f64 * 8.0 - file_bits).max(0.0);
            let report = t.report(
                cfg,
                rel,
                file_bits / delay,
                resent_bits / delay,
                delay,
                Some(delay),
                Some(round),
            );
            return Ok(report);
        }
        // The receiver NACKs once the sender's end-of-round marker has
        // arrived and the decoders have gone quiet.
        let last_delivery = run.transfer.last_delivery().unwrap_or(SimTime::ZERO);
        let nack_at = last_delivery.max(at + owd);
        start = nack_at + owd;
    }
    Err(HarnessError::RoundCap {
        rounds: cfg.max_rounds,
        missing: missing.len(),
    })
}

/// Runs a constant-rate stream for the configured duration.
pub fn run_stream_trial(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    if cfg.reliability != Reliability::NcBest {
        return Ok(stream_once(cfg, cfg.reliability));
    }
    let reports = map_ordered(nc_best_candidates(cfg), Execution::default(), |nm| {
        stream_once(cfg, Reliability::Nc(nm))
    });
    // Most deliveries wins; the candidates are in ladder order, so ties keep the lower Nm.
    let best = reports
        .into_iter()
        .reduce(|a, b| if b.delivered > a.delivered { b } else { a })
        .expect("at least one candidate");
    Ok(best)
}

/// Sends a file in rounds, resending whatever the receiver NACKs.
pub fn run_file_trial(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    cfg.validate()?;
    if cfg.reliability != Reliability::NcBest {
        return file_once(cfg, cfg.reliability);
    }
    let reports = map_ordered(nc_best_candidates(cfg), Execution::default(), |nm| {
        file_once(cfg, Reliability::Nc(nm))
    });
    let mut best: Option<MetricsReport> = None;
    let mut first_err = None;
    for r in reports {
        match r {
            Ok(r) => {
                let better = best.as_ref().is_none_or(|b| {
                    r.transfer_delay_s.unwrap_or(f64::INFINITY)
                        < b.transfer_delay_s.unwrap_or(f64::INFINITY)
                });
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("no report and no error"))
}

pub fn run_trial(cfg: &ExperimentConfig) -> Result<MetricsReport, HarnessError> {
    match cfg.kind {
        TrialKind::Stream => run_stream_trial(cfg),
        TrialKind::File => run_file_trial(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;

    fn stream(rel: Reliability, p: f64, secs: f64) -> ExperimentConfig {
        ExperimentConfig {
            reliability: rel,
            duration_s: secs,
            channel: ChannelModel::bernoulli(p),
            seed: 7,
            ..ExperimentConfig::default()
        }
    }

    fn assert_accounting(r: &MetricsReport) {
        assert_eq!(r.sent, r.delivered + r.drops.total(), "{r:?}");
    }

    #[test]
    fn raw_lossless_is_saturated() {
        let r = run_stream_trial(&stream(Reliability::Raw, 0.0, 2.0)).unwrap();
        assert_eq!(r.delivered, r.sent);
        assert!(
            (r.throughput_bps / 6e6 - 1.0).abs() < 1e-3,
            "{}",
            r.throughput_bps
        );
        assert_eq!(r.loss_pct, 0.0);
        assert_eq!(r.tlr, super::super::Tlr::Saturated);
    }

    #[test]
    fn raw_fifth_loss() {
        let r = run_stream_trial(&stream(Reliability::Raw, 0.2, 60.0)).unwrap();
        assert!(
            (r.throughput_bps / 4.8e6 - 1.0).abs() < 0.02,
            "{}",
            r.throughput_bps
        );
        assert_eq!(r.drops.channel, r.sent - r.delivered);
        assert_accounting(&r);
    }

    #[test]
    fn accounting_identity_all_modes() {
        for rel in [
            Reliability::Raw,
            Reliability::Harq,
            Reliability::HarqArq,
            Reliability::Arq,
            Reliability::Nc(20),
        ] {
            let r = run_stream_trial(&stream(rel, 0.2, 3.0)).unwrap();
            assert_accounting(&r);
        }
    }

    #[test]
    fn nc_best_candidates_respect_margin() {
        let cfg = stream(Reliability::NcBest, 0.11, 1.0);
        assert_eq!(nc_best_candidates(&cfg), [24, 30, 40, 60, 120]);
        let cfg = stream(Reliability::NcBest, 0.32, 1.0);
        assert_eq!(nc_best_candidates(&cfg), [120]);
        let cfg = stream(Reliability::NcBest, 0.6, 1.0);
        assert_eq!(nc_best_candidates(&cfg), [120]);
    }

    #[test]
    fn file_lossless_single_round() {
        let cfg = ExperimentConfig {
            kind: TrialKind::File,
            file_size_bytes: 1_400_000,
            ..stream(Reliability::Raw, 0.0, 1.0)
        };
        let r = run_file_trial(&cfg).unwrap();
        assert_eq!(r.rounds, Some(1));
        // Last packet leaves at (n-1) gaps, then serialization and propagation.
        let d = r.transfer_delay_s.unwrap();
        let expect = 999.0 * 1400.0 * 8.0 / 6e6 + 1400.0 * 8.0 / 25.2e6 + 0.010;
        assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
    }

    #[test]
    fn file_lossy_needs_more_rounds() {
        let cfg = ExperimentConfig {
            kind: TrialKind::File,
            file_size_bytes: 2_800_000,
            ..stream(Reliability::Raw, 0.2, 1.0)
        };
        let lossless = run_file_trial(&ExperimentConfig {
            channel: ChannelModel::bernoulli(0.0),
            ..cfg.clone()
        })
        .unwrap();
        let r = run_file_trial(&cfg).unwrap();
        assert!(r.rounds.unwrap() >= 2);
        assert!(r.transfer_delay_s > lossless.transfer_delay_s);
        assert_eq!(r.delivered, 2000);
        assert_accounting(&r);
    }

    #[test]
    fn total_loss_hits_round_cap() {
        let cfg = ExperimentConfig {
            kind: TrialKind::File,
            file_size_bytes: 14_000,
            max_rounds: 5,
            ..stream(Reliability::Raw, 1.0, 1.0)
        };
        assert!(matches!(
            run_file_trial(&cfg),
            Err(HarnessError::RoundCap {
                rounds: 5,
                missing: 10
            })
        ));
    }
}
