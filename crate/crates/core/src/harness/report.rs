use std::io::Write;

use serde::Serialize;

use super::{
    ExperimentConfig, HarnessError, MetricsReport, Reliability, SweepSpec, TrialKind, TrialSpec,
};

/// Metric names accepted in sweep `metrics` lists.
pub const METRICS: [&str; 9] = [
    "throughput_bps",
    "loss_bps",
    "loss_pct",
    "redundancy_bps",
    "redundancy_exact_bps",
    "tlr",
    "transfer_delay_s",
    "delivered",
    "rounds",
];

impl MetricsReport {
    /// Numeric value of a named metric; `None` when undefined for this trial.
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "throughput_bps" => Some(self.throughput_bps),
            "loss_bps" => Some(self.loss_bps),
            "loss_pct" => Some(self.loss_pct),
            "redundancy_bps" => Some(self.redundancy_bps),
            "redundancy_exact_bps" => Some(self.redundancy_exact_bps),
            "tlr" => self.tlr.value(),
            "transfer_delay_s" => self.transfer_delay_s,
            "delivered" => Some(self.delivered as f64),
            "rounds" => self.rounds.map(f64::from),
            _ => None,
        }
    }
}

/// One CSV line: the trial's configuration followed by its metrics.
#[derive(Debug, Clone, Serialize)]
pub struct CsvRow {
    pub name: String,
    pub kind: &'static str,
    pub reliability: String,
    pub resolved: String,
    /// Nm of the resolved NC configuration; empty for other modes.
    pub nm: Option<usize>,
    pub repeat: u64,
    pub seed: u64,
    pub loss_prob: f64,
    pub rate_bps: f64,
    pub offered_bps: f64,
    pub packet_size: usize,
    pub duration_s: Option<f64>,
    pub file_size_bytes: Option<usize>,
    pub workers: usize,
    pub nr: usize,
    pub nk: usize,
    pub sent: Option<u64>,
    pub delivered: Option<u64>,
    pub throughput_bps: Option<f64>,
    pub loss_bps: Option<f64>,
    pub loss_pct: Option<f64>,
    pub redundancy_bps: Option<f64>,
    pub redundancy_exact_bps: Option<f64>,
    pub tlr: Option<String>,
    pub transfer_delay_s: Option<f64>,
    pub rounds: Option<u32>,
    pub drop_channel: Option<u64>,
    pub drop_link_queue: Option<u64>,
    pub drop_mac_queue: Option<u64>,
    pub drop_arq: Option<u64>,
    pub drop_encoder_queue: Option<u64>,
    pub drop_undecoded: Option<u64>,
    pub downlink_bytes: Option<u64>,
    pub uplink_bytes: Option<u64>,
    pub arq_retransmissions: Option<u64>,
    pub harq_attempts: Option<u64>,
    pub nc_blocks: Option<u64>,
    pub nc_blocks_decoded: Option<u64>,
    pub nc_acks: Option<u64>,
    pub error: Option<String>,
}

impl CsvRow {
    pub fn new(
        cfg: &ExperimentConfig,
        repeat: u64,
        result: &Result<MetricsReport, HarnessError>,
    ) -> Self {
        let stream = cfg.kind == TrialKind::Stream;
        let mut row = CsvRow {
            name: cfg.name.clone(),
            kind: if stream { "stream" } else { "file" },
            reliability: cfg.reliability.to_string(),
            resolved: cfg.reliability.to_string(),
            nm: None,
            repeat,
            seed: cfg.seed,
            loss_prob: cfg.channel.loss.mean_loss(),
            rate_bps: cfg.channel.rate_bps,
            offered_bps: cfg.offered_load_bps,
            packet_size: cfg.packet_size,
            duration_s: stream.then_some(cfg.duration_s),
            file_size_bytes: (!stream).then_some(cfg.file_size_bytes),
            workers: cfg.pipeline.workers,
            nr: cfg.codec.preferred_segments,
            nk: cfg.codec.redundancy_rounds,
            sent: None,
            delivered: None,
            throughput_bps: None,
            loss_bps: None,
            loss_pct: None,
            redundancy_bps: None,
            redundancy_exact_bps: None,
            tlr: None,
            transfer_delay_s: None,
            rounds: None,
            drop_channel: None,
            drop_link_queue: None,
            drop_mac_queue: None,
            drop_arq: None,
            drop_encoder_queue: None,
            drop_undecoded: None,
            downlink_bytes: None,
            uplink_bytes: None,
            arq_retransmissions: None,
            harq_attempts: None,
            nc_blocks: None,
            nc_blocks_decoded: None,
            nc_acks: None,
            error: None,
        };
        if let Reliability::Nc(nm) = cfg.reliability {
            row.nm = Some(nm);
        }
        match result {
            Ok(r) => {
                row.resolved = r.resolved.to_string();
                if let Reliability::Nc(nm) = r.resolved {
                    row.nm = Some(nm);
                }
                row.sent = Some(r.sent);
                row.delivered = Some(r.delivered);
                row.throughput_bps = Some(r.throughput_bps);
                row.loss_bps = Some(r.loss_bps);
                row.loss_pct = Some(r.loss_pct);
                row.redundancy_bps = Some(r.redundancy_bps);
                row.redundancy_exact_bps = Some(r.redundancy_exact_bps);
                row.tlr = Some(r.tlr.to_string());
                row.transfer_delay_s = r.transfer_delay_s;
                row.rounds = r.rounds;
                row.drop_channel = Some(r.drops.channel);
                row.drop_link_queue = Some(r.drops.link_queue);
                row.drop_mac_queue = Some(r.drops.mac_queue);
                row.drop_arq = Some(r.drops.arq);
                row.drop_encoder_queue = Some(r.drops.encoder_queue);
                row.drop_undecoded = Some(r.drops.undecoded);
                row.downlink_bytes = Some(r.downlink_bytes);
                row.uplink_bytes = Some(r.uplink_bytes);
                row.arq_retransmissions = Some(r.arq_retransmissions);
                row.harq_attempts = Some(r.harq_attempts);
                row.nc_blocks = Some(r.nc_blocks);
                row.nc_blocks_decoded = Some(r.nc_blocks_decoded);
                row.nc_acks = Some(r.nc_acks);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[CsvRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean of each metric per x value of one sweep, repeats averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub sweep: SweepSpec,
    /// `(x, one value per metric)`; `NaN` where no repeat defined the metric.
    pub points: Vec<(f64, Vec<f64>)>,
}

impl PlotSeries {
    pub fn collect(
        index: usize,
        sweep: &SweepSpec,
        trials: &[TrialSpec],
        results: &[Result<MetricsReport, HarnessError>],
    ) -> Self {
        let mut points: Vec<(f64, Vec<(f64, u32)>)> = Vec::new();
        for (t, r) in trials.iter().zip(results) {
            let Some((si, x)) = t.sweep else { continue };
            if si != index {
                continue;
            }
            let slot = match points.iter().position(|p| p.0 == x) {
                Some(i) => i,
                None => {
                    points.push((x, vec![(0.0, 0); sweep.metrics.len()]));
                    points.len() - 1
                }
            };
            if let Ok(r) = r {
                for (m, acc) in sweep.metrics.iter().zip(points[slot].1.iter_mut()) {
                    if let Some(v) = r.metric(m) {
                        acc.0 += v;
                        acc.1 += 1;
                    }
                }
            }
        }
        PlotSeries {
            sweep: sweep.clone(),
            points: points
                .into_iter()
                .map(|(x, acc)| {
                    (
                        x,
                        acc.into_iter()
                            .map(|(s, n)| if n == 0 { f64::NAN } else { s / f64::from(n) })
                            .collect(),
                    )
                })
                .collect(),
        }
    }
}

/// Whitespace-separated columns with a `#` header, as gnuplot reads them.
pub fn write_plot<W: Write>(mut out: W, series: &PlotSeries) -> std::io::Result<()> {
    writeln!(
        out,
        "# sweep {} over {}",
        series.sweep.name, series.sweep.vary
    )?;
    writeln!(out, "# x {}", series.sweep.metrics.join(" "))?;
    for (x, ys) in &series.points {
        write!(out, "{x}")?;
        for y in ys {
            write!(out, " {y}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
