//! Stream and file-transfer trials over the simulated link, and the metrics
//! used to compare reliability schemes.

mod manifest;
mod report;
mod trial;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::channel::{ArqConfig, ChannelError, ChannelModel, HarqConfig};
use crate::codec::{CodecError, CodecParams};
use crate::pipeline::sim::PipelineConfig;

pub use manifest::{derive_seed, expand, Manifest, ManifestError, SweepSpec, TrialSpec};
pub use report::{write_csv, write_plot, CsvRow, PlotSeries};
pub use trial::{run_file_trial, run_stream_trial, run_trial, NC_LADDER};

/// Reliability configuration under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reliability {
    Raw,
    Harq,
    HarqArq,
    Arq,
    /// Network coding with `Nm` coded packets per round.
    Nc(usize),
    /// The best ladder entry whose code rate leaves the configured margin below `1 - p`.
    NcBest,
}

impl fmt::Display for Reliability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reliability::Raw => f.write_str("raw"),
            Reliability::Harq => f.write_str("harq"),
            Reliability::HarqArq => f.write_str("harq-arq"),
            Reliability::Arq => f.write_str("arq"),
            Reliability::Nc(nm) => write!(f, "nc-{nm}"),
            Reliability::NcBest => f.write_str("nc-best"),
        }
    }
}

impl FromStr for Reliability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "raw" => Reliability::Raw,
            "harq" => Reliability::Harq,
            "harq-arq" => Reliability::HarqArq,
            "arq" => Reliability::Arq,
            "nc-best" => Reliability::NcBest,
            _ => {
                let nm = s
                    .strip_prefix("nc-")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| format!("unknown reliability {s:?}; expected raw, harq, harq-arq, arq, nc-<Nm> or nc-best"))?;
                Reliability::Nc(nm)
            }
        })
    }
}

impl Serialize for Reliability {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Reliability {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialKind {
    /// Constant-rate datagrams for a fixed duration.
    #[default]
    Stream,
    /// A file sent in NACK-driven rounds until complete.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub reliability: Reliability,
    pub kind: TrialKind,
    pub offered_load_bps: f64,
    pub packet_size: usize,
    pub duration_s: f64,
    pub file_size_bytes: usize,
    /// File trials give up after this many rounds.
    pub max_rounds: u32,
    /// nc-best keeps ladder entries with `CR <= 1 - p - margin`.
    pub nc_best_margin: f64,
    pub seed: u64,
    pub channel: ChannelModel,
    pub codec: CodecParams,
    pub pipeline: PipelineConfig,
    pub harq: HarqConfig,
    pub arq: ArqConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: String::new(),
            reliability: Reliability::Raw,
            kind: TrialKind::Stream,
            offered_load_bps: 6e6,
            packet_size: 1400,
            duration_s: 60.0,
            file_size_bytes: 50_000_000,
            max_rounds: 1000,
            nc_best_margin: 0.05,
            seed: 1,
            channel: ChannelModel::default(),
            codec: CodecParams::default(),
            pipeline: PipelineConfig::default(),
            harq: HarqConfig::default(),
            arq: ArqConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment parameter {field}: {reason}")]
    Config { field: &'static str, reason: String },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("file transfer incomplete after {rounds} rounds ({missing} packets missing)")]
    RoundCap { rounds: u32, missing: usize },
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field, reason: String| Err(HarnessError::Config { field, reason });
        if !(self.offered_load_bps.is_finite() && self.offered_load_bps > 0.0) {
            return bad(
                "offered_load_bps",
                format!("{} must be positive", self.offered_load_bps),
            );
        }
        if self.packet_size < crate::framing::datagram::MIN_LEN || self.packet_size > 65_535 {
            return bad(
                "packet_size",
                format!(
                    "{} outside {}..=65535",
                    self.packet_size,
                    crate::framing::datagram::MIN_LEN
                ),
            );
        }
        match self.kind {
            TrialKind::Stream if !(self.duration_s.is_finite() && self.duration_s > 0.0) => {
                return bad(
                    "duration_s",
                    format!("{} must be positive", self.duration_s),
                );
            }
            TrialKind::File if self.file_size_bytes == 0 => {
                return bad("file_size_bytes", "must be positive".into());
            }
            TrialKind::File if self.max_rounds == 0 => {
                return bad("max_rounds", "must be at least 1".into())
            }
            _ => {}
        }
        if let Reliability::Nc(nm) = self.reliability {
            self.codec.clone().with_redundancy(nm).validate()?;
        } else {
            self.codec.validate()?;
        }
        if !(0.0..1.0).contains(&self.nc_best_margin) {
            return bad(
                "nc_best_margin",
                format!("{} outside [0, 1)", self.nc_best_margin),
            );
        }
        if self.pipeline.workers == 0 || self.pipeline.workers > 256 {
            return bad(
                "pipeline.workers",
                format!("{} outside 1..=256", self.pipeline.workers),
            );
        }
        self.channel.validate()?;
        self.arq.validate()?;
        Ok(())
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration_s)
    }
}

/// Upper bound on the effective code rate, `Ns / (Ns + Nk·Nm)`.
pub fn code_rate(ns: usize, nk: usize, nm: usize) -> Ratio<usize> {
    assert!(ns >= 1, "Ns must be at least 1");
    Ratio::new(ns, ns + nk * nm)
}

/// Approximate redundancy bandwidth `(Nm / Nr) · o`.
pub fn redundancy_bandwidth(nm: usize, nr: usize, offered_bps: f64) -> f64 {
    assert!(nr >= 1, "Nr must be at least 1");
    nm as f64 / nr as f64 * offered_bps
}

/// Throughput-to-loss ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tlr {
    Value(f64),
    /// Neither loss nor redundancy: the ratio is unbounded.
    Saturated,
}

impl Tlr {
    pub fn value(self) -> Option<f64> {
        match self {
            Tlr::Value(v) => Some(v),
            Tlr::Saturated => None,
        }
    }
}

impl fmt::Display for Tlr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tlr::Value(v) => write!(f, "{v}"),
            Tlr::Saturated => f.write_str("saturated"),
        }
    }
}

pub fn tlr(throughput: f64, loss: f64, redundancy: f64) -> Tlr {
    let denom = loss + redundancy;
    if denom > 0.0 {
        Tlr::Value(throughput / denom)
    } else {
        Tlr::Saturated
    }
}

/// Why offered packets did not arrive. The fields sum to `sent - delivered`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Drops {
    /// Erased on the air with no recovery.
    pub channel: u64,
    /// Tail-dropped at the downlink queue.
    pub link_queue: u64,
    /// Tail-dropped at the ARQ sender queue.
    pub mac_queue: u64,
    /// Lost to an ARQ block discard or receiver purge.
    pub arq: u64,
    /// Rejected by a full encoder worker queue.
    pub encoder_queue: u64,
    /// In an NC block that neither decoded nor yielded the packet by extraction.
    pub undecoded: u64,
}

impl Drops {
    pub fn total(&self) -> u64 {
        self.channel
            + self.link_queue
            + self.mac_queue
            + self.arq
            + self.encoder_queue
            + self.undecoded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub name: String,
    pub kind: TrialKind,
    pub reliability: Reliability,
    /// What actually ran; differs from `reliability` only for nc-best.
    pub resolved: Reliability,
    pub loss_prob: f64,
    pub seed: u64,
    pub offered_bps: f64,
    /// Application packets handed to the transport (all rounds for file trials).
    pub sent: u64,
    pub delivered: u64,
    pub throughput_bps: f64,
    pub loss_bps: f64,
    pub loss_pct: f64,
    pub redundancy_bps: f64,
    /// Wire bytes beyond application bytes, per second.
    pub redundancy_exact_bps: f64,
    pub tlr: Tlr,
    pub transfer_delay_s: Option<f64>,
    pub rounds: Option<u32>,
    pub drops: Drops,
    pub downlink_bytes: u64,
    pub uplink_bytes: u64,
    pub arq_retransmissions: u64,
    pub harq_attempts: u64,
    pub nc_blocks: u64,
    pub nc_blocks_decoded: u64,
    pub nc_acks: u64,
}

/// Runs every planned trial, results in plan order.
pub fn run_specs(
    trials: &[TrialSpec],
    exec: crate::exec::Execution,
) -> Vec<Result<MetricsReport, HarnessError>> {
    crate::exec::map_ordered(trials.iter().collect(), exec, |t| run_trial(&t.config))
}

/// CSV rows for a finished plan.
pub fn csv_rows(
    trials: &[TrialSpec],
    results: &[Result<MetricsReport, HarnessError>],
) -> Vec<CsvRow> {
    trials
        .iter()
        .zip(results)
        .map(|(t, r)| CsvRow::new(&t.config, t.repeat, r))
        .collect()
}
