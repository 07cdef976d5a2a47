//! TOML experiment manifests.
//!
//! ```toml
//! seed = 42
//! repeat = 3
//!
//! [base]
//! duration_s = 60
//! channel.loss = { model = "bernoulli", p = 0.18 }
//!
//! [[trial]]
//! name = "raw"
//! reliability = "raw"
//!
//! [[sweep]]
//! name = "nm"
//! vary = "reliability"
//! values = ["nc-10", "nc-20", "nc-40"]
//! metrics = ["tlr", "throughput_bps"]
//! set = { "channel.loss.p" = 0.2 }
//! ```
//!
//! Every trial starts from `[base]`; trial tables, sweep `set` tables and
//! the swept value are merged over it key by key. Dotted keys name nested
//! fields.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;
use toml::{Table, Value};

use super::{ExperimentConfig, HarnessError, Reliability};
use crate::exec::Execution;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest is not valid TOML: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{context}: field `{path}`: {message}")]
    Field {
        context: String,
        path: String,
        message: String,
    },
    #[error("{context}: {source}")]
    Invalid {
        context: String,
        source: HarnessError,
    },
    #[error("sweep {name}: {reason}")]
    Sweep { name: String, reason: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default = "one")]
    seed: u64,
    #[serde(default = "one")]
    repeat: u64,
    #[serde(default)]
    execution: Execution,
    #[serde(default)]
    base: Table,
    #[serde(default)]
    trial: Vec<Table>,
    #[serde(default)]
    sweep: Vec<RawSweep>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    name: String,
    vary: String,
    values: Vec<Value>,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    metrics: Vec<String>,
    #[serde(default)]
    set: Table,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub seed: u64,
    pub repeat: u64,
    pub execution: Execution,
    base: Table,
    trials: Vec<Table>,
    sweeps: Vec<RawSweep>,
}

/// One planned run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub config: ExperimentConfig,
    pub repeat: u64,
    /// Index into [`Manifest::sweeps`] and the plotted x value.
    pub sweep: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub vary: String,
    pub metrics: Vec<String>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self, ManifestError> {
        let de = toml::Deserializer::parse(text)?;
        let raw: RawManifest =
            serde_path_to_error::deserialize(de).map_err(|e| ManifestError::Field {
                context: "manifest".into(),
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        for s in &raw.sweep {
            check_sweep(s)?;
        }
        Ok(Manifest {
            seed: raw.seed,
            repeat: raw.repeat.max(1),
            execution: raw.execution,
            base: raw.base,
            trials: raw.trial,
            sweeps: raw.sweep,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Replaces the manifest's trials and sweeps with one sweep of `vary`
    /// over `values`, keeping `[base]`. Values that parse as numbers are
    /// numbers; anything else is a string.
    pub fn single_sweep(
        mut self,
        name: &str,
        vary: &str,
        values: &[String],
        metrics: &[String],
    ) -> Result<Self, ManifestError> {
        let values: Vec<Value> = values
            .iter()
            .map(|v| {
                v.parse::<i64>()
                    .map(Value::Integer)
                    .or_else(|_| v.parse::<f64>().map(Value::Float))
                    .unwrap_or_else(|_| Value::String(v.clone()))
            })
            .collect();
        let sweep = RawSweep {
            name: name.into(),
            vary: vary.into(),
            values,
            x: None,
            metrics: metrics.to_vec(),
            set: Table::new(),
        };
        check_sweep(&sweep)?;
        self.trials.clear();
        self.sweeps = vec![sweep];
        Ok(self)
    }

    pub fn sweeps(&self) -> Vec<SweepSpec> {
        self.sweeps
            .iter()
            .map(|s| SweepSpec {
                name: s.name.clone(),
                vary: s.vary.clone(),
                metrics: s.metrics.clone(),
            })
            .collect()
    }
}

fn check_sweep(s: &RawSweep) -> Result<(), ManifestError> {
    if s.values.is_empty() {
        return Err(ManifestError::Sweep {
            name: s.name.clone(),
            reason: "no values".into(),
        });
    }
    if s.x.as_ref().is_some_and(|x| x.len() != s.values.len()) {
        return Err(ManifestError::Sweep {
            name: s.name.clone(),
            reason: "x and values differ in length".into(),
        });
    }
    for m in &s.metrics {
        if !super::report::METRICS.contains(&m.as_str()) {
            return Err(ManifestError::Sweep {
                name: s.name.clone(),
                reason: format!(
                    "unknown metric {m:?}; known: {}",
                    super::report::METRICS.join(", ")
                ),
            });
        }
    }
    Ok(())
}

/// Deterministic per-run seed: SplitMix64 over the base seed and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn set_path(t: &mut Table, path: &str, v: Value) {
    let mut parts = path.split('.').peekable();
    let mut cur = t;
    while let Some(k) = parts.next() {
        if parts.peek().is_none() {
            merge_value(cur, k, v);
            return;
        }
        let e = cur
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        if !e.is_table() {
            *e = Value::Table(Table::new());
        }
        cur = e.as_table_mut().expect("just made a table");
    }
}

fn merge_value(t: &mut Table, k: &str, v: Value) {
    match (t.get_mut(k), v) {
        (Some(Value::Table(dst)), Value::Table(src)) if !src.contains_key("model") => {
            merge(dst, src)
        }
        (_, v) => {
            t.insert(k.to_string(), v);
        }
    }
}

/// Overlays `over` onto `dst`. A table carrying a `model` tag replaces the
/// old one outright so variant fields never mix.
fn merge(dst: &mut Table, over: Table) {
    for (k, v) in over {
        set_path(dst, &k, v);
    }
}

fn build(table: Table, context: &str) -> Result<ExperimentConfig, ManifestError> {
    let cfg: ExperimentConfig =
        serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
            ManifestError::Field {
                context: context.to_string(),
                path: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
    cfg.validate().map_err(|source| ManifestError::Invalid {
        context: context.to_string(),
        source,
    })?;
    Ok(cfg)
}

fn x_of(v: &Value, i: usize) -> f64 {
    match v {
        Value::Integer(n) => *n as f64,
        Value::Float(f) => *f,
        Value::String(s) => match s.parse::<Reliability>() {
            Ok(Reliability::Nc(nm)) => nm as f64,
            _ => i as f64,
        },
        _ => i as f64,
    }
}

/// Expands the manifest into concrete trials, repeats innermost.
///
/// Repeat 0 of every trial uses the same seed (the trial's own `seed` if it
/// sets one, else the manifest seed), so trials in one manifest see paired
/// channel realizations. Later repeats derive fresh seeds from it.
pub fn expand(m: &Manifest) -> Result<Vec<TrialSpec>, ManifestError> {
    // (merged table, error context, sweep position)
    type Planned = (Table, String, Option<(usize, f64)>);
    let mut planned: Vec<Planned> = Vec::new();
    for (i, t) in m.trials.iter().enumerate() {
        let mut table = m.base.clone();
        merge(&mut table, t.clone());
        if !table.contains_key("name") {
            table.insert("name".into(), Value::String(format!("trial-{i}")));
        }
        planned.push((table, format!("trial {i}"), None));
    }
    for (si, s) in m.sweeps.iter().enumerate() {
        for (i, v) in s.values.iter().enumerate() {
            let mut table = m.base.clone();
            merge(&mut table, s.set.clone());
            set_path(&mut table, &s.vary, v.clone());
            let label = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            table.insert(
                "name".into(),
                Value::String(format!("{}/{}", s.name, label)),
            );
            let x = s.x.as_ref().map_or_else(|| x_of(v, i), |x| x[i]);
            planned.push((
                table,
                format!("sweep {} value {label}", s.name),
                Some((si, x)),
            ));
        }
    }
    let mut out = Vec::new();
    for (table, context, sweep) in planned {
        let explicit = table.contains_key("seed");
        let config = build(table, &context)?;
        let base_seed = if explicit { config.seed } else { m.seed };
        for r in 0..m.repeat {
            let seed = if r == 0 {
                base_seed
            } else {
                derive_seed(base_seed, r)
            };
            out.push(TrialSpec {
                config: ExperimentConfig {
                    seed,
                    ..config.clone()
                },
                repeat: r,
                sweep,
            });
        }
    }
    Ok(out)
}
