use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nclink::exec::Execution;
use nclink::harness::{self, Manifest, MetricsReport, PlotSeries, TrialSpec};

mod selftest;

#[derive(Parser)]
#[command(name = "nclink", version, about = "Network-coded lossy-link trials")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every trial and sweep in a manifest.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Sweep one parameter over the manifest's [base] configuration.
    Sweep {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values, e.g. `10,20,40` for nm.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Metrics written to the plot file.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "throughput_bps,loss_pct,tlr,transfer_delay_s"
        )]
        metrics: Vec<String>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Field exhaustives, codec round trips and golden wire fixtures.
    Selftest {
        /// Verify fixture files in this directory instead of the built-in copies.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunOpts {
    /// Output directory for the CSV and plot files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the manifest's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the manifest's repeat count.
    #[arg(long)]
    repeat: Option<u64>,
    /// Run trials one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    /// Redundant packets per round; values are Nm.
    Nm,
    /// Bernoulli loss probability.
    P,
    /// Offered load in bit/s.
    OfferedLoad,
    /// Encoder/decoder worker count.
    Np,
}

impl Param {
    fn path(self) -> &'static str {
        match self {
            Param::Nm => "reliability",
            Param::P => "channel.loss.p",
            Param::OfferedLoad => "offered_load_bps",
            Param::Np => "pipeline.workers",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Param::Nm => "nm",
            Param::P => "p",
            Param::OfferedLoad => "offered_load",
            Param::Np => "np",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { manifest, opts } => Manifest::load(&manifest)
            .map_err(Into::into)
            .and_then(|m| execute(m, &manifest, &opts, "")),
        Cmd::Sweep {
            manifest,
            param,
            values,
            metrics,
            opts,
        } => {
            let values: Vec<String> = match param {
                Param::Nm => values.iter().map(|v| format!("nc-{v}")).collect(),
                _ => values,
            };
            Manifest::load(&manifest)
                .and_then(|m| m.single_sweep(param.name(), param.path(), &values, &metrics))
                .map_err(Into::into)
                .and_then(|m| execute(m, &manifest, &opts, &format!("-{}", param.name())))
        }
        Cmd::Selftest { fixtures } => Ok(selftest::run(fixtures.as_deref())),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Runs the manifest and writes `<stem><suffix>.csv` plus one `.dat` per
/// sweep. Returns false if any trial failed.
fn execute(mut m: Manifest, path: &Path, opts: &RunOpts, suffix: &str) -> Result<bool> {
    if let Some(s) = opts.seed {
        m.seed = s;
    }
    if let Some(r) = opts.repeat {
        m.repeat = r.max(1);
    }
    let exec = if opts.sequential {
        Execution::Sequential
    } else {
        m.execution
    };
    let trials = harness::expand(&m)?;
    let results = harness::run_specs(&trials, exec);

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("manifest");
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let csv_path = opts.out.join(format!("{stem}{suffix}.csv"));
    let file =
        fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    harness::write_csv(file, &harness::csv_rows(&trials, &results))?;
    let mut written = vec![csv_path];
    for (i, s) in m.sweeps().iter().enumerate() {
        let dat = opts.out.join(format!("{stem}-{}.dat", file_safe(&s.name)));
        let series = PlotSeries::collect(i, s, &trials, &results);
        harness::write_plot(fs::File::create(&dat)?, &series)?;
        written.push(dat);
    }

    print_summary(&trials, &results);
    for p in &written {
        println!("wrote {}", p.display());
    }
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} trials failed; see the error column",
            results.len()
        );
    }
    Ok(failed == 0)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn print_summary(trials: &[TrialSpec], results: &[Result<MetricsReport, harness::HarnessError>]) {
    println!(
        "{:<28} {:>3} {:<9} {:>9} {:>10} {:>10} {:>9}",
        "trial", "rep", "mode", "loss %", "T Mbps", "TLR", "delay s"
    );
    for (t, r) in trials.iter().zip(results) {
        match r {
            Ok(r) => println!(
                "{:<28} {:>3} {:<9} {:>9.3} {:>10.3} {:>10} {:>9}",
                t.config.name,
                t.repeat,
                r.resolved.to_string(),
                r.loss_pct,
                r.throughput_bps / 1e6,
                match r.tlr.value() {
                    Some(v) => format!("{v:.3}"),
                    None => r.tlr.to_string(),
                },
                r.transfer_delay_s.map_or("-".into(), |d| format!("{d:.3}")),
            ),
            Err(e) => println!("{:<28} {:>3} error: {e}", t.config.name, t.repeat),
        }
    }
}
