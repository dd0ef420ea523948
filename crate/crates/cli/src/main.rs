//! `raychan` command-line tool.
//!
//! Exit status is 0 when every grid point succeeded, 1 when some points
//! failed (they are listed in the failures table) and 2 for configuration
//! errors. `RAYCHAN_OUT` and `RAYCHAN_WORKERS` stand in for `--out` and
//! `--workers` when the flags are absent.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use raychan::geometry::Vec3;
use raychan::harness::seed::{derive_seed, STREAM_TRACE};
use raychan::harness::{emit_plotdata, run_experiment, run_sweep, ExperimentConfig, PlotKind, SweepKind};
use raychan::tracer::{paths_at, trace_geometry, write_paths_csv};
use raychan::{Error, Result};

#[derive(Parser)]
#[command(name = "raychan", version, about = "Ray-traced radio channels and MIMO metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment grid and write the dataset.
    Run(Common),
    /// Dump the paths of one link as CSV on stdout.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Transmitter position `x,y,z` in meters; site default when absent.
        #[arg(long, value_parser = parse_point)]
        tx: Option<[f64; 3]>,
        /// Receiver position `x,y,z` in meters.
        #[arg(long, value_parser = parse_point)]
        rx: [f64; 3],
        /// Only this carrier (Hz) instead of every configured one.
        #[arg(long)]
        freq: Option<f64>,
    },
    /// Antenna sweep with a fixed number of Tx elements per side.
    SweepCount(Common),
    /// Antenna sweep with a fixed Tx aperture.
    SweepAperture(Common),
    /// Emit a plot-ready table from a dataset directory.
    Plotdata {
        dataset: PathBuf,
        /// cdf, mean_vs_freq or sweep.
        #[arg(long)]
        kind: String,
        /// Restrict to one metric column.
        #[arg(long)]
        metric: Option<String>,
        /// Write `plot_<kind>.csv` into this directory instead of stdout.
        #[arg(long, env = "RAYCHAN_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Master seed, replacing the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, env = "RAYCHAN_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, env = "RAYCHAN_OUT")]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("`{s}`: {e}"))?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("`{s}` needs three comma-separated numbers"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let report = run_experiment(&cfg)?;
            eprintln!(
                "{} stats rows, {} mimo rows, {} failures -> {}",
                report.stats_rows,
                report.mimo_rows,
                report.failures.len(),
                report.output_dir.display()
            );
            Ok(status(report.is_complete()))
        }
        Command::SweepCount(common) => sweep(&common, SweepKind::FixedCount),
        Command::SweepAperture(common) => sweep(&common, SweepKind::FixedAperture),
        Command::Trace { common, tx, rx, freq } => {
            let cfg = common.load()?;
            trace(&cfg, tx, rx, freq)
        }
        Command::Plotdata {
            dataset,
            kind,
            metric,
            out,
        } => {
            let kind_enum: PlotKind = kind.parse()?;
            let table = emit_plotdata(&dataset, kind_enum, metric.as_deref())?;
            match out {
                Some(dir) => write_file(&dir, &format!("plot_{kind}.csv"), &table)?,
                None => std::io::stdout().write_all(table.as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn status(complete: bool) -> ExitCode {
    if complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn sweep(common: &Common, kind: SweepKind) -> Result<ExitCode> {
    let cfg = common.load()?;
    let report = run_sweep(&cfg, kind)?;
    eprintln!(
        "{} rows, {} failures -> {}",
        report.outcome.rows.len(),
        report.outcome.failures.len(),
        report.output_dir.join(kind.file_name()).display()
    );
    Ok(status(report.outcome.failures.is_empty()))
}

fn trace(cfg: &ExperimentConfig, tx: Option<[f64; 3]>, rx: [f64; 3], freq: Option<f64>) -> Result<ExitCode> {
    let scene = cfg.scene().map_err(|e| Error::Config(e.to_string()))?;
    let tx = tx.map_or_else(|| cfg.tx(), |p| Vec3::new(p[0], p[1], p[2]));
    let rx = Vec3::new(rx[0], rx[1], rx[2]);
    let freqs = match freq {
        Some(f) if !(1e9..=100e9).contains(&f) => {
            return Err(Error::Config(format!("frequency {f} Hz is outside 1–100 GHz")))
        }
        Some(f) => vec![f],
        None => cfg.frequencies_hz.clone(),
    };
    let trace_cfg = cfg.trace_config(derive_seed(cfg.seed, STREAM_TRACE, 0));
    let geometry = trace_geometry(&scene, &tx, &rx, &trace_cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = String::new();
    let mut failed = false;
    for f in freqs {
        let paths = match paths_at(&scene, &geometry, f, &trace_cfg) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("{f} Hz: {e}");
                failed = true;
                continue;
            }
        };
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &paths)?;
        let text = String::from_utf8_lossy(&buf);
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if out.is_empty() {
            out.push_str(&format!("f_c_hz,{header}\n"));
        }
        for line in lines {
            out.push_str(&format!("{f},{line}\n"));
        }
    }
    std::io::stdout().write_all(out.as_bytes())?;
    Ok(status(!failed))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}
