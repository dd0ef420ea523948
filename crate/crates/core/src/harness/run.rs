//! Dataset generation over the grid Rx × carrier × bandwidth × array pair.
//!
//! Output files (all CSV with a header row, sorted by grid coordinates):
//!
//! | file | one row per |
//! |------|-------------|
//! | `rx.csv` | Rx location |
//! | `stats.csv` | (rx, f_c, bw) |
//! | `mimo.csv` | (rx, f_c, bw, array pair) |
//! | `cdf_<stat>.csv` | (f_c, bw, distinct value) |
//! | `summary_stats.csv` | (f_c, bw) |
//! | `summary_mimo.csv` | (f_c, bw, array pair) |
//! | `failures.csv` | failed grid point |
//!
//! plus `config.toml` (the resolved configuration) and `manifest.toml`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ArrayPair, ExperimentConfig, RxMode};
use super::parallel::par_map;
use super::placement::place_rx;
use super::seed::{derive_seed, STREAM_TRACE};
use crate::channel::{cfr, synthesize, ArrayConfig};
use crate::geometry::Vec3;
use crate::metrics::{channel_stats, empirical_cdf, ChannelStats};
use crate::mimo::scaling::{
    facing_boresights, sweep_fixed_aperture, sweep_fixed_count, write_sweep_csv, SweepOutcome, SweepSpec,
};
use crate::mimo::{evaluate, hardening_across_subcarriers};
use crate::scene::Scene;
use crate::tracer::{paths_at, trace_geometry, Path as RayPath};
use crate::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Everything needed to reproduce and verify a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the resolved configuration with output directory and
    /// worker count cleared.
    pub config_sha256: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx_height_m: Option<f64>,
    pub files: Vec<FileEntry>,
}

/// A grid point that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub rx_index: usize,
    pub f_c: f64,
    /// `None` for failures that affect every bandwidth.
    pub bandwidth: Option<f64>,
    /// `None` for failures that affect every array pair.
    pub array: Option<String>,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub stats_rows: usize,
    pub mimo_rows: usize,
    pub failures: Vec<Failure>,
}

impl RunReport {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct StatsRow {
    rx_index: usize,
    f_c: f64,
    bandwidth: f64,
    stats: ChannelStats,
}

struct MimoRow {
    rx_index: usize,
    f_c: f64,
    bandwidth: f64,
    array: usize,
    rank: f64,
    cond_db: f64,
    se: f64,
    eta_db: f64,
}

#[derive(Default)]
struct RxOutput {
    stats: Vec<StatsRow>,
    mimo: Vec<MimoRow>,
    failures: Vec<Failure>,
}

/// Hex SHA-256 of the configuration, ignoring where output goes and how many
/// workers produce it.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut canonical = cfg.clone();
    canonical.output_dir = PathBuf::new();
    canonical.workers = 0;
    Ok(hex_sha256(canonical.to_toml()?.as_bytes()))
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

struct Setup {
    scene: Scene,
    tx: Vec3,
    rx: Vec<Vec3>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    cfg.validate()?;
    let scene = cfg.scene().map_err(|e| Error::Config(e.to_string()))?;
    let tx = cfg.tx();
    scene
        .validate_point(&tx)
        .map_err(|e| Error::Config(format!("transmitter: {e}")))?;
    let rx = place_rx(&scene, &cfg.rx, cfg.seed).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Setup { scene, tx, rx })
}

/// Runs the full grid and writes the dataset into `cfg.output_dir`.
///
/// Configuration problems return `Err` before anything is computed; failures
/// of individual grid points are collected in the report and written to
/// `failures.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let Setup { scene, tx, rx } = setup(cfg)?;
    let outputs: Vec<RxOutput> = par_map(cfg.workers, rx.len(), |i| run_rx(cfg, &scene, &tx, &rx[i], i));

    let mut stats = Vec::new();
    let mut mimo = Vec::new();
    let mut failures = Vec::new();
    for o in outputs {
        stats.extend(o.stats);
        mimo.extend(o.mimo);
        failures.extend(o.failures);
    }

    let site = cfg.site.name();
    let mut files: Vec<(String, String)> = Vec::new();
    files.push(("rx.csv".into(), rx_csv(&rx)));
    files.push(("stats.csv".into(), stats_csv(site, cfg.seed, &stats)));
    files.push(("mimo.csv".into(), mimo_csv(site, &cfg.arrays, &mimo)));
    for (name, pick) in STAT_COLUMNS {
        files.push((format!("cdf_{name}.csv"), cdf_csv(site, &stats, pick)?));
    }
    files.push(("summary_stats.csv".into(), summary_stats_csv(site, &stats)));
    files.push(("summary_mimo.csv".into(), summary_mimo_csv(site, &cfg.arrays, &mimo)));
    files.push(("failures.csv".into(), failures_csv(site, &failures)));

    let rx_height = match cfg.rx {
        RxMode::Random { height, .. } => Some(height),
        RxMode::Fixed { .. } => None,
    };
    let manifest = write_outputs(cfg, "run", rx_height, files)?;
    Ok(RunReport {
        output_dir: cfg.output_dir.clone(),
        manifest,
        stats_rows: stats.len(),
        mimo_rows: mimo.len(),
        failures,
    })
}

fn run_rx(cfg: &ExperimentConfig, scene: &Scene, tx: &Vec3, rx: &Vec3, i: usize) -> RxOutput {
    let mut out = RxOutput::default();
    let trace_cfg = cfg.trace_config(derive_seed(cfg.seed, STREAM_TRACE, i as u64));
    let fail_all = |out: &mut RxOutput, f: f64, stage, message: String| {
        out.failures.push(Failure {
            rx_index: i,
            f_c: f,
            bandwidth: None,
            array: None,
            stage,
            message,
        })
    };
    let geometry = match trace_geometry(scene, tx, rx, &trace_cfg) {
        Ok(g) => g,
        Err(e) => {
            let msg = e.to_string();
            for &f in &cfg.frequencies_hz {
                fail_all(&mut out, f, "trace", msg.clone());
            }
            return out;
        }
    };
    let (tx_dir, rx_dir) = facing_boresights(tx, rx);
    for &f in &cfg.frequencies_hz {
        let paths = match paths_at(scene, &geometry, f, &trace_cfg) {
            Ok(p) => p,
            Err(e) => {
                fail_all(&mut out, f, "trace", e.to_string());
                continue;
            }
        };
        let stats = match channel_stats(&paths) {
            Ok(s) => s,
            Err(e) => {
                fail_all(&mut out, f, "stats", e.to_string());
                continue;
            }
        };
        for &bw in &cfg.bandwidths_hz {
            out.stats.push(StatsRow {
                rx_index: i,
                f_c: f,
                bandwidth: bw,
                stats,
            });
            for (a, pair) in cfg.arrays.iter().enumerate() {
                match link_metrics(&paths, pair, f, bw, cfg, tx_dir, rx_dir) {
                    Ok((rank, cond_db, se, eta_db)) => out.mimo.push(MimoRow {
                        rx_index: i,
                        f_c: f,
                        bandwidth: bw,
                        array: a,
                        rank,
                        cond_db,
                        se,
                        eta_db,
                    }),
                    Err(e) => out.failures.push(Failure {
                        rx_index: i,
                        f_c: f,
                        bandwidth: Some(bw),
                        array: Some(pair.label()),
                        stage: "mimo",
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    out
}

fn link_metrics(
    paths: &[RayPath],
    pair: &ArrayPair,
    f: f64,
    bw: f64,
    cfg: &ExperimentConfig,
    tx_dir: crate::geometry::Angles,
    rx_dir: crate::geometry::Angles,
) -> Result<(f64, f64, f64, f64)> {
    let array = |dims: [usize; 2], dir| {
        ArrayConfig {
            pattern: pair.pattern,
            ..ArrayConfig::upa(dims[0], dims[1], f)
        }
        .facing(dir)
    };
    let cir = synthesize(paths, &array(pair.tx, tx_dir), &array(pair.rx, rx_dir), f)?;
    let ch = cfr(&cir, bw, cfg.subcarrier_spacing_hz)?;
    let m = evaluate(&ch, &cfg.eval)?;
    let eta_db = if ch.n_subcarriers() >= 2 {
        hardening_across_subcarriers(&ch)?.eta_db
    } else {
        f64::NAN
    };
    Ok((m.mean_rank, m.mean_cond_db, m.se_bps_hz, eta_db))
}

type StatPick = fn(&ChannelStats) -> f64;

const STAT_COLUMNS: [(&str, StatPick); 4] = [
    ("k_factor_db", |s| s.k_factor_db),
    ("rms_ds_ns", |s| s.rms_ds * 1e9),
    ("asa_deg", |s| s.asa),
    ("mpc_count", |s| s.mpc_count as f64),
];

fn rx_csv(rx: &[Vec3]) -> String {
    let mut s = String::from("rx_index,x_m,y_m,z_m\n");
    for (i, p) in rx.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{},{}", p.x, p.y, p.z);
    }
    s
}

pub const STATS_HEADER: &str = "site,seed,rx_index,f_c_hz,bandwidth_hz,k_factor_db,rms_ds_ns,asa_deg,mpc_count,los";

fn stats_csv(site: &str, seed: u64, rows: &[StatsRow]) -> String {
    let mut s = format!("{STATS_HEADER}\n");
    for r in rows {
        let st = &r.stats;
        let _ = writeln!(
            s,
            "{site},{seed},{},{},{},{},{},{},{},{}",
            r.rx_index,
            r.f_c,
            r.bandwidth,
            st.k_factor_db,
            st.rms_ds * 1e9,
            st.asa,
            st.mpc_count,
            u8::from(st.los_present)
        );
    }
    s
}

pub const MIMO_HEADER: &str =
    "site,rx_index,f_c_hz,bandwidth_hz,array,n_tx,n_rx,mean_rank,mean_cond_db,se_bps_hz,eta_db";

fn mimo_csv(site: &str, arrays: &[ArrayPair], rows: &[MimoRow]) -> String {
    let mut s = format!("{MIMO_HEADER}\n");
    for r in rows {
        let a = &arrays[r.array];
        let _ = writeln!(
            s,
            "{site},{},{},{},{},{},{},{},{},{},{}",
            r.rx_index,
            r.f_c,
            r.bandwidth,
            a.label(),
            a.tx[0] * a.tx[1],
            a.rx[0] * a.rx[1],
            r.rank,
            r.cond_db,
            r.se,
            r.eta_db
        );
    }
    s
}

/// Groups by `(f_c, bw)` in ascending order.
fn group_stats(rows: &[StatsRow]) -> BTreeMap<(u64, u64), Vec<&StatsRow>> {
    let mut groups: BTreeMap<(u64, u64), Vec<&StatsRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r.f_c, r.bandwidth)).or_default().push(r);
    }
    groups
}

/// Order-preserving key for non-negative floats.
fn key(f: f64, bw: f64) -> (u64, u64) {
    (f.to_bits(), bw.to_bits())
}

fn cdf_csv(site: &str, rows: &[StatsRow], pick: StatPick) -> Result<String> {
    let mut s = String::from("site,f_c_hz,bandwidth_hz,value,prob\n");
    for ((f, bw), group) in group_stats(rows) {
        let values: Vec<f64> = group.iter().map(|r| pick(&r.stats)).filter(|v| v.is_finite()).collect();
        if values.is_empty() {
            continue;
        }
        for (v, p) in empirical_cdf(&values)? {
            let _ = writeln!(s, "{site},{},{},{v},{p}", f64::from_bits(f), f64::from_bits(bw));
        }
    }
    Ok(s)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summary_stats_csv(site: &str, rows: &[StatsRow]) -> String {
    let mut s = String::from(
        "site,f_c_hz,bandwidth_hz,n,mean_k_factor_db,n_k_factor_inf,mean_rms_ds_ns,mean_asa_deg,mean_mpc_count,los_fraction\n",
    );
    for ((f, bw), g) in group_stats(rows) {
        let finite_k = g.iter().map(|r| r.stats.k_factor_db).filter(|k| k.is_finite());
        let n_inf = g.iter().filter(|r| !r.stats.k_factor_db.is_finite()).count();
        let _ = writeln!(
            s,
            "{site},{},{},{},{},{n_inf},{},{},{},{}",
            f64::from_bits(f),
            f64::from_bits(bw),
            g.len(),
            mean(finite_k),
            mean(g.iter().map(|r| r.stats.rms_ds * 1e9)),
            mean(g.iter().map(|r| r.stats.asa)),
            mean(g.iter().map(|r| r.stats.mpc_count as f64)),
            mean(g.iter().map(|r| f64::from(u8::from(r.stats.los_present)))),
        );
    }
    s
}

fn summary_mimo_csv(site: &str, arrays: &[ArrayPair], rows: &[MimoRow]) -> String {
    let mut groups: BTreeMap<(u64, u64, usize), Vec<&MimoRow>> = BTreeMap::new();
    for r in rows {
        let (f, bw) = key(r.f_c, r.bandwidth);
        groups.entry((f, bw, r.array)).or_default().push(r);
    }
    let mut s = String::from("site,f_c_hz,bandwidth_hz,array,n,mean_rank,mean_cond_db,mean_se_bps_hz,mean_eta_db\n");
    for ((f, bw, a), g) in groups {
        let _ = writeln!(
            s,
            "{site},{},{},{},{},{},{},{},{}",
            f64::from_bits(f),
            f64::from_bits(bw),
            arrays[a].label(),
            g.len(),
            mean(g.iter().map(|r| r.rank)),
            mean(g.iter().map(|r| r.cond_db)),
            mean(g.iter().map(|r| r.se)),
            mean(g.iter().map(|r| r.eta_db).filter(|v| v.is_finite())),
        );
    }
    s
}

fn failures_csv(site: &str, failures: &[Failure]) -> String {
    let mut s = String::from("site,rx_index,f_c_hz,bandwidth_hz,array,stage,message\n");
    for f in failures {
        let bw = f.bandwidth.map(|b| b.to_string()).unwrap_or_else(|| "all".into());
        let array = f.array.clone().unwrap_or_else(|| "all".into());
        let msg = f.message.replace(['"', '\n'], "'");
        let _ = writeln!(s, "{site},{},{},{bw},{array},{},\"{msg}\"", f.rx_index, f.f_c, f.stage);
    }
    s
}

/// Writes the resolved config, the data files and the manifest.
fn write_outputs(
    cfg: &ExperimentConfig,
    command: &str,
    rx_height: Option<f64>,
    mut files: Vec<(String, String)>,
) -> Result<RunManifest> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(e).context(format!("creating {}", dir.display())))?;
    let mut resolved = cfg.clone();
    resolved.output_dir = PathBuf::from(".");
    resolved.workers = 0;
    files.push(("config.toml".into(), resolved.to_toml()?));
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut entries = Vec::with_capacity(files.len());
    for (name, content) in &files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))?;
        entries.push(FileEntry {
            path: name.clone(),
            sha256: hex_sha256(content.as_bytes()),
            bytes: content.len() as u64,
        });
    }
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.into(),
        command: command.into(),
        config_sha256: config_hash(cfg)?,
        seed: cfg.seed,
        rx_height_m: rx_height,
        files: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join(manifest_name(command)), text)?;
    Ok(manifest)
}

/// Which array-scaling study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    FixedCount,
    FixedAperture,
}

impl SweepKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SweepKind::FixedCount => "sweep_count.csv",
            SweepKind::FixedAperture => "sweep_aperture.csv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
    pub outcome: SweepOutcome,
}

/// Runs a scaling sweep over the first `sweep.locations` Rx positions at
/// every configured carrier and writes `sweep_count.csv` or
/// `sweep_aperture.csv`.
pub fn run_sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<SweepReport> {
    let Setup { scene, tx, mut rx } = setup(cfg)?;
    rx.truncate(cfg.sweep.locations);
    let spec = SweepSpec {
        frequencies: cfg.frequencies_hz.clone(),
        bandwidth: cfg.sweep.bandwidth_hz,
        subcarrier_spacing: cfg.subcarrier_spacing_hz,
        rx_array: (cfg.sweep.rx_array[0], cfg.sweep.rx_array[1]),
        pattern: cfg.arrays[0].pattern,
        eval: cfg.eval,
        trace: cfg.trace_config(derive_seed(cfg.seed, STREAM_TRACE, 0)),
        hardening: cfg.sweep.hardening,
        workers: cfg.workers,
    };
    let outcome = match kind {
        SweepKind::FixedCount => sweep_fixed_count(&scene, &tx, &rx, &cfg.sweep.tx_sizes, &spec)?,
        SweepKind::FixedAperture => sweep_fixed_aperture(&scene, &tx, &rx, &cfg.sweep.apertures_m, &spec)?,
    };
    let mut table = Vec::new();
    write_sweep_csv(&mut table, &outcome.rows)?;
    let table = String::from_utf8(table).map_err(|e| Error::Config(e.to_string()))?;
    let mut failures = String::from("rx_index,f_c_hz,message\n");
    for f in &outcome.failures {
        let msg = f.message.replace(['"', '\n'], "'");
        let _ = writeln!(failures, "{},{},\"{msg}\"", f.rx_index, f.f_c);
    }
    let command = match kind {
        SweepKind::FixedCount => "sweep-count",
        SweepKind::FixedAperture => "sweep-aperture",
    };
    let files = vec![
        (kind.file_name().to_string(), table),
        (format!("{command}-failures.csv"), failures),
    ];
    let rx_height = match cfg.rx {
        RxMode::Random { height, .. } => Some(height),
        RxMode::Fixed { .. } => None,
    };
    let manifest = write_outputs(cfg, command, rx_height, files)?;
    Ok(SweepReport {
        output_dir: cfg.output_dir.clone(),
        manifest,
        outcome,
    })
}

/// `manifest.toml` for `run`, `<command>-manifest.toml` for sweeps.
pub fn manifest_name(command: &str) -> String {
    if command == "run" {
        "manifest.toml".into()
    } else {
        format!("{command}-manifest.toml")
    }
}

/// Reads the manifest a command wrote into `dir`.
pub fn read_manifest(dir: &Path, command: &str) -> Result<RunManifest> {
    let text = std::fs::read_to_string(dir.join(manifest_name(command)))?;
    toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
}
