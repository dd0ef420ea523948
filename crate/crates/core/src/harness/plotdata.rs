//! Plot-ready long-format tables derived from a dataset directory.
//!
//! | kind | source | columns |
//! |------|--------|---------|
//! | `cdf` | `stats.csv` | site, bandwidth_hz, f_c_hz, metric, value, prob |
//! | `mean_vs_freq` | `stats.csv`, `mimo.csv` | site, bandwidth_hz, array, metric, f_c_hz, value |
//! | `sweep` | `sweep_count.csv`, `sweep_aperture.csv` | study, f_c_hz, n_tx, aperture_m, metric, value |
//!
//! `select` restricts the output to one metric column. Non-finite values are
//! left out of CDFs and means.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::metrics::empirical_cdf;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Cdf,
    MeanVsFreq,
    Sweep,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cdf" => Ok(PlotKind::Cdf),
            "mean_vs_freq" => Ok(PlotKind::MeanVsFreq),
            "sweep" => Ok(PlotKind::Sweep),
            other => Err(Error::Config(format!(
                "unknown plot kind `{other}` (expected cdf, mean_vs_freq or sweep)"
            ))),
        }
    }
}

const STATS_METRICS: [&str; 4] = ["k_factor_db", "rms_ds_ns", "asa_deg", "mpc_count"];
const MIMO_METRICS: [&str; 4] = ["mean_rank", "mean_cond_db", "se_bps_hz", "eta_db"];

/// A CSV file as header plus string records.
struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader =
            csv::Reader::from_path(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("dataset column `{name}` is missing")))
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("`{s}` is not a number")))
}

fn selected<'a>(all: &'a [&'a str], select: Option<&str>) -> Result<Vec<&'a str>> {
    match select {
        None => Ok(all.to_vec()),
        Some(m) => all
            .iter()
            .find(|&&a| a == m)
            .map(|&a| vec![a])
            .ok_or_else(|| Error::Config(format!("unknown metric `{m}`"))),
    }
}

/// Builds the table for `kind` from the dataset in `dir`.
pub fn emit_plotdata(dir: &Path, kind: PlotKind, select: Option<&str>) -> Result<String> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("dataset {} does not exist", dir.display())));
    }
    match kind {
        PlotKind::Cdf => cdf(dir, select),
        PlotKind::MeanVsFreq => mean_vs_freq(dir, select),
        PlotKind::Sweep => sweep(dir, select),
    }
}

fn cdf(dir: &Path, select: Option<&str>) -> Result<String> {
    let t = Table::read(&dir.join("stats.csv"))?;
    let (site, bw, f) = (t.col("site")?, t.col("bandwidth_hz")?, t.col("f_c_hz")?);
    let mut out = String::from("site,bandwidth_hz,f_c_hz,metric,value,prob\n");
    for metric in selected(&STATS_METRICS, select)? {
        let c = t.col(metric)?;
        let mut groups: BTreeMap<(String, u64, u64), Vec<f64>> = BTreeMap::new();
        for r in &t.rows {
            let v = num(&r[c])?;
            let entry = groups
                .entry((r[site].to_string(), num(&r[bw])?.to_bits(), num(&r[f])?.to_bits()))
                .or_default();
            if v.is_finite() {
                entry.push(v);
            }
        }
        for ((s, b, fr), values) in groups {
            if values.is_empty() {
                continue;
            }
            for (v, p) in empirical_cdf(&values)? {
                let _ = writeln!(out, "{s},{},{},{metric},{v},{p}", f64::from_bits(b), f64::from_bits(fr));
            }
        }
    }
    Ok(out)
}

fn mean_vs_freq(dir: &Path, select: Option<&str>) -> Result<String> {
    let all: Vec<&str> = STATS_METRICS.iter().chain(&MIMO_METRICS).copied().collect();
    let metrics = selected(&all, select)?;
    // (site, bw, array, metric, f) -> (sum, count)
    type Key = (String, u64, String, usize, u64);
    let mut acc: BTreeMap<Key, (f64, usize)> = BTreeMap::new();
    for (file, names, has_array) in [
        ("stats.csv", &STATS_METRICS[..], false),
        ("mimo.csv", &MIMO_METRICS[..], true),
    ] {
        let wanted: Vec<&str> = names.iter().copied().filter(|m| metrics.contains(m)).collect();
        if wanted.is_empty() {
            continue;
        }
        let t = Table::read(&dir.join(file))?;
        let (site, bw, f) = (t.col("site")?, t.col("bandwidth_hz")?, t.col("f_c_hz")?);
        let array = if has_array { Some(t.col("array")?) } else { None };
        for m in wanted {
            let c = t.col(m)?;
            let order = all.iter().position(|a| *a == m).unwrap_or(0);
            for r in &t.rows {
                let v = num(&r[c])?;
                let key = (
                    r[site].to_string(),
                    num(&r[bw])?.to_bits(),
                    array.map(|a| r[a].to_string()).unwrap_or_default(),
                    order,
                    num(&r[f])?.to_bits(),
                );
                let e = acc.entry(key).or_insert((0.0, 0));
                if v.is_finite() {
                    e.0 += v;
                    e.1 += 1;
                }
            }
        }
    }
    let mut out = String::from("site,bandwidth_hz,array,metric,f_c_hz,value\n");
    for ((s, b, a, m, f), (sum, n)) in acc {
        let value = if n == 0 { f64::NAN } else { sum / n as f64 };
        let _ = writeln!(
            out,
            "{s},{},{a},{},{},{value}",
            f64::from_bits(b),
            all[m],
            f64::from_bits(f)
        );
    }
    Ok(out)
}

fn sweep(dir: &Path, select: Option<&str>) -> Result<String> {
    let metrics = selected(&MIMO_METRICS, select)?;
    let mut out = String::from("study,f_c_hz,n_tx,aperture_m,metric,value\n");
    let mut found = false;
    for (study, file) in [
        ("fixed_count", "sweep_count.csv"),
        ("fixed_aperture", "sweep_aperture.csv"),
    ] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        found = true;
        let t = Table::read(&path)?;
        let (f, n, a) = (t.col("f_c_hz")?, t.col("n_tx")?, t.col("aperture_m")?);
        for r in &t.rows {
            for m in &metrics {
                let _ = writeln!(out, "{study},{},{},{},{m},{}", &r[f], &r[n], &r[a], &r[t.col(m)?]);
            }
        }
    }
    if !found {
        return Err(Error::Config(format!(
            "no sweep tables in {}; run sweep-count or sweep-aperture first",
            dir.display()
        )));
    }
    Ok(out)
}
