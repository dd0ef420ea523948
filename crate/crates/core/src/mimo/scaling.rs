//! Array-scaling sweeps: fixed element count and fixed physical aperture.
//!
//! Each Rx location is traced once; the frequency-independent path geometry
//! is evaluated at every carrier and combined with every array size.
//! Results are averaged over locations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{evaluate_compact, hardening_across_ensemble, normalized_variance, EvalConfig};
use crate::channel::{cfr, synthesize, ArrayConfig, Cir, ElementPattern, MimoChannel};
use crate::geometry::{Angles, Vec3};
use crate::harness::parallel::par_map;
use crate::scene::Scene;
use crate::tracer::{paths_at, trace_geometry, TraceConfig};
use crate::{wavelength, Error, Result};

/// Elements per side of a half-wavelength UPA spanning `aperture` meters:
/// `floor(L / (λ/2)) + 1`.
pub fn elements_per_side(aperture: f64, f: f64) -> usize {
    if !(aperture > 0.0) {
        return 1;
    }
    // Guard against round-off when L is an exact multiple of λ/2.
    (aperture / (wavelength(f) / 2.0) + 1e-9).floor() as usize + 1
}

/// Horizontal boresights of a Tx/Rx pair facing each other.
pub fn facing_boresights(tx: &Vec3, rx: &Vec3) -> (Angles, Angles) {
    let flat = |d: Vec3| Angles {
        azimuth: d.y.atan2(d.x),
        elevation: 0.0,
    };
    (flat(rx - tx), flat(tx - rx))
}

/// CFR with the array responses reduced to at most one virtual element per
/// path.
///
/// When an array has more elements than there are paths, its response
/// matrix `A = Q·R` is replaced by the triangular factor `R`. Multiplying by
/// `Q`, which has orthonormal columns, changes neither the singular values
/// nor the Frobenius norm of any `H_k`.
pub fn compact_cfr(cir: &Cir, bandwidth: f64, subcarrier_spacing: f64) -> Result<MimoChannel> {
    let l = cir.n_taps();
    let mut reduced = cir.clone();
    if l < cir.n_tx() {
        reduced.tx_response = cir.tx_response.clone().qr().r();
    }
    if l < cir.n_rx() {
        reduced.rx_response = cir.rx_response.clone().qr().r();
    }
    cfr(&reduced, bandwidth, subcarrier_spacing)
}

/// How the hardening metric of a sweep point is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardeningMode {
    /// Across subcarriers per location, then the mean over locations.
    #[default]
    Subcarriers,
    /// Across locations per subcarrier, averaged over subcarriers.
    Locations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub frequencies: Vec<f64>,
    pub bandwidth: f64,
    pub subcarrier_spacing: f64,
    /// Rx array rows and columns.
    pub rx_array: (usize, usize),
    pub pattern: ElementPattern,
    pub eval: EvalConfig,
    pub trace: TraceConfig,
    pub hardening: HardeningMode,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub f_c_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub aperture_m: f64,
    pub mean_rank: f64,
    pub mean_cond_db: f64,
    pub se_bps_hz: f64,
    pub eta_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub rx_index: usize,
    pub f_c: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Tx sizes per side at every frequency.
pub fn sweep_fixed_count(
    scene: &Scene,
    tx: &Vec3,
    rx_set: &[Vec3],
    tx_sizes: &[usize],
    spec: &SweepSpec,
) -> Result<SweepOutcome> {
    if tx_sizes.is_empty() || tx_sizes.contains(&0) {
        return Err(Error::Config("Tx sizes must be non-empty and positive".into()));
    }
    if tx_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("Tx sizes must be strictly ascending".into()));
    }
    let points = |f: f64| -> Vec<(usize, f64)> {
        tx_sizes
            .iter()
            .map(|&n| (n, (n as f64 - 1.0) * wavelength(f) / 2.0))
            .collect()
    };
    sweep(scene, tx, rx_set, spec, &points)
}

/// Tx apertures (side length, meters) at every frequency, with the element
/// count from [`elements_per_side`].
pub fn sweep_fixed_aperture(
    scene: &Scene,
    tx: &Vec3,
    rx_set: &[Vec3],
    apertures: &[f64],
    spec: &SweepSpec,
) -> Result<SweepOutcome> {
    if apertures.is_empty() || apertures.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::Config("apertures must be non-empty and non-negative".into()));
    }
    let points = |f: f64| -> Vec<(usize, f64)> { apertures.iter().map(|&a| (elements_per_side(a, f), a)).collect() };
    sweep(scene, tx, rx_set, spec, &points)
}

/// Metrics of one location at one sweep point.
struct PointResult {
    rank: f64,
    cond_db: f64,
    se: f64,
    eta: f64,
    channel: Option<MimoChannel>,
}

type LocationResult = Vec<(usize, Vec<PointResult>)>;

fn sweep(
    scene: &Scene,
    tx: &Vec3,
    rx_set: &[Vec3],
    spec: &SweepSpec,
    points: &(dyn Fn(f64) -> Vec<(usize, f64)> + Sync),
) -> Result<SweepOutcome> {
    if rx_set.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one Rx location"));
    }
    if spec.frequencies.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one frequency"));
    }
    spec.eval.validate()?;
    spec.trace.validate()?;
    let keep_channels = spec.hardening == HardeningMode::Locations;

    let per_location: Vec<(LocationResult, Vec<SweepFailure>)> = par_map(spec.workers, rx_set.len(), |i| {
        sweep_location(scene, tx, &rx_set[i], i, spec, points, keep_channels)
    });

    let mut outcome = SweepOutcome::default();
    let (rx_rows, rx_cols) = spec.rx_array;
    for (fi, &f) in spec.frequencies.iter().enumerate() {
        for (pi, (n, aperture)) in points(f).into_iter().enumerate() {
            let results: Vec<&PointResult> = per_location
                .iter()
                .filter_map(|(loc, _)| loc.iter().find(|(k, _)| *k == fi).map(|(_, v)| &v[pi]))
                .collect();
            if results.is_empty() {
                continue;
            }
            let count = results.len() as f64;
            let mean = |g: fn(&PointResult) -> f64| results.iter().map(|r| g(r)).sum::<f64>() / count;
            let eta = match spec.hardening {
                HardeningMode::Subcarriers => mean(|r| r.eta),
                HardeningMode::Locations => {
                    let channels: Vec<MimoChannel> = results.iter().filter_map(|r| r.channel.clone()).collect();
                    if channels.len() < 2 {
                        f64::NAN
                    } else {
                        hardening_across_ensemble(&channels)?.eta
                    }
                }
            };
            outcome.rows.push(SweepRow {
                f_c_hz: f,
                n_tx: n * n,
                n_rx: rx_rows * rx_cols,
                aperture_m: aperture,
                mean_rank: mean(|r| r.rank),
                mean_cond_db: mean(|r| r.cond_db),
                se_bps_hz: mean(|r| r.se),
                eta_db: 10.0 * eta.log10(),
            });
        }
    }
    for (_, failures) in per_location {
        outcome.failures.extend(failures);
    }
    Ok(outcome)
}

fn sweep_location(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    rx_index: usize,
    spec: &SweepSpec,
    points: &(dyn Fn(f64) -> Vec<(usize, f64)> + Sync),
    keep_channels: bool,
) -> (LocationResult, Vec<SweepFailure>) {
    let mut results = Vec::new();
    let mut failures = Vec::new();
    let fail = |f: f64, message: String| SweepFailure {
        rx_index,
        f_c: f,
        message,
    };
    let geometry = match trace_geometry(scene, tx, rx, &spec.trace) {
        Ok(g) => g,
        Err(e) => {
            failures.extend(spec.frequencies.iter().map(|&f| fail(f, e.to_string())));
            return (results, failures);
        }
    };
    let (tx_dir, rx_dir) = facing_boresights(tx, rx);
    for (fi, &f) in spec.frequencies.iter().enumerate() {
        let run = || -> Result<Vec<PointResult>> {
            let paths = paths_at(scene, &geometry, f, &spec.trace)?;
            let rx_array = array(spec.rx_array.0, spec.rx_array.1, f, spec.pattern, rx_dir);
            points(f)
                .into_iter()
                .map(|(n, _)| {
                    let tx_array = array(n, n, f, spec.pattern, tx_dir);
                    let cir = synthesize(&paths, &tx_array, &rx_array, f)?;
                    let ch = compact_cfr(&cir, spec.bandwidth, spec.subcarrier_spacing)?;
                    let m = evaluate_compact(&ch, tx_array.len(), rx_array.len(), &spec.eval)?;
                    let eta = if ch.n_subcarriers() >= 2 {
                        normalized_variance(&ch.gains())?
                    } else {
                        f64::NAN
                    };
                    let channel = keep_channels.then(|| {
                        if spec.eval.normalize {
                            let g = ch.gains();
                            let mean = g.iter().sum::<f64>() / g.len() as f64;
                            ch.scaled(((tx_array.len() * rx_array.len()) as f64 / mean).sqrt())
                        } else {
                            ch
                        }
                    });
                    Ok(PointResult {
                        rank: m.mean_rank,
                        cond_db: m.mean_cond_db,
                        se: m.se_bps_hz,
                        eta,
                        channel,
                    })
                })
                .collect()
        };
        match run() {
            Ok(r) => results.push((fi, r)),
            Err(e) => failures.push(fail(f, e.to_string())),
        }
    }
    (results, failures)
}

fn array(rows: usize, cols: usize, f: f64, pattern: ElementPattern, boresight: Angles) -> ArrayConfig {
    ArrayConfig {
        pattern,
        ..ArrayConfig::upa(rows, cols, f)
    }
    .facing(boresight)
}

pub const SWEEP_CSV_HEADER: &str = "f_c_hz,n_tx,n_rx,aperture_m,mean_rank,mean_cond_db,se_bps_hz,eta_db";

/// Writes sweep rows sorted by frequency, then Tx count, then aperture.
pub fn write_sweep_csv<W: Write>(mut writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| {
        a.f_c_hz
            .total_cmp(&b.f_c_hz)
            .then(a.n_tx.cmp(&b.n_tx))
            .then(a.aperture_m.total_cmp(&b.aperture_m))
    });
    writeln!(writer, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            r.f_c_hz, r.n_tx, r.n_rx, r.aperture_m, r.mean_rank, r.mean_cond_db, r.se_bps_hz, r.eta_db
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::cfr;
    use crate::mimo::singular_values;
    use crate::tracer::{Path, PathKind};
    use num_complex::Complex64;

    #[test]
    fn element_counts() {
        assert_eq!(elements_per_side(0.30, 3.5e9), 8);
        assert_eq!(elements_per_side(0.30, 7e9), 15);
        assert_eq!(elements_per_side(0.30, 28e9), 57);
        assert_eq!(elements_per_side(0.0, 28e9), 1);
        assert_eq!(elements_per_side(1e-4, 3.5e9), 1);
    }

    #[test]
    fn compact_cfr_preserves_spectrum() {
        let f = 10e9;
        let paths: Vec<Path> = [(10e-9, 0.3, 0.1), (14e-9, -0.7, 0.2), (21e-9, 1.2, -0.3)]
            .iter()
            .map(|&(d, az, el)| Path {
                kind: PathKind::Specular(1),
                delay: d,
                gain: Complex64::from_polar(1e-3, d * 1e9),
                aod: Angles {
                    azimuth: az,
                    elevation: el,
                },
                aoa: Angles {
                    azimuth: -az,
                    elevation: -el,
                },
                interactions: vec![0],
                length: d * crate::SPEED_OF_LIGHT,
            })
            .collect();
        let tx = ArrayConfig::upa(4, 4, f);
        let rx = ArrayConfig::upa(3, 3, f);
        let cir = synthesize(&paths, &tx, &rx, f).unwrap();
        let full = cfr(&cir, 4e6, 400e3).unwrap();
        let small = compact_cfr(&cir, 4e6, 400e3).unwrap();
        assert_eq!(small.n_tx(), 3);
        assert_eq!(small.n_rx(), 3);
        for (a, b) in full.h.iter().zip(&small.h) {
            let sa = singular_values(a).unwrap();
            let sb = singular_values(b).unwrap();
            for i in 0..3 {
                assert!((sa[i] - sb[i]).abs() <= 1e-9 * sa[0]);
            }
            assert!((a.norm_squared() - b.norm_squared()).abs() <= 1e-9 * a.norm_squared());
        }
    }

    #[test]
    fn facing_pair_points_at_each_other() {
        let (t, r) = facing_boresights(&Vec3::new(0.0, 0.0, 3.0), &Vec3::new(0.0, 5.0, 1.0));
        assert!((t.azimuth - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!((r.azimuth + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
