//! Propagation statistics of a single Tx–Rx realization.
//!
//! All statistics use path powers `|g|²` from the isotropic path list. The
//! K-factor uses the known LoS path identity; the azimuth spread is the
//! circular spread `√(−2 ln R)` with `R = |Σ p_l e^{jφ_l}| / Σ p_l`, which is
//! invariant to rotations and needs no angle unwrapping.

use serde::{Deserialize, Serialize};

use crate::tracer::{Path, PathKind};
use crate::{Error, Result};

/// Smallest resultant length used by [`asa`]. Caps the spread at `π√2` rad.
const MIN_RESULTANT: f64 = 5.172_318_620_381_191e-5; // e^{-π²}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// `+∞` when there is no NLoS power, `−∞` when there is no LoS path.
    pub k_factor_db: f64,
    /// Seconds.
    pub rms_ds: f64,
    /// Degrees.
    pub asa: f64,
    pub mpc_count: usize,
    pub los_present: bool,
}

/// Rician K-factor `10·log10(P_LoS / Σ P_NLoS)` in dB.
pub fn k_factor(paths: &[Path]) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("K-factor needs at least one path"));
    }
    let mut los = 0.0;
    let mut nlos = 0.0;
    let mut has_los = false;
    for p in paths {
        if p.kind == PathKind::Los {
            has_los = true;
            los += p.power();
        } else {
            nlos += p.power();
        }
    }
    Ok(match (has_los, nlos > 0.0) {
        (false, _) => f64::NEG_INFINITY,
        (true, false) => f64::INFINITY,
        (true, true) => 10.0 * (los / nlos).log10(),
    })
}

/// Power-weighted RMS spread of `(delay, power)` taps.
pub fn rms_delay_spread(taps: &[(f64, f64)]) -> Result<f64> {
    if taps.is_empty() {
        return Err(Error::EmptyInput("delay spread needs at least one tap"));
    }
    let total: f64 = taps.iter().map(|t| t.1).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidChannel("taps carry no power".into()));
    }
    let mean = taps.iter().map(|(d, p)| d * p).sum::<f64>() / total;
    let var = taps.iter().map(|(d, p)| p * (d - mean) * (d - mean)).sum::<f64>() / total;
    Ok(var.max(0.0).sqrt())
}

/// RMS delay spread of a path list, in seconds.
pub fn rms_delay_spread_paths(paths: &[Path]) -> Result<f64> {
    let taps: Vec<(f64, f64)> = paths.iter().map(|p| (p.delay, p.power())).collect();
    rms_delay_spread(&taps)
}

/// Circular spread of `(azimuth rad, power)` pairs, in degrees.
pub fn circular_spread(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("angular spread needs at least one path"));
    }
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidChannel("paths carry no power".into()));
    }
    // 1 − R² = Σ_ij p_i p_j·2·sin²((φ_i − φ_j)/2) / (Σp)², which depends only
    // on angle differences and is exactly zero for coincident arrivals.
    let mut spread = 0.0;
    for (i, &(phi_i, p_i)) in samples.iter().enumerate() {
        for &(phi_j, p_j) in &samples[..i] {
            let s = ((phi_i - phi_j) / 2.0).sin();
            spread += p_i * p_j * s * s;
        }
    }
    let one_minus_r2 = (4.0 * spread / (total * total)).clamp(0.0, 1.0 - MIN_RESULTANT * MIN_RESULTANT);
    // −2 ln R = −ln(1 − (1 − R²))
    Ok((-(-one_minus_r2).ln_1p()).max(0.0).sqrt().to_degrees())
}

/// Azimuth spread of arrival in degrees.
pub fn asa(paths: &[Path]) -> Result<f64> {
    let samples: Vec<(f64, f64)> = paths.iter().map(|p| (p.aoa.azimuth, p.power())).collect();
    circular_spread(&samples)
}

/// Number of retained multipath components.
pub fn mpc_count(paths: &[Path]) -> usize {
    paths.len()
}

/// All four statistics of one realization.
pub fn channel_stats(paths: &[Path]) -> Result<ChannelStats> {
    Ok(ChannelStats {
        k_factor_db: k_factor(paths)?,
        rms_ds: rms_delay_spread_paths(paths)?,
        asa: asa(paths)?,
        mpc_count: mpc_count(paths),
        los_present: paths.iter().any(|p| p.kind == PathKind::Los),
    })
}

/// Right-continuous empirical CDF: sorted distinct values with `P(X ≤ x)`.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("CDF needs at least one value"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidChannel("CDF input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (i, v) in sorted.into_iter().enumerate() {
        let prob = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = prob,
            _ => out.push((v, prob)),
        }
    }
    Ok(out)
}
