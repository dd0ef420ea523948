//! SVD-based MIMO metrics and channel hardening.
//!
//! Per subcarrier `k` with singular values `σ_{k,1} ≥ … ≥ σ_{k,m}`:
//!
//! - effective rank `r_k = #{i : σ_{k,i} ≥ ζ·σ_{k,1}}`
//! - condition number `20·log10(σ_{k,1}/σ_{k,m})` in dB, capped
//! - spectral efficiency `C = (1/N_f)·Σ_k Σ_i log2(1 + (ρ/N_t)·σ_{k,i}²)`
//!
//! Hardening is `η = Var(‖H_k‖_F²) / E[‖H_k‖_F²]²` averaged over subcarriers
//! when an ensemble of realizations is available, or taken across
//! subcarriers for a single realization.

pub mod scaling;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::MimoChannel;
use crate::{Error, Result};

/// Singular values below this fraction of `σ₁` count as zero for the
/// condition-number cap.
pub const SVD_ZERO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub zeta: f64,
    /// Linear SNR.
    pub rho: f64,
    pub cond_cap_db: f64,
    /// Scale each realization so that `E_k[‖H_k‖_F²] = N_t·N_r` before
    /// applying `rho`.
    pub normalize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            zeta: 1e-3,
            rho: 100.0,
            cond_cap_db: 60.0,
            normalize: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!("zeta {} must lie in (0, 1)", self.zeta)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho {} must be positive", self.rho)));
        }
        if !(self.cond_cap_db > 0.0) {
            return Err(Error::Config("cond_cap_db must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoMetrics {
    pub mean_rank: f64,
    pub mean_cond_db: f64,
    pub se_bps_hz: f64,
    /// Descending singular values per subcarrier.
    pub singular_values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardeningResult {
    pub eta: f64,
    pub eta_db: f64,
    pub n_tx: usize,
    pub n_rx: usize,
}

/// Hardened spectral-efficiency approximation and its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardenedSe {
    /// `log2(1 + ρ·E[‖H_k‖_F²])` averaged over `k`.
    pub approx: f64,
    /// `E[log2(1 + ρ·‖H_k‖_F²)]` averaged over `k`.
    pub exact: f64,
    pub error: f64,
}

/// Singular values of `h` in descending order, `min(N_r, N_t)` of them.
pub fn singular_values(h: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if h.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidChannel("matrix has non-finite entries".into()));
    }
    if h.is_empty() {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = h.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    for s in &mut sv {
        *s = s.max(0.0);
    }
    Ok(sv)
}

/// Number of singular values with `σ_i ≥ ζ·σ₁`; zero for an all-zero matrix.
pub fn effective_rank(sv: &[f64], zeta: f64) -> usize {
    match sv.first() {
        Some(&s1) if s1 > 0.0 => sv.iter().filter(|&&s| s >= zeta * s1).count(),
        _ => 0,
    }
}

/// `20·log10(σ₁/σ_m)`, capped at `cap_db`.
pub fn condition_number_db(sv: &[f64], cap_db: f64) -> f64 {
    let (Some(&s1), Some(&sm)) = (sv.first(), sv.last()) else {
        return cap_db;
    };
    if !(s1 > 0.0) || sm <= SVD_ZERO_TOLERANCE * s1 {
        return cap_db;
    }
    (20.0 * (s1 / sm).log10()).clamp(0.0, cap_db)
}

/// `Σ_i log2(1 + (ρ/N_t)·σ_i²)` for one subcarrier.
pub fn se_from_singular_values(sv: &[f64], rho: f64, n_tx: usize) -> f64 {
    let snr = rho / n_tx as f64;
    sv.iter().map(|s| (snr * s * s).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

/// Spectral efficiency averaged over subcarriers, on the channel as given.
pub fn spectral_efficiency(channel: &MimoChannel, rho: f64) -> Result<f64> {
    let mut total = 0.0;
    for h in &channel.h {
        total += se_from_singular_values(&singular_values(h)?, rho, channel.n_tx());
    }
    Ok(total / channel.n_subcarriers() as f64)
}

/// Factor that scales `channel` to `E_k[‖H_k‖_F²] = N_t·N_r`.
pub fn normalization_factor(channel: &MimoChannel) -> Result<f64> {
    normalization_factor_for(&channel.gains(), channel.n_tx(), channel.n_rx())
}

fn normalization_factor_for(gains: &[f64], n_tx: usize, n_rx: usize) -> Result<f64> {
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::InvalidChannel("cannot normalize an all-zero channel".into()));
    }
    Ok(((n_tx * n_rx) as f64 / mean).sqrt())
}

/// Rank, condition number and spectral efficiency of one realization.
pub fn evaluate(channel: &MimoChannel, cfg: &EvalConfig) -> Result<MimoMetrics> {
    evaluate_compact(channel, channel.n_tx(), channel.n_rx(), cfg)
}

/// Like [`evaluate`] for a channel whose matrices have the singular values
/// and Frobenius norms of an `n_rx × n_tx` channel but possibly fewer
/// columns (see [`scaling::compact_cfr`]). Missing singular values are zero.
pub fn evaluate_compact(channel: &MimoChannel, n_tx: usize, n_rx: usize, cfg: &EvalConfig) -> Result<MimoMetrics> {
    cfg.validate()?;
    let m = n_tx.min(n_rx);
    let scale = if cfg.normalize {
        normalization_factor_for(&channel.gains(), n_tx, n_rx)?
    } else {
        1.0
    };
    let n_f = channel.n_subcarriers() as f64;
    let mut rank = 0.0;
    let mut cond = 0.0;
    let mut se = 0.0;
    let mut all_sv = Vec::with_capacity(channel.n_subcarriers());
    for h in &channel.h {
        let mut sv: Vec<f64> = singular_values(h)?.into_iter().map(|s| s * scale).collect();
        sv.resize(m, 0.0);
        rank += effective_rank(&sv, cfg.zeta) as f64;
        cond += condition_number_db(&sv, cfg.cond_cap_db);
        se += se_from_singular_values(&sv, cfg.rho, n_tx);
        all_sv.push(sv);
    }
    Ok(MimoMetrics {
        mean_rank: rank / n_f,
        mean_cond_db: cond / n_f,
        se_bps_hz: se / n_f,
        singular_values: all_sv,
    })
}

/// `Var(g)/E[g]²` with the population variance.
pub fn normalized_variance(gains: &[f64]) -> Result<f64> {
    if gains.len() < 2 {
        return Err(Error::EmptyInput("hardening needs at least two samples"));
    }
    let n = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / n;
    if !(mean > 0.0) {
        return Err(Error::InvalidChannel("hardening of an all-zero channel".into()));
    }
    let var = gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / n;
    Ok(var / (mean * mean))
}

fn hardening_result(eta: f64, n_tx: usize, n_rx: usize) -> HardeningResult {
    HardeningResult {
        eta,
        eta_db: 10.0 * eta.log10(),
        n_tx,
        n_rx,
    }
}

/// Hardening of a single realization with the ensemble formed across
/// subcarriers.
pub fn hardening_across_subcarriers(channel: &MimoChannel) -> Result<HardeningResult> {
    let eta = normalized_variance(&channel.gains())?;
    Ok(hardening_result(eta, channel.n_tx(), channel.n_rx()))
}

/// Hardening over an ensemble of realizations of equal shape: the normalized
/// variance across realizations, per subcarrier, averaged over subcarriers.
pub fn hardening_across_ensemble(channels: &[MimoChannel]) -> Result<HardeningResult> {
    let first = channels
        .first()
        .ok_or(Error::EmptyInput("hardening ensemble is empty"))?;
    check_same_shape(channels)?;
    let gains: Vec<Vec<f64>> = channels.iter().map(|c| c.gains()).collect();
    let n_f = first.n_subcarriers();
    let mut eta = 0.0;
    let mut column = vec![0.0; channels.len()];
    for k in 0..n_f {
        for (c, g) in column.iter_mut().zip(&gains) {
            *c = g[k];
        }
        eta += normalized_variance(&column)?;
    }
    Ok(hardening_result(eta / n_f as f64, first.n_tx(), first.n_rx()))
}

/// Ensemble hardening when more than one realization is given, otherwise the
/// across-subcarrier fallback.
pub fn hardening_metric(channels: &[MimoChannel]) -> Result<HardeningResult> {
    match channels {
        [] => Err(Error::EmptyInput("hardening needs a channel")),
        [single] => hardening_across_subcarriers(single),
        many => hardening_across_ensemble(many),
    }
}

/// Hardened SE `log2(1 + ρ·E[‖H‖_F²])` against the exact
/// `E[log2(1 + ρ·‖H‖_F²)]`, with the same ensemble rule as
/// [`hardening_metric`].
pub fn hardened_se(channels: &[MimoChannel], rho: f64) -> Result<HardenedSe> {
    let first = channels
        .first()
        .ok_or(Error::EmptyInput("hardened SE needs a channel"))?;
    check_same_shape(channels)?;
    let log = |x: f64| (rho * x).ln_1p() / std::f64::consts::LN_2;
    let groups: Vec<Vec<f64>> = if channels.len() == 1 {
        vec![first.gains()]
    } else {
        let gains: Vec<Vec<f64>> = channels.iter().map(|c| c.gains()).collect();
        (0..first.n_subcarriers())
            .map(|k| gains.iter().map(|g| g[k]).collect())
            .collect()
    };
    let mut approx = 0.0;
    let mut exact = 0.0;
    for g in &groups {
        let n = g.len() as f64;
        approx += log(g.iter().sum::<f64>() / n);
        exact += g.iter().map(|&x| log(x)).sum::<f64>() / n;
    }
    let n = groups.len() as f64;
    let (approx, exact) = (approx / n, exact / n);
    Ok(HardenedSe {
        approx,
        exact,
        error: (exact - approx).abs(),
    })
}

fn check_same_shape(channels: &[MimoChannel]) -> Result<()> {
    let first = &channels[0];
    let shape = (first.n_subcarriers(), first.n_rx(), first.n_tx());
    if channels
        .iter()
        .any(|c| (c.n_subcarriers(), c.n_rx(), c.n_tx()) != shape)
    {
        return Err(Error::InvalidChannel("ensemble members differ in shape".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(h: DMatrix<Complex64>) -> MimoChannel {
        MimoChannel::new(vec![h], 3.5e9, 400e3, 400e3).unwrap()
    }

    #[test]
    fn identity_and_rank_one() {
        let eye = DMatrix::<Complex64>::identity(2, 2);
        let sv = singular_values(&eye).unwrap();
        assert!((sv[0] - 1.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);

        let u = DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let v = DMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let sv = singular_values(&(&u * v.adjoint())).unwrap();
        assert!((sv[0] - 2.0).abs() < 1e-12);
        assert!(sv[1].abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut h = DMatrix::<Complex64>::identity(2, 2);
        h[(0, 1)] = c(f64::NAN, 0.0);
        assert!(singular_values(&h).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(effective_rank(&[1.0, 0.5, 1e-4], 1e-3), 2);
        assert_eq!(effective_rank(&[1.0; 4], 0.999), 4);
        assert_eq!(effective_rank(&[1.0, 1e-3], 1e-3), 2);
        assert_eq!(effective_rank(&[0.0, 0.0], 1e-3), 0);
    }

    #[test]
    fn condition_examples() {
        assert!((condition_number_db(&[10.0, 0.1], 60.0) - 40.0).abs() < 1e-12);
        assert_eq!(condition_number_db(&[1.0, 1.0], 60.0), 0.0);
        assert_eq!(condition_number_db(&[1.0, 0.0], 60.0), 60.0);
        assert_eq!(condition_number_db(&[1.0, 1e-13], 60.0), 60.0);
        assert_eq!(condition_number_db(&[1.0, 1e-4], 60.0), 60.0);
    }

    #[test]
    fn se_examples() {
        let scalar = single(DMatrix::from_element(1, 1, c(1.0, 0.0)));
        assert!((spectral_efficiency(&scalar, 100.0).unwrap() - 101f64.log2()).abs() < 1e-12);
        let eye = single(DMatrix::identity(2, 2));
        assert!((spectral_efficiency(&eye, 100.0).unwrap() - 2.0 * 51f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn normalization_reaches_target() {
        let h = DMatrix::from_element(2, 2, c(1e-4, 2e-4));
        let ch = single(h);
        let f = normalization_factor(&ch).unwrap();
        let g = ch.scaled(f).gains()[0];
        assert!((g - 4.0).abs() < 1e-12);
        let zero = single(DMatrix::zeros(2, 2));
        assert!(normalization_factor(&zero).is_err());
    }

    #[test]
    fn evaluate_pads_compact_singular_values() {
        let h = DMatrix::from_element(2, 1, c(1.0, 0.0));
        let ch = single(h);
        let m = evaluate_compact(&ch, 4, 2, &EvalConfig::default()).unwrap();
        assert_eq!(m.singular_values[0].len(), 2);
        assert_eq!(m.mean_rank, 1.0);
        assert_eq!(m.mean_cond_db, 60.0);
    }

    #[test]
    fn flat_channel_has_zero_hardening() {
        let h = DMatrix::from_element(2, 2, c(0.5, 0.5));
        let ch = MimoChannel::new(vec![h; 8], 3.5e9, 3.2e6, 400e3).unwrap();
        let r = hardening_metric(std::slice::from_ref(&ch)).unwrap();
        assert_eq!(r.eta, 0.0);
        let se = hardened_se(&[ch], 100.0).unwrap();
        assert!(se.error < 1e-12);
    }

    #[test]
    fn hardening_errors() {
        let one = single(DMatrix::from_element(2, 2, c(1.0, 0.0)));
        assert!(hardening_metric(std::slice::from_ref(&one)).is_err());
        let zero = MimoChannel::new(vec![DMatrix::zeros(2, 2); 4], 1e9, 1.6e6, 400e3).unwrap();
        assert!(hardening_metric(&[zero]).is_err());
        assert!(hardening_metric(&[]).is_err());
    }

    #[test]
    fn single_subcarrier_hardened_se_is_exact() {
        let one = single(DMatrix::from_element(2, 2, c(0.3, -0.1)));
        let se = hardened_se(&[one], 100.0).unwrap();
        assert_eq!(se.approx, se.exact);
    }

    #[test]
    fn ensemble_hardening_of_two_levels() {
        let mk = |a: f64| MimoChannel::new(vec![DMatrix::from_element(1, 1, c(a, 0.0)); 2], 1e9, 800e3, 400e3).unwrap();
        // gains 1 and 9: mean 5, variance 16, eta 16/25
        let r = hardening_across_ensemble(&[mk(1.0), mk(3.0)]).unwrap();
        assert!((r.eta - 0.64).abs() < 1e-12);
    }
}
