//! Array responses and channel synthesis.
//!
//! Arrays are uniform planar arrays in the local y–z plane with boresight
//! along local +x; elements are indexed row-major (row along z, column along
//! y) and centered on the array origin. Steering phases are evaluated at the
//! carrier only, so the far-field path sum is shared by all subcarriers.

mod export;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use export::{read_channel_csv, write_channel_csv};

use crate::geometry::{Angles, Vec3};
use crate::tracer::Path;
use crate::{wavelength, Error, Result, SPEED_OF_LIGHT};

/// Single-element radiation pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ElementPattern {
    Isotropic,
    /// 3GPP TR 38.901 Table 7.3-1 element.
    #[default]
    Tr38901,
}

impl ElementPattern {
    /// Field amplitude for a direction given in local array coordinates.
    pub fn amplitude(&self, local: &Vec3) -> f64 {
        match self {
            ElementPattern::Isotropic => 1.0,
            ElementPattern::Tr38901 => {
                let zenith = local.z.clamp(-1.0, 1.0).acos().to_degrees();
                let azimuth = local.y.atan2(local.x).to_degrees();
                element_gain_tr38901(zenith, azimuth)
            }
        }
    }
}

const TR38901_MAX_GAIN_DBI: f64 = 8.0;
const TR38901_BEAMWIDTH_DEG: f64 = 65.0;
const TR38901_MAX_ATTENUATION_DB: f64 = 30.0;

/// TR 38.901 element gain in dBi for zenith angle `theta` and azimuth `phi`
/// (degrees, relative to boresight at θ = 90°, φ = 0°).
pub fn element_gain_db_tr38901(theta: f64, phi: f64) -> f64 {
    let phi = (phi + 180.0).rem_euclid(360.0) - 180.0;
    let vertical = (12.0 * ((theta - 90.0) / TR38901_BEAMWIDTH_DEG).powi(2)).min(TR38901_MAX_ATTENUATION_DB);
    let horizontal = (12.0 * (phi / TR38901_BEAMWIDTH_DEG).powi(2)).min(TR38901_MAX_ATTENUATION_DB);
    TR38901_MAX_GAIN_DBI - (vertical + horizontal).min(TR38901_MAX_ATTENUATION_DB)
}

/// TR 38.901 element gain as a linear field amplitude.
pub fn element_gain_tr38901(theta: f64, phi: f64) -> f64 {
    10f64.powf(element_gain_db_tr38901(theta, phi) / 20.0)
}

/// Uniform planar array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    #[serde(default)]
    pub pattern: ElementPattern,
    /// Boresight direction.
    #[serde(default)]
    pub orientation: Angles,
}

impl ArrayConfig {
    /// `rows × cols` array with half-wavelength spacing at `f`, TR 38.901
    /// elements, boresight along +x.
    pub fn upa(rows: usize, cols: usize, f: f64) -> Self {
        Self {
            rows,
            cols,
            spacing: wavelength(f) / 2.0,
            pattern: ElementPattern::Tr38901,
            orientation: Angles::default(),
        }
    }

    pub fn isotropic(rows: usize, cols: usize, f: f64) -> Self {
        Self {
            pattern: ElementPattern::Isotropic,
            ..Self::upa(rows, cols, f)
        }
    }

    pub fn facing(mut self, boresight: Angles) -> Self {
        self.orientation = boresight;
        self
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || !(self.spacing > 0.0) {
            return Err(Error::Config(format!(
                "array {}x{} with spacing {} is invalid",
                self.rows, self.cols, self.spacing
            )));
        }
        Ok(())
    }

    /// Local frame `(boresight, horizontal, vertical)` in global coordinates.
    fn frame(&self) -> [Vec3; 3] {
        let (se, ce) = self.orientation.elevation.sin_cos();
        let (sa, ca) = self.orientation.azimuth.sin_cos();
        let x = Vec3::new(ce * ca, ce * sa, se);
        let y = Vec3::new(-sa, ca, 0.0);
        let z = x.cross(&y);
        [x, y, z]
    }

    /// Element positions relative to the array center, row-major.
    pub fn element_positions(&self) -> Vec<Vec3> {
        let [_, y, z] = self.frame();
        let r0 = (self.rows as f64 - 1.0) / 2.0;
        let c0 = (self.cols as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(y * ((c as f64 - c0) * self.spacing) + z * ((r as f64 - r0) * self.spacing));
            }
        }
        out
    }

    /// Direction in local array coordinates.
    pub fn to_local(&self, direction: &Vec3) -> Vec3 {
        let [x, y, z] = self.frame();
        Vec3::new(direction.dot(&x), direction.dot(&y), direction.dot(&z))
    }

    /// Side length of the populated aperture, `(n − 1)·spacing` on the
    /// longer side.
    pub fn aperture(&self) -> f64 {
        (self.rows.max(self.cols) as f64 - 1.0) * self.spacing
    }
}

/// Array response toward `direction` (pointing away from the array, as for
/// path departure and arrival angles) at frequency `f`.
///
/// Element `n` at `p_n` gets `A(û)·e^{+j2π(f/c)⟨p_n, û⟩}`, which is
/// `e^{−j2π(f/c)⟨p_n, k̂⟩}` in terms of the wave vector direction `k̂ = −û` of
/// a wave arriving from `û`.
pub fn steering_vector(array: &ArrayConfig, direction: Angles, f: f64) -> Vec<Complex64> {
    let u = direction.to_unit();
    let amp = array.pattern.amplitude(&array.to_local(&u));
    let k = 2.0 * PI * f / SPEED_OF_LIGHT;
    array
        .element_positions()
        .iter()
        .map(|p| Complex64::from_polar(amp, k * p.dot(&u)))
        .collect()
}

/// Multi-antenna channel impulse response in factored form.
///
/// The tap for path `l` between Rx element `r` and Tx element `t` is
/// `gains[l]·rx_response[(r, l)]·tx_response[(t, l)]`; all element pairs share
/// the path delays.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub f_c: f64,
    /// Ascending.
    pub delays: Vec<f64>,
    pub gains: Vec<Complex64>,
    pub rx_response: DMatrix<Complex64>,
    pub tx_response: DMatrix<Complex64>,
}

impl Cir {
    pub fn n_rx(&self) -> usize {
        self.rx_response.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.tx_response.nrows()
    }

    pub fn n_taps(&self) -> usize {
        self.delays.len()
    }

    pub fn amplitude(&self, tap: usize, r: usize, t: usize) -> Complex64 {
        self.gains[tap] * self.rx_response[(r, tap)] * self.tx_response[(t, tap)]
    }

    /// `(delay, amplitude)` taps of one element pair.
    pub fn taps(&self, r: usize, t: usize) -> Vec<(f64, Complex64)> {
        (0..self.n_taps())
            .map(|l| (self.delays[l], self.amplitude(l, r, t)))
            .collect()
    }

    /// Tap power averaged over element pairs.
    pub fn tap_power(&self, tap: usize) -> f64 {
        let rx: f64 = self.rx_response.column(tap).iter().map(|c| c.norm_sqr()).sum();
        let tx: f64 = self.tx_response.column(tap).iter().map(|c| c.norm_sqr()).sum();
        self.gains[tap].norm_sqr() * rx * tx / (self.n_rx() * self.n_tx()) as f64
    }
}

/// Builds the CIR of a path list for a Tx/Rx array pair at carrier `f_c`.
pub fn synthesize(paths: &[Path], tx: &ArrayConfig, rx: &ArrayConfig, f_c: f64) -> Result<Cir> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("cannot synthesize a channel without paths"));
    }
    tx.validate()?;
    rx.validate()?;
    let mut order: Vec<usize> = (0..paths.len()).collect();
    order.sort_by(|&a, &b| paths[a].delay.total_cmp(&paths[b].delay));
    let n = paths.len();
    let mut rx_response = DMatrix::zeros(rx.len(), n);
    let mut tx_response = DMatrix::zeros(tx.len(), n);
    let mut delays = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for (col, &i) in order.iter().enumerate() {
        let p = &paths[i];
        if p.delay < 0.0 || !p.delay.is_finite() || !p.gain.is_finite() {
            return Err(Error::InvalidChannel(format!("path {i} has invalid delay or gain")));
        }
        delays.push(p.delay);
        gains.push(p.gain);
        for (r, v) in steering_vector(rx, p.aoa, f_c).into_iter().enumerate() {
            rx_response[(r, col)] = v;
        }
        for (t, v) in steering_vector(tx, p.aod, f_c).into_iter().enumerate() {
            tx_response[(t, col)] = v;
        }
    }
    Ok(Cir {
        f_c,
        delays,
        gains,
        rx_response,
        tx_response,
    })
}

/// Per-subcarrier MIMO channel matrices `H[k]` of shape `N_r × N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoChannel {
    pub h: Vec<DMatrix<Complex64>>,
    pub f_c: f64,
    pub bandwidth: f64,
    pub subcarrier_spacing: f64,
}

impl MimoChannel {
    /// Wraps matrices, checking shapes and finiteness.
    pub fn new(h: Vec<DMatrix<Complex64>>, f_c: f64, bandwidth: f64, subcarrier_spacing: f64) -> Result<Self> {
        let first = h.first().ok_or(Error::EmptyInput("channel has no subcarriers"))?;
        let shape = first.shape();
        if h.iter().any(|m| m.shape() != shape) {
            return Err(Error::InvalidChannel("subcarrier matrices differ in shape".into()));
        }
        if h.iter().flat_map(|m| m.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidChannel("non-finite channel entry".into()));
        }
        Ok(Self {
            h,
            f_c,
            bandwidth,
            subcarrier_spacing,
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.h.len()
    }

    pub fn n_rx(&self) -> usize {
        self.h[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h[0].ncols()
    }

    /// `‖H_k‖_F²` per subcarrier.
    pub fn gains(&self) -> Vec<f64> {
        self.h.iter().map(|m| m.norm_squared()).collect()
    }

    /// Baseband offset of subcarrier `k` from the carrier.
    pub fn subcarrier_offset(&self, k: usize) -> f64 {
        subcarrier_offset(self.bandwidth, self.subcarrier_spacing, k)
    }

    /// Scales every matrix by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            h: self.h.iter().map(|m| m * Complex64::new(factor, 0.0)).collect(),
            ..self.clone()
        }
    }
}

/// Number of subcarriers, `bandwidth / spacing`, which must be a positive
/// integer.
pub fn subcarrier_count(bandwidth: f64, subcarrier_spacing: f64) -> Result<usize> {
    let ratio = bandwidth / subcarrier_spacing;
    let n = ratio.round();
    if !(subcarrier_spacing > 0.0) || !(n >= 1.0) || (ratio - n).abs() > 1e-9 * ratio {
        return Err(Error::Config(format!(
            "bandwidth {bandwidth} Hz is not a positive integer multiple of the {subcarrier_spacing} Hz subcarrier spacing"
        )));
    }
    Ok(n as usize)
}

/// `f_k − f_c = −BW/2 + (k + ½)·Δf`.
pub fn subcarrier_offset(bandwidth: f64, subcarrier_spacing: f64, k: usize) -> f64 {
    -bandwidth / 2.0 + (k as f64 + 0.5) * subcarrier_spacing
}

/// OFDM frequency response of a CIR.
///
/// `H[k] = Σ_l a_l·e^{−j2π(f_k − f_c)τ_l}`. The path gains already carry the
/// carrier phase `e^{−j2πf_cτ_l}`, so only the baseband offset is applied here
/// and the product is the response at the absolute subcarrier frequency.
pub fn cfr(cir: &Cir, bandwidth: f64, subcarrier_spacing: f64) -> Result<MimoChannel> {
    let n_f = subcarrier_count(bandwidth, subcarrier_spacing)?;
    let n_taps = cir.n_taps();
    let tx_t = cir.tx_response.transpose();
    let mut weighted = cir.rx_response.clone();
    let mut h = Vec::with_capacity(n_f);
    for k in 0..n_f {
        let offset = subcarrier_offset(bandwidth, subcarrier_spacing, k);
        for l in 0..n_taps {
            let w = cir.gains[l] * Complex64::from_polar(1.0, -2.0 * PI * offset * cir.delays[l]);
            for r in 0..cir.n_rx() {
                weighted[(r, l)] = cir.rx_response[(r, l)] * w;
            }
        }
        h.push(&weighted * &tx_t);
    }
    MimoChannel::new(h, cir.f_c, bandwidth, subcarrier_spacing)
}

/// Paths → CIR → CFR in one call.
pub fn cfr_from_paths(
    paths: &[Path],
    tx: &ArrayConfig,
    rx: &ArrayConfig,
    f_c: f64,
    bandwidth: f64,
    subcarrier_spacing: f64,
) -> Result<MimoChannel> {
    let cir = synthesize(paths, tx, rx, f_c)?;
    cfr(&cir, bandwidth, subcarrier_spacing)
}

/// Power-delay profile over excess delay.
///
/// Bin `i` collects taps with `i·w ≤ τ − τ_0 < (i + 1)·w`, where `τ_0` is the
/// first arrival; the last bin is open-ended so total power is conserved.
/// Tap power is averaged over element pairs.
pub fn pdp(cir: &Cir, num_bins: usize, bin_width: f64) -> Result<Vec<f64>> {
    if !(bin_width > 0.0) || num_bins == 0 {
        return Err(Error::Config(
            "PDP needs a positive bin width and at least one bin".into(),
        ));
    }
    let mut bins = vec![0.0; num_bins];
    let Some(&first) = cir.delays.first() else {
        return Ok(bins);
    };
    for l in 0..cir.n_taps() {
        // the 1e-9 keeps delays that sit on a bin edge out of the bin below
        let i = (((cir.delays[l] - first) / bin_width + 1e-9).floor() as usize).min(num_bins - 1);
        bins[i] += cir.tap_power(l);
    }
    Ok(bins)
}
