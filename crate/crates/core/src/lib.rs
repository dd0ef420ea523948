//! Site-specific radio channel simulation and MIMO analysis.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! - [`scene`]: triangulated indoor rooms and extruded urban blocks with
//!   frequency-dependent materials and a BVH for ray queries.
//! - [`tracer`]: image-method enumeration of LoS and specular paths (plus an
//!   optional single-bounce diffuse term) and the dynamic-range filter.
//! - [`channel`]: uniform planar arrays, element patterns, CIR synthesis and
//!   OFDM frequency responses.
//! - [`metrics`]: K-factor, RMS delay spread, azimuth spread, MPC counts, CDFs.
//! - [`mimo`]: singular-value metrics, spectral efficiency, channel hardening
//!   and the antenna-scaling sweeps.
//!
//! [`harness`] ties them together into reproducible experiment grids.
//!
//! Time convention throughout is `e^{+jωt}`: lossy permittivities have a
//! negative imaginary part and propagation over a length `L` contributes the
//! phase factor `e^{-j2πfL/c}`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod mimo;
pub mod scene;
pub mod tracer;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Wavelength in meters at frequency `f` (Hz).
pub fn wavelength(f: f64) -> f64 {
    SPEED_OF_LIGHT / f
}
