//! Frequency-dependent materials and Fresnel reflection.
//!
//! Relative permittivity and conductivity follow two power laws in frequency
//! (GHz): `ε' = a·f^b` and `σ = c·f^d` (S/m). The complex relative
//! permittivity is `ε = ε' − jσ/(2πfε₀)` under the `e^{+jωt}` convention.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, VACUUM_PERMITTIVITY};

/// Lowest frequency accepted by [`Material::complex_permittivity`].
pub const MIN_MATERIAL_FREQ_HZ: f64 = 1e9;
/// Highest frequency accepted by [`Material::complex_permittivity`].
pub const MAX_MATERIAL_FREQ_HZ: f64 = 100e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Permittivity law coefficient.
    pub a: f64,
    /// Permittivity law exponent.
    pub b: f64,
    /// Conductivity law coefficient (S/m).
    pub c: f64,
    /// Conductivity law exponent.
    pub d: f64,
    /// Fraction of the reflected field diverted to diffuse scattering.
    #[serde(default)]
    pub scattering_coefficient: f64,
}

impl Material {
    pub fn new(name: &str, a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            name: name.to_string(),
            a,
            b,
            c,
            d,
            scattering_coefficient: 0.0,
        }
    }

    pub fn with_scattering(mut self, s: f64) -> Self {
        self.scattering_coefficient = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a > 0.0
            && self.c >= 0.0
            && (0.0..=1.0).contains(&self.scattering_coefficient)
            && [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!(
                "material `{}` has invalid constants (need a > 0, c >= 0, 0 <= s <= 1)",
                self.name
            )))
        }
    }

    /// Conductivity in S/m at `f` Hz.
    pub fn conductivity(&self, f: f64) -> f64 {
        self.c * (f / 1e9).powf(self.d)
    }

    /// Complex relative permittivity at `f` Hz.
    pub fn complex_permittivity(&self, f: f64) -> Result<Complex64> {
        if !(MIN_MATERIAL_FREQ_HZ..=MAX_MATERIAL_FREQ_HZ).contains(&f) {
            return Err(Error::FrequencyOutOfRange(f));
        }
        let f_ghz = f / 1e9;
        let real = self.a * f_ghz.powf(self.b);
        let imag = self.conductivity(f) / (2.0 * PI * f * VACUUM_PERMITTIVITY);
        Ok(Complex64::new(real, -imag))
    }
}

/// Field polarization relative to the plane of incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// Electric field perpendicular to the plane of incidence.
    Te,
    /// Electric field in the plane of incidence.
    Tm,
}

/// Fresnel reflection coefficient for a wave in vacuum hitting a half-space
/// of relative permittivity `eps` at `incidence` radians from the normal.
///
/// Both coefficients use the same transverse reference so that they agree at
/// normal incidence, `(1 − √ε)/(1 + √ε)`. The TM coefficient vanishes at the
/// Brewster angle of a lossless medium.
pub fn fresnel_reflection(eps: Complex64, incidence: f64, pol: Polarization) -> Complex64 {
    let (sin_t, cos_t) = incidence.sin_cos();
    let cos_t = cos_t.max(0.0);
    let root = (eps - sin_t * sin_t).sqrt();
    match pol {
        Polarization::Te => (cos_t - root) / (cos_t + root),
        Polarization::Tm => (root - eps * cos_t) / (root + eps * cos_t),
    }
}

/// Named materials with ITU-R P.2040 power-law constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialLibrary {
    materials: BTreeMap<String, Material>,
}

impl Default for MaterialLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl MaterialLibrary {
    /// The built-in table: the seven indoor materials (glass, plasterboard,
    /// wood, metal, plywood, ceiling board, concrete) and the two extra urban
    /// facade materials (brick, marble).
    pub fn builtin() -> Self {
        let list = [
            Material::new("concrete", 5.24, 0.0, 0.0462, 0.7822),
            Material::new("brick", 3.91, 0.0, 0.0238, 0.16),
            Material::new("plasterboard", 2.73, 0.0, 0.0085, 0.9395),
            Material::new("wood", 1.99, 0.0, 0.0047, 1.0718),
            Material::new("glass", 6.31, 0.0, 0.0036, 1.3394),
            Material::new("ceiling_board", 1.48, 0.0, 0.0011, 1.0750),
            Material::new("plywood", 2.71, 0.0, 0.33, 0.0),
            Material::new("marble", 7.074, 0.0, 0.0055, 0.9262),
            Material::new("metal", 1.0, 0.0, 1e7, 0.0),
        ];
        Self {
            materials: list.into_iter().map(|m| (m.name.clone(), m)).collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            materials: BTreeMap::new(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&Material> {
        self.materials
            .get(name)
            .ok_or_else(|| Error::InvalidScene(format!("unknown material `{name}`")))
    }

    /// Adds or replaces a material.
    pub fn insert(&mut self, m: Material) -> Result<()> {
        m.validate()?;
        self.materials.insert(m.name.clone(), m);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.materials.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.materials.values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless(eps: f64) -> Material {
        Material::new("test", eps, 0.0, 0.0, 0.0)
    }

    #[test]
    fn lossless_permittivity_is_real() {
        for f in [1e9, 3.5e9, 28e9, 100e9] {
            let e = lossless(4.0).complex_permittivity(f).unwrap();
            assert_eq!(e, Complex64::new(4.0, 0.0));
        }
    }

    #[test]
    fn concrete_at_10ghz() {
        // ε'' = σ/(2π f ε₀) with σ = 0.0462·10^0.7822, evaluated by hand
        let sigma = 0.0462 * 10f64.powf(0.7822);
        let expected_imag = sigma / (2.0 * PI * 10e9 * 8.854_187_812_8e-12);
        assert!((expected_imag - 0.503).abs() < 1e-3);
        let lib = MaterialLibrary::builtin();
        let e = lib.get("concrete").unwrap().complex_permittivity(10e9).unwrap();
        assert!((e.re - 5.24).abs() < 1e-12);
        assert!((e.im + expected_imag).abs() < 1e-12);
    }

    #[test]
    fn metal_is_huge() {
        let lib = MaterialLibrary::builtin();
        let e = lib.get("metal").unwrap().complex_permittivity(3.5e9).unwrap();
        assert!(e.norm() > 1e6);
    }

    #[test]
    fn out_of_range_frequency() {
        let m = lossless(4.0);
        assert!(matches!(
            m.complex_permittivity(0.5e9),
            Err(Error::FrequencyOutOfRange(_))
        ));
        assert!(m.complex_permittivity(150e9).is_err());
    }

    #[test]
    fn normal_incidence_lossless() {
        let eps = Complex64::new(4.0, 0.0);
        for pol in [Polarization::Te, Polarization::Tm] {
            let g = fresnel_reflection(eps, 0.0, pol);
            assert!((g - Complex64::new(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn pec_limit_te() {
        let eps = Complex64::new(1.0, -1e12);
        for deg in [0.0f64, 30.0, 60.0, 85.0] {
            let g = fresnel_reflection(eps, deg.to_radians(), Polarization::Te);
            assert!((g + 1.0).norm() < 1e-3, "{deg}: {g}");
        }
    }

    #[test]
    fn grazing_limit() {
        let eps = Complex64::new(5.24, -0.5);
        let angle = std::f64::consts::FRAC_PI_2 - 1e-7;
        for pol in [Polarization::Te, Polarization::Tm] {
            let g = fresnel_reflection(eps, angle, pol);
            assert!((g.norm() - 1.0).abs() < 1e-5, "{pol:?}: {g}");
        }
    }

    #[test]
    fn brewster_null() {
        for eps in [2.0, 4.0, 6.31, 10.0] {
            let angle = f64::sqrt(eps).atan();
            let g = fresnel_reflection(Complex64::new(eps, 0.0), angle, Polarization::Tm);
            assert!(g.norm() < 1e-9, "eps {eps}: {g}");
        }
    }

    #[test]
    fn builtin_table_is_valid() {
        let lib = MaterialLibrary::builtin();
        assert_eq!(lib.names().count(), 9);
        for m in lib.iter() {
            m.validate().unwrap();
        }
    }
}
