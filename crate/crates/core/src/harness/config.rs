//! Experiment configuration in TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out/indoor"
//! frequencies_hz = [3.5e9, 7e9, 10e9, 14e9, 20e9, 24e9, 28e9]
//! bandwidths_hz = [25.6e6, 102.4e6]
//! subcarrier_spacing_hz = 400e3
//!
//! [site]
//! kind = "indoor"            # or "urban"; `layout` defaults to the built-in scene
//!
//! [rx]
//! mode = "random"            # or "fixed" with `positions = [[x, y, z], ...]`
//! n = 100
//! height = 1.5
//! margin = 0.3
//!
//! [[arrays]]
//! tx = [2, 2]
//! rx = [2, 2]
//! ```
//!
//! Every table other than `[site]` is optional. See `ExperimentConfig` for
//! the remaining keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{subcarrier_count, ElementPattern};
use crate::geometry::Vec3;
use crate::mimo::scaling::HardeningMode;
use crate::mimo::EvalConfig;
use crate::scene::{IndoorLayout, Material, MaterialLibrary, Scene, UrbanLayout};
use crate::tracer::{TraceConfig, DEFAULT_DYNAMIC_RANGE_DB, DEFAULT_INDOOR_ORDER, DEFAULT_URBAN_ORDER};
use crate::{Error, Result};

pub const DEFAULT_FREQUENCIES_HZ: [f64; 7] = [3.5e9, 7e9, 10e9, 14e9, 20e9, 24e9, 28e9];
pub const DEFAULT_BANDWIDTHS_HZ: [f64; 2] = [25.6e6, 102.4e6];
pub const DEFAULT_SUBCARRIER_SPACING_HZ: f64 = 400e3;
/// Indoor Tx of the built-in laboratory.
pub const INDOOR_TX: [f64; 3] = [4.8, 2.4, 1.0];
/// Urban Tx of the built-in district, at rooftop base-station height.
pub const URBAN_TX: [f64; 3] = [-14.0, -6.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SiteConfig {
    Indoor {
        #[serde(default = "IndoorLayout::lab")]
        layout: IndoorLayout,
    },
    Urban {
        #[serde(default = "UrbanLayout::district")]
        layout: UrbanLayout,
    },
}

impl SiteConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SiteConfig::Indoor { .. } => "indoor",
            SiteConfig::Urban { .. } => "urban",
        }
    }

    pub fn build(&self, library: &MaterialLibrary) -> Result<Scene> {
        match self {
            SiteConfig::Indoor { layout } => Scene::indoor(layout, library),
            SiteConfig::Urban { layout } => Scene::urban(layout, library),
        }
    }

    pub fn default_tx(&self) -> [f64; 3] {
        match self {
            SiteConfig::Indoor { .. } => INDOOR_TX,
            SiteConfig::Urban { .. } => URBAN_TX,
        }
    }

    pub fn default_order(&self) -> usize {
        match self {
            SiteConfig::Indoor { .. } => DEFAULT_INDOOR_ORDER,
            SiteConfig::Urban { .. } => DEFAULT_URBAN_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum RxMode {
    Fixed {
        positions: Vec<[f64; 3]>,
    },
    Random {
        n: usize,
        /// Placement seed; derived from the master seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default = "default_rx_height")]
        height: f64,
        /// Minimum horizontal clearance from walls, obstacles and buildings.
        #[serde(default = "default_rx_margin")]
        margin: f64,
    },
}

fn default_rx_height() -> f64 {
    1.5
}

fn default_rx_margin() -> f64 {
    0.3
}

impl Default for RxMode {
    fn default() -> Self {
        RxMode::Random {
            n: 100,
            seed: None,
            height: default_rx_height(),
            margin: default_rx_margin(),
        }
    }
}

impl RxMode {
    pub fn len(&self) -> usize {
        match self {
            RxMode::Fixed { positions } => positions.len(),
            RxMode::Random { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Tx/Rx UPA sizes as `[rows, cols]`, half-wavelength spacing at each
/// carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayPair {
    pub tx: [usize; 2],
    pub rx: [usize; 2],
    #[serde(default)]
    pub pattern: ElementPattern,
}

impl ArrayPair {
    pub fn label(&self) -> String {
        format!("{}x{}/{}x{}", self.tx[0], self.tx[1], self.rx[0], self.rx[1])
    }
}

fn default_arrays() -> Vec<ArrayPair> {
    vec![ArrayPair {
        tx: [2, 2],
        rx: [2, 2],
        pattern: ElementPattern::Tr38901,
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSettings {
    /// Site default (5 indoor, 3 urban) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_reflection_order: Option<usize>,
    pub dynamic_range_db: f64,
    pub enable_diffuse: bool,
    pub diffuse_samples_per_facet: usize,
    pub lambert_exponent: f64,
    pub surface_roughness_m: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        let base = TraceConfig::new(0, 1e9);
        Self {
            max_reflection_order: None,
            dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
            enable_diffuse: base.enable_diffuse,
            diffuse_samples_per_facet: base.diffuse_samples_per_facet,
            lambert_exponent: base.lambert_exponent,
            surface_roughness_m: base.surface_roughness_m,
        }
    }
}

/// Settings of the `sweep-count` and `sweep-aperture` studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Tx elements per side for the fixed-count sweep.
    pub tx_sizes: Vec<usize>,
    /// Tx aperture side lengths (m) for the fixed-aperture sweep.
    pub apertures_m: Vec<f64>,
    pub rx_array: [usize; 2],
    /// The first this many Rx positions are used.
    pub locations: usize,
    pub bandwidth_hz: f64,
    pub hardening: HardeningMode,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            tx_sizes: (2..=15).collect(),
            apertures_m: vec![0.1, 0.2, 0.3],
            rx_array: [3, 3],
            locations: 20,
            bandwidth_hz: 25.6e6,
            hardening: HardeningMode::Subcarriers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads, `0` for all cores. Does not affect results.
    #[serde(default)]
    pub workers: usize,
    pub site: SiteConfig,
    /// Site default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_position: Option<[f64; 3]>,
    #[serde(default)]
    pub rx: RxMode,
    #[serde(default = "default_frequencies")]
    pub frequencies_hz: Vec<f64>,
    #[serde(default = "default_bandwidths")]
    pub bandwidths_hz: Vec<f64>,
    #[serde(default = "default_subcarrier_spacing")]
    pub subcarrier_spacing_hz: f64,
    #[serde(default = "default_arrays")]
    pub arrays: Vec<ArrayPair>,
    #[serde(default)]
    pub trace: TraceSettings,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepSettings,
    /// Materials added to (or replacing) the built-in library.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub materials: Vec<Material>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_frequencies() -> Vec<f64> {
    DEFAULT_FREQUENCIES_HZ.to_vec()
}

fn default_bandwidths() -> Vec<f64> {
    DEFAULT_BANDWIDTHS_HZ.to_vec()
}

fn default_subcarrier_spacing() -> f64 {
    DEFAULT_SUBCARRIER_SPACING_HZ
}

impl ExperimentConfig {
    /// Defaults for a site: seven carriers from 3.5 to 28 GHz, two bandwidths, 100 random Rx,
    /// one 2×2/2×2 array pair.
    pub fn new(site: SiteConfig) -> Self {
        Self {
            seed: 0,
            output_dir: default_output_dir(),
            workers: 0,
            site,
            tx_position: None,
            rx: RxMode::default(),
            frequencies_hz: default_frequencies(),
            bandwidths_hz: default_bandwidths(),
            subcarrier_spacing_hz: default_subcarrier_spacing(),
            arrays: default_arrays(),
            trace: TraceSettings::default(),
            eval: EvalConfig::default(),
            sweep: SweepSettings::default(),
            materials: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        // TOML integers are signed 64-bit
        let seed_limit = i64::MAX as u64;
        if self.seed > seed_limit {
            return err(format!("seed {} exceeds {seed_limit}", self.seed));
        }
        if let RxMode::Random { seed: Some(s), .. } = self.rx {
            if s > seed_limit {
                return err(format!("placement seed {s} exceeds {seed_limit}"));
            }
        }
        if self.rx.is_empty() {
            return err("at least one Rx position is required".into());
        }
        if let RxMode::Random { height, margin, .. } = self.rx {
            if !(height > 0.0 && height.is_finite()) || !(margin >= 0.0) {
                return err("Rx height must be positive and margin non-negative".into());
            }
        }
        if self.frequencies_hz.is_empty() || self.bandwidths_hz.is_empty() || self.arrays.is_empty() {
            return err("frequencies, bandwidths and arrays must be non-empty".into());
        }
        for &f in &self.frequencies_hz {
            if !(1e9..=100e9).contains(&f) {
                return err(format!("frequency {f} Hz is outside 1–100 GHz"));
            }
        }
        for &bw in &self.bandwidths_hz {
            subcarrier_count(bw, self.subcarrier_spacing_hz)?;
        }
        subcarrier_count(self.sweep.bandwidth_hz, self.subcarrier_spacing_hz)?;
        for a in &self.arrays {
            if a.tx.contains(&0) || a.rx.contains(&0) {
                return err(format!("array pair {} has an empty side", a.label()));
            }
        }
        if self.sweep.rx_array.contains(&0) || self.sweep.locations == 0 {
            return err("sweep Rx array and location count must be positive".into());
        }
        if !(self.trace.dynamic_range_db > 0.0) {
            return err("dynamic_range_db must be positive".into());
        }
        self.eval.validate()?;
        for m in &self.materials {
            m.validate()?;
        }
        Ok(())
    }

    pub fn library(&self) -> Result<MaterialLibrary> {
        let mut lib = MaterialLibrary::builtin();
        for m in &self.materials {
            lib.insert(m.clone())?;
        }
        Ok(lib)
    }

    pub fn scene(&self) -> Result<Scene> {
        self.site.build(&self.library()?)
    }

    pub fn tx(&self) -> Vec3 {
        let p = self.tx_position.unwrap_or_else(|| self.site.default_tx());
        Vec3::new(p[0], p[1], p[2])
    }

    /// Trace configuration for one link; `frequency` is overwritten per
    /// carrier by the caller.
    pub fn trace_config(&self, seed: u64) -> TraceConfig {
        TraceConfig {
            max_reflection_order: self
                .trace
                .max_reflection_order
                .unwrap_or_else(|| self.site.default_order()),
            dynamic_range_db: self.trace.dynamic_range_db,
            enable_diffuse: self.trace.enable_diffuse,
            diffuse_samples_per_facet: self.trace.diffuse_samples_per_facet,
            frequency: self.frequencies_hz[0],
            seed,
            lambert_exponent: self.trace.lambert_exponent,
            surface_roughness_m: self.trace.surface_roughness_m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("[site]\nkind = \"indoor\"\n").unwrap();
        assert_eq!(cfg.frequencies_hz, DEFAULT_FREQUENCIES_HZ.to_vec());
        assert_eq!(cfg.bandwidths_hz, DEFAULT_BANDWIDTHS_HZ.to_vec());
        assert_eq!(cfg.rx.len(), 100);
        assert_eq!(
            cfg.site,
            SiteConfig::Indoor {
                layout: IndoorLayout::lab()
            }
        );
        assert_eq!(cfg.trace_config(0).max_reflection_order, 5);
        assert_eq!(cfg.tx(), Vec3::new(4.8, 2.4, 1.0));
        assert_eq!(cfg.eval, EvalConfig::default());
    }

    #[test]
    fn round_trip() {
        for site in [
            SiteConfig::Indoor {
                layout: IndoorLayout::lab(),
            },
            SiteConfig::Urban {
                layout: UrbanLayout::district(),
            },
        ] {
            let mut cfg = ExperimentConfig::new(site);
            cfg.seed = 42;
            cfg.rx = RxMode::Fixed {
                positions: vec![[1.0, 2.0, 1.5]],
            };
            cfg.materials.push(Material::new("tile", 4.0, 0.0, 0.01, 0.5));
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let base = "[site]\nkind = \"indoor\"\n";
        for extra in [
            "frequencies_hz = [0.5e9]\n",
            "bandwidths_hz = [1e6]\nsubcarrier_spacing_hz = 300e3\n",
            "[rx]\nmode = \"random\"\nn = 0\n",
            "[[arrays]]\ntx = [0, 2]\nrx = [2, 2]\n",
            "[eval]\nzeta = 2.0\n",
        ] {
            let text = format!("{extra}{base}");
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{extra}");
        }
        assert!(ExperimentConfig::from_toml("[site]\nkind = \"moon\"\n").is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        for text in [
            "sead = 3\n[site]\nkind = \"indoor\"\n",
            "[site]\nkind = \"indoor\"\nbandwidths_hz = [1e6]\n",
            "[site]\nkind = \"urban\"\n[trace]\nmax_order = 2\n",
            "[site]\nkind = \"urban\"\n[eval]\nsnr = 2\n",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
