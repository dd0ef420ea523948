//! Image-method path enumeration between two points.
//!
//! Tracing is split in two stages. [`trace_geometry`] finds the geometric
//! paths (LoS, specular chains up to the configured order, optional diffuse
//! samples); this depends only on the scene and the endpoints. Each
//! [`PathGeometry`] is then evaluated at a carrier frequency to obtain its
//! complex gain, and [`dynamic_range_filter`] drops paths that are too weak
//! relative to the strongest one.
//!
//! Specular chains are enumerated over reflecting planes (coplanar facets
//! merged), so a wall made of two triangles yields one image per sequence.
//! The Tx image after `k` reflections must lie in front of reflecting plane
//! `k + 1`; sequences that repeat a plane back to back are skipped.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{reflect_point, Angles, Vec3};
use crate::harness::seed::derive_seed;
use crate::scene::{fresnel_reflection, Polarization, Scene, SURFACE_EPSILON};
use crate::{wavelength, Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Los,
    /// Specular chain with the given number of reflections.
    Specular(usize),
    /// Single-bounce diffuse scattering from a sample point.
    Diffuse,
}

impl PathKind {
    pub fn order(&self) -> usize {
        match self {
            PathKind::Los => 0,
            PathKind::Specular(k) => *k,
            PathKind::Diffuse => 1,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PathKind::Los => "los",
            PathKind::Specular(_) => "specular",
            PathKind::Diffuse => "diffuse",
        }
    }
}

/// One resolved multipath component at a given frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    /// Propagation delay, `length / c`.
    pub delay: f64,
    /// Field amplitude referenced to isotropic antennas.
    pub gain: Complex64,
    /// Departure direction at the transmitter.
    pub aod: Angles,
    /// Arrival direction at the receiver, pointing from the receiver toward
    /// the last interaction (or the transmitter).
    pub aoa: Angles,
    /// Facet ids in interaction order.
    pub interactions: Vec<usize>,
    pub length: f64,
}

impl Path {
    pub fn power(&self) -> f64 {
        self.gain.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub max_reflection_order: usize,
    /// Paths weaker than the strongest by more than this are dropped.
    /// `f64::INFINITY` disables the cut.
    pub dynamic_range_db: f64,
    #[serde(default)]
    pub enable_diffuse: bool,
    #[serde(default = "default_diffuse_samples")]
    pub diffuse_samples_per_facet: usize,
    /// Carrier frequency (Hz) used by [`trace`].
    pub frequency: f64,
    /// Seed for diffuse sample placement.
    #[serde(default)]
    pub seed: u64,
    /// Exponent applied to the incidence and scattering cosines.
    #[serde(default = "default_lambert_exponent")]
    pub lambert_exponent: f64,
    /// RMS surface height (m) for the Rayleigh roughness attenuation of
    /// specular reflections when diffuse scattering is on.
    #[serde(default)]
    pub surface_roughness_m: f64,
}

fn default_diffuse_samples() -> usize {
    16
}

fn default_lambert_exponent() -> f64 {
    1.0
}

pub const DEFAULT_DYNAMIC_RANGE_DB: f64 = 40.0;
pub const DEFAULT_INDOOR_ORDER: usize = 5;
pub const DEFAULT_URBAN_ORDER: usize = 3;

impl TraceConfig {
    pub fn new(max_reflection_order: usize, frequency: f64) -> Self {
        Self {
            max_reflection_order,
            dynamic_range_db: DEFAULT_DYNAMIC_RANGE_DB,
            enable_diffuse: false,
            diffuse_samples_per_facet: default_diffuse_samples(),
            frequency,
            seed: 0,
            lambert_exponent: default_lambert_exponent(),
            surface_roughness_m: 0.0,
        }
    }

    pub fn indoor(frequency: f64) -> Self {
        Self::new(DEFAULT_INDOOR_ORDER, frequency)
    }

    pub fn urban(frequency: f64) -> Self {
        Self::new(DEFAULT_URBAN_ORDER, frequency)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dynamic_range_db > 0.0) {
            return Err(Error::Config("dynamic_range_db must be > 0".into()));
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::Config("frequency must be positive".into()));
        }
        if self.surface_roughness_m < 0.0 || self.lambert_exponent < 0.0 {
            return Err(Error::Config(
                "roughness and Lambert exponent must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Frequency-independent description of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGeometry {
    pub kind: PathKind,
    /// Tx, interaction points in order, Rx.
    pub points: Vec<Vec3>,
    pub interactions: Vec<usize>,
    pub length: f64,
    /// Diffuse only: `√(ΔA·(cosθ_i·cosθ_s)^α/π)`, in meters.
    pub diffuse_weight: f64,
}

impl PathGeometry {
    fn departure(&self) -> Vec3 {
        (self.points[1] - self.points[0]).normalize()
    }

    fn arrival(&self) -> Vec3 {
        let n = self.points.len();
        (self.points[n - 2] - self.points[n - 1]).normalize()
    }

    /// Complex gain and angles at frequency `f`.
    pub fn evaluate(&self, scene: &Scene, f: f64, cfg: &TraceConfig) -> Result<Path> {
        let lambda = wavelength(f);
        let k = 2.0 * PI / lambda;
        let phase = Complex64::from_polar(1.0, -k * self.length);
        let gain = match self.kind {
            PathKind::Los => phase * (lambda / (4.0 * PI * self.length)),
            PathKind::Specular(_) => {
                let mut coeff = Complex64::new(1.0, 0.0);
                for (i, &facet) in self.interactions.iter().enumerate() {
                    let incoming = (self.points[i + 1] - self.points[i]).normalize();
                    let normal = scene.facets[facet].normal;
                    let material = scene.material_of(facet);
                    let eps = material.complex_permittivity(f)?;
                    let mut g = vertical_reflection(eps, &incoming, &normal);
                    if cfg.enable_diffuse {
                        let s = material.scattering_coefficient;
                        let cos_i = -incoming.dot(&normal);
                        let rough = k * cfg.surface_roughness_m * cos_i;
                        g *= (1.0 - s * s).sqrt() * (-2.0 * rough * rough).exp();
                    }
                    coeff *= g;
                }
                phase * coeff * (lambda / (4.0 * PI * self.length))
            }
            PathKind::Diffuse => {
                let facet = self.interactions[0];
                let material = scene.material_of(facet);
                let eps = material.complex_permittivity(f)?;
                let r0 = fresnel_reflection(eps, 0.0, Polarization::Te).norm();
                let d1 = (self.points[1] - self.points[0]).norm();
                let d2 = (self.points[2] - self.points[1]).norm();
                phase * (material.scattering_coefficient * r0 * self.diffuse_weight * lambda / (4.0 * PI * d1 * d2))
            }
        };
        Ok(Path {
            kind: self.kind,
            delay: self.length / SPEED_OF_LIGHT,
            gain,
            aod: Angles::from_direction(&self.departure()),
            aoa: Angles::from_direction(&self.arrival()),
            interactions: self.interactions.clone(),
            length: self.length,
        })
    }
}

/// Reflection coefficient seen by a vertically polarized field hitting a
/// plane with unit normal `normal` along unit direction `incoming`.
///
/// The vertical field is projected onto the local TE/TM basis and the two
/// Fresnel coefficients are mixed by the squared projections.
pub fn vertical_reflection(eps: Complex64, incoming: &Vec3, normal: &Vec3) -> Complex64 {
    let cos_i = (-incoming.dot(normal)).clamp(0.0, 1.0);
    let theta = cos_i.acos();
    let te = fresnel_reflection(eps, theta, Polarization::Te);
    let tm = fresnel_reflection(eps, theta, Polarization::Tm);
    let z = Vec3::z();
    let e = z - incoming * z.dot(incoming);
    let s = incoming.cross(normal);
    if e.norm() < 1e-9 || s.norm() < 1e-9 {
        return te;
    }
    let a_te = e.normalize().dot(&s.normalize());
    let w_te = (a_te * a_te).min(1.0);
    te * w_te + tm * (1.0 - w_te)
}

/// `true` iff some facet crosses the open segment between the endpoints.
pub fn los_blocked(scene: &Scene, tx: &Vec3, rx: &Vec3) -> bool {
    scene.segment_blocked(tx, rx)
}

/// Enumerates geometric paths between `tx` and `rx`.
pub fn trace_geometry(scene: &Scene, tx: &Vec3, rx: &Vec3, cfg: &TraceConfig) -> Result<Vec<PathGeometry>> {
    if (tx - rx).norm() < 1e-9 {
        return Err(Error::InvalidEndpoint("Tx and Rx coincide".into()));
    }
    scene.validate_point(tx).map_err(|e| e.context("transmitter"))?;
    scene.validate_point(rx).map_err(|e| e.context("receiver"))?;

    let mut out = Vec::new();
    if !scene.segment_blocked(tx, rx) {
        out.push(PathGeometry {
            kind: PathKind::Los,
            points: vec![*tx, *rx],
            interactions: Vec::new(),
            length: (rx - tx).norm(),
            diffuse_weight: 0.0,
        });
    }
    if cfg.max_reflection_order > 0 {
        let mut search = ImageSearch {
            scene,
            tx: *tx,
            rx: *rx,
            max_order: cfg.max_reflection_order,
            out: &mut out,
        };
        let mut seq = Vec::with_capacity(cfg.max_reflection_order);
        let mut images = Vec::with_capacity(cfg.max_reflection_order);
        search.descend(&mut seq, &mut images);
    }
    if cfg.enable_diffuse {
        diffuse_geometry(scene, tx, rx, cfg, &mut out);
    }
    Ok(out)
}

/// Full trace at `cfg.frequency`: geometry, gains, dynamic-range cut.
/// Paths are returned sorted by delay.
pub fn trace(scene: &Scene, tx: &Vec3, rx: &Vec3, cfg: &TraceConfig) -> Result<Vec<Path>> {
    cfg.validate()?;
    let geometry = trace_geometry(scene, tx, rx, cfg)?;
    paths_at(scene, &geometry, cfg.frequency, cfg)
}

/// Evaluates precomputed geometry at `f` and applies the dynamic-range cut.
pub fn paths_at(scene: &Scene, geometry: &[PathGeometry], f: f64, cfg: &TraceConfig) -> Result<Vec<Path>> {
    let mut paths = geometry
        .iter()
        .map(|g| g.evaluate(scene, f, cfg))
        .collect::<Result<Vec<_>>>()?;
    paths.retain(|p| p.gain.norm_sqr() > 0.0 && p.gain.is_finite());
    if paths.is_empty() {
        return Err(Error::NoPaths);
    }
    let mut paths = dynamic_range_filter(paths, cfg.dynamic_range_db)?;
    sort_paths(&mut paths);
    Ok(paths)
}

/// Sorts by delay, then kind, then interaction sequence.
pub fn sort_paths(paths: &mut [Path]) {
    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.kind.cmp(&b.kind))
            .then_with(|| a.interactions.cmp(&b.interactions))
    });
}

/// Keeps path `i` iff `10·log10(P_max/P_i) ≤ dynamic_range_db`.
///
/// The boundary is inclusive, with a 1e-9 dB allowance for round-off in the
/// power ratio.
pub fn dynamic_range_filter(paths: Vec<Path>, dynamic_range_db: f64) -> Result<Vec<Path>> {
    if paths.is_empty() {
        return Err(Error::EmptyInput("dynamic-range filter needs at least one path"));
    }
    let p_max = paths.iter().map(Path::power).fold(0.0, f64::max);
    if dynamic_range_db.is_infinite() {
        return Ok(paths);
    }
    Ok(paths
        .into_iter()
        .filter(|p| {
            let p_i = p.power();
            p_i >= p_max || 10.0 * (p_max / p_i).log10() <= dynamic_range_db + 1e-9
        })
        .collect())
}

struct ImageSearch<'a> {
    scene: &'a Scene,
    tx: Vec3,
    rx: Vec3,
    max_order: usize,
    out: &'a mut Vec<PathGeometry>,
}

impl ImageSearch<'_> {
    fn descend(&mut self, seq: &mut Vec<usize>, images: &mut Vec<Vec3>) {
        let surfaces = self.scene.surfaces();
        for (s, surf) in surfaces.iter().enumerate() {
            if seq.last() == Some(&s) {
                continue;
            }
            let source = images.last().copied().unwrap_or(self.tx);
            if surf.signed_distance(&source) <= SURFACE_EPSILON {
                continue;
            }
            let image = reflect_point(&source, &surf.normal, surf.offset);
            seq.push(s);
            images.push(image);
            if let Some(path) = self.validate(seq, images) {
                self.out.push(path);
            }
            if seq.len() < self.max_order {
                self.descend(seq, images);
            }
            seq.pop();
            images.pop();
        }
    }

    /// Unfolds the chain backward from the receiver and checks every
    /// reflection point and segment.
    fn validate(&self, seq: &[usize], images: &[Vec3]) -> Option<PathGeometry> {
        let surfaces = self.scene.surfaces();
        let k = seq.len();
        let mut points = vec![Vec3::zeros(); k + 2];
        let mut facets = vec![0usize; k];
        points[0] = self.tx;
        points[k + 1] = self.rx;
        let mut next = self.rx;
        for i in (0..k).rev() {
            let surf = &surfaces[seq[i]];
            let image = images[i];
            let dn = surf.signed_distance(&next);
            if dn <= SURFACE_EPSILON {
                return None;
            }
            let di = surf.signed_distance(&image);
            let t = dn / (dn - di);
            if !(t > 0.0 && t < 1.0) {
                return None;
            }
            let p = next + (image - next) * t;
            let facet = surf
                .facets
                .iter()
                .copied()
                .find(|&f| self.scene.facets[f].contains_coplanar(&p))?;
            points[i + 1] = p;
            facets[i] = facet;
            next = p;
        }
        for w in points.windows(2) {
            if self.scene.segment_blocked(&w[0], &w[1]) {
                return None;
            }
        }
        Some(PathGeometry {
            kind: PathKind::Specular(k),
            points,
            interactions: facets,
            length: (self.rx - images[k - 1]).norm(),
            diffuse_weight: 0.0,
        })
    }
}

fn diffuse_geometry(scene: &Scene, tx: &Vec3, rx: &Vec3, cfg: &TraceConfig, out: &mut Vec<PathGeometry>) {
    let n = cfg.diffuse_samples_per_facet;
    if n == 0 {
        return;
    }
    for (id, facet) in scene.facets.iter().enumerate() {
        let s = scene.material_of(id).scattering_coefficient;
        if s <= 0.0 {
            continue;
        }
        let d = facet.offset();
        if facet.normal.dot(tx) - d <= SURFACE_EPSILON || facet.normal.dot(rx) - d <= SURFACE_EPSILON {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xD1FF, id as u64));
        let cell = facet.area() / n as f64;
        let [a, b, c] = facet.vertices;
        for _ in 0..n {
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            let q = a + (b - a) * u + (c - a) * v;
            if scene.segment_blocked(tx, &q) || scene.segment_blocked(&q, rx) {
                continue;
            }
            let d1 = (q - tx).norm();
            let d2 = (rx - q).norm();
            let cos_i = facet.normal.dot(&(tx - q)) / d1;
            let cos_s = facet.normal.dot(&(rx - q)) / d2;
            let weight = (cell * (cos_i * cos_s).powf(cfg.lambert_exponent) / PI).sqrt();
            out.push(PathGeometry {
                kind: PathKind::Diffuse,
                points: vec![*tx, q, *rx],
                interactions: vec![id],
                length: d1 + d2,
                diffuse_weight: weight,
            });
        }
    }
}

/// One CSV row of the path export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub kind: String,
    pub order: usize,
    pub delay_s: f64,
    pub gain_re: f64,
    pub gain_im: f64,
    pub aod_az: f64,
    pub aod_el: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Facet ids joined by `;`.
    pub facets: String,
}

impl From<&Path> for PathRecord {
    fn from(p: &Path) -> Self {
        Self {
            kind: p.kind.label().to_string(),
            order: p.kind.order(),
            delay_s: p.delay,
            gain_re: p.gain.re,
            gain_im: p.gain.im,
            aod_az: p.aod.azimuth,
            aod_el: p.aod.elevation,
            aoa_az: p.aoa.azimuth,
            aoa_el: p.aoa.elevation,
            facets: p
                .interactions
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

impl PathRecord {
    pub fn to_path(&self) -> Result<Path> {
        let interactions = if self.facets.is_empty() {
            Vec::new()
        } else {
            self.facets
                .split(';')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad facet id `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let kind = match self.kind.as_str() {
            "los" => PathKind::Los,
            "specular" => PathKind::Specular(self.order),
            "diffuse" => PathKind::Diffuse,
            other => return Err(Error::Config(format!("unknown path kind `{other}`"))),
        };
        Ok(Path {
            kind,
            delay: self.delay_s,
            gain: Complex64::new(self.gain_re, self.gain_im),
            aod: Angles {
                azimuth: self.aod_az,
                elevation: self.aod_el,
            },
            aoa: Angles {
                azimuth: self.aoa_az,
                elevation: self.aoa_el,
            },
            interactions,
            length: self.delay_s * SPEED_OF_LIGHT,
        })
    }
}

/// Writes paths as CSV with a header row.
pub fn write_paths_csv<W: Write>(writer: W, paths: &[Path]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in paths {
        w.serialize(PathRecord::from(p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_paths_csv<R: Read>(reader: R) -> Result<Vec<Path>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<PathRecord>().map(|rec| rec?.to_path()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{IndoorLayout, MaterialLibrary, UrbanLayout};

    fn path_with_power_db(db: f64) -> Path {
        Path {
            kind: PathKind::Specular(1),
            delay: 0.0,
            gain: Complex64::new(10f64.powf(db / 20.0), 0.0),
            aod: Angles::default(),
            aoa: Angles::default(),
            interactions: vec![0],
            length: 0.0,
        }
    }

    #[test]
    fn filter_threshold() {
        let paths = [0.0, -10.0, -39.0, -41.0].map(path_with_power_db).to_vec();
        assert_eq!(dynamic_range_filter(paths, 40.0).unwrap().len(), 3);
    }

    #[test]
    fn filter_single_and_boundary() {
        assert_eq!(
            dynamic_range_filter(vec![path_with_power_db(-3.0)], 40.0)
                .unwrap()
                .len(),
            1
        );
        let paths = [0.0, -40.0].map(path_with_power_db).to_vec();
        assert_eq!(dynamic_range_filter(paths, 40.0).unwrap().len(), 2);
    }

    #[test]
    fn filter_empty_is_error() {
        assert!(dynamic_range_filter(Vec::new(), 40.0).is_err());
    }

    #[test]
    fn free_space_single_los() {
        let scene = Scene::urban(
            &UrbanLayout {
                extent: [[-50.0, -50.0], [50.0, 50.0]],
                ground_material: "concrete".into(),
                footprints: vec![],
            },
            &MaterialLibrary::builtin(),
        )
        .unwrap();
        // both endpoints below the ground plane is not allowed; use order 0
        let cfg = TraceConfig::new(0, 3.5e9);
        let tx = Vec3::new(0.0, 0.0, 10.0);
        let rx = Vec3::new(30.0, 40.0, 10.0);
        let paths = trace(&scene, &tx, &rx, &cfg).unwrap();
        assert_eq!(paths.len(), 1);
        let lambda = wavelength(3.5e9);
        let expected = lambda / (4.0 * PI * 50.0);
        assert!((paths[0].gain.norm() - expected).abs() / expected < 1e-12);
        assert_eq!(paths[0].delay, 50.0 / SPEED_OF_LIGHT);
    }

    #[test]
    fn coincident_endpoints_rejected() {
        let scene = Scene::indoor(&IndoorLayout::empty([4.0, 4.0, 3.0]), &MaterialLibrary::builtin()).unwrap();
        let p = Vec3::new(1.0, 1.0, 1.0);
        assert!(trace(&scene, &p, &p, &TraceConfig::indoor(3.5e9)).is_err());
    }

    #[test]
    fn embedded_endpoint_rejected() {
        let scene = Scene::indoor(&IndoorLayout::lab(), &MaterialLibrary::builtin()).unwrap();
        let tx = Vec3::new(4.8, 2.4, 1.0);
        let inside_bench = Vec3::new(1.5, 5.0, 0.5);
        assert!(trace(&scene, &tx, &inside_bench, &TraceConfig::indoor(3.5e9)).is_err());
    }

    #[test]
    fn vertical_reflection_on_floor_is_tm() {
        let eps = Complex64::new(5.24, -0.3);
        let incoming = Vec3::new(1.0, 0.0, -1.0).normalize();
        let n = Vec3::z();
        let g = vertical_reflection(eps, &incoming, &n);
        let tm = fresnel_reflection(eps, std::f64::consts::FRAC_PI_4, Polarization::Tm);
        assert!((g - tm).norm() < 1e-12);
    }

    #[test]
    fn vertical_reflection_on_wall_at_zero_elevation_is_te() {
        let eps = Complex64::new(5.24, -0.3);
        let incoming = Vec3::new(1.0, 1.0, 0.0).normalize();
        let n = Vec3::new(-1.0, 0.0, 0.0);
        let g = vertical_reflection(eps, &incoming, &n);
        let te = fresnel_reflection(eps, std::f64::consts::FRAC_PI_4, Polarization::Te);
        assert!((g - te).norm() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let scene = Scene::indoor(&IndoorLayout::empty([7.6, 10.5, 3.1]), &MaterialLibrary::builtin()).unwrap();
        let mut cfg = TraceConfig::new(2, 10e9);
        cfg.dynamic_range_db = f64::INFINITY;
        let paths = trace(&scene, &Vec3::new(4.8, 2.4, 1.0), &Vec3::new(6.4, 6.8, 2.5), &cfg).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &paths).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,order,delay_s,gain_re,gain_im,aod_az,aod_el,aoa_az,aoa_el,facets\n"));
        let back = read_paths_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), paths.len());
        for (a, b) in back.iter().zip(&paths) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.gain, b.gain);
            assert_eq!(a.interactions, b.interactions);
        }
    }
}
