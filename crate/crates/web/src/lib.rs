//! Browser bindings for the interactive demo page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use raychan::channel::ElementPattern;
use raychan::geometry::Vec3;
use raychan::harness::config::INDOOR_TX;
use raychan::metrics::channel_stats;
use raychan::mimo::scaling::{sweep_fixed_count, HardeningMode, SweepSpec};
use raychan::mimo::EvalConfig;
use raychan::scene::{fresnel_reflection, BoxObstacle, IndoorLayout, MaterialLibrary, Polarization, Scene};
use raychan::tracer::{dynamic_range_filter, trace_geometry, PathKind, TraceConfig};
use raychan::Result;

/// Highest reflection order the page may ask for; keeps a click responsive.
const MAX_DEMO_ORDER: usize = 4;

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

fn check_freq(freq_ghz: f64) -> Result<f64> {
    let f = freq_ghz * 1e9;
    if !(1e9..=100e9).contains(&f) {
        return Err(raychan::Error::FrequencyOutOfRange(f));
    }
    Ok(f)
}

#[derive(Serialize)]
struct DemoPath {
    kind: &'static str,
    order: usize,
    delay_ns: f64,
    power_db: f64,
    /// Tx, interaction points, Rx.
    points: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct TraceView {
    room: [f64; 3],
    obstacles: Vec<BoxObstacle>,
    tx: [f64; 3],
    rx: [f64; 3],
    paths: Vec<DemoPath>,
    /// `null` for ±∞ (see `los`).
    k_factor_db: Option<f64>,
    rms_ds_ns: f64,
    asa_deg: f64,
    los: bool,
}

/// Traces the built-in lab from the default Tx to `(rx_x, rx_y, 1.5)`.
#[wasm_bindgen]
pub fn trace_lab(rx_x: f64, rx_y: f64, freq_ghz: f64, max_order: usize) -> String {
    to_json(trace_lab_view(rx_x, rx_y, freq_ghz, max_order))
}

fn trace_lab_view(rx_x: f64, rx_y: f64, freq_ghz: f64, max_order: usize) -> Result<TraceView> {
    let f = check_freq(freq_ghz)?;
    let layout = IndoorLayout::lab();
    let scene = Scene::indoor(&layout, &MaterialLibrary::builtin())?;
    let tx = Vec3::from(INDOOR_TX);
    let rx = Vec3::new(rx_x, rx_y, 1.5);
    let cfg = TraceConfig::new(max_order.min(MAX_DEMO_ORDER), f);
    let geometry = trace_geometry(&scene, &tx, &rx, &cfg)?;
    let mut evaluated = Vec::with_capacity(geometry.len());
    for g in &geometry {
        evaluated.push(g.evaluate(&scene, f, &cfg)?);
    }
    let kept = dynamic_range_filter(evaluated.clone(), cfg.dynamic_range_db)?;
    let stats = channel_stats(&kept)?;
    let mut paths: Vec<DemoPath> = geometry
        .iter()
        .zip(&evaluated)
        .filter(|(_, p)| kept.contains(p))
        .map(|(g, p)| DemoPath {
            kind: p.kind.label(),
            order: p.kind.order(),
            delay_ns: p.delay * 1e9,
            power_db: 10.0 * p.power().log10(),
            points: g.points.iter().map(|v| [v.x, v.y, v.z]).collect(),
        })
        .collect();
    paths.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
    Ok(TraceView {
        room: layout.dimensions,
        obstacles: layout.obstacles,
        tx: INDOOR_TX,
        rx: [rx.x, rx.y, rx.z],
        paths,
        k_factor_db: stats.k_factor_db.is_finite().then_some(stats.k_factor_db),
        rms_ds_ns: stats.rms_ds * 1e9,
        asa_deg: stats.asa,
        los: kept.iter().any(|p| p.kind == PathKind::Los),
    })
}

#[derive(Serialize)]
struct FresnelCurve {
    material: String,
    eps_re: f64,
    eps_im: f64,
    angle_deg: Vec<f64>,
    te: Vec<f64>,
    tm: Vec<f64>,
}

/// `|Γ_TE|` and `|Γ_TM|` of a built-in material against incidence angle,
/// 0° to 90° in 1° steps.
#[wasm_bindgen]
pub fn fresnel_curve(material: &str, freq_ghz: f64) -> String {
    to_json(fresnel(material, freq_ghz))
}

fn fresnel(material: &str, freq_ghz: f64) -> Result<FresnelCurve> {
    let f = check_freq(freq_ghz)?;
    let lib = MaterialLibrary::builtin();
    let eps = lib.get(material)?.complex_permittivity(f)?;
    let angle_deg: Vec<f64> = (0..=90).map(f64::from).collect();
    let gamma = |pol| {
        angle_deg
            .iter()
            .map(|a| fresnel_reflection(eps, a.to_radians(), pol).norm())
            .collect()
    };
    Ok(FresnelCurve {
        material: material.to_string(),
        eps_re: eps.re,
        eps_im: eps.im,
        te: gamma(Polarization::Te),
        tm: gamma(Polarization::Tm),
        angle_deg,
    })
}

/// Names of the built-in materials, as a JSON array.
#[wasm_bindgen]
pub fn material_names() -> String {
    let lib = MaterialLibrary::builtin();
    serde_json::to_string(&lib.names().collect::<Vec<_>>()).unwrap_or_default()
}

#[derive(Serialize)]
struct SweepPoint {
    n_tx: usize,
    mean_rank: f64,
    mean_cond_db: f64,
    se_bps_hz: f64,
    /// `null` when the channel is flat across the band.
    eta_db: Option<f64>,
}

/// Fixed-count Tx sweep (2×2 up to `max_side`×`max_side`) at one lab
/// location with a 3×3 Rx and a 25.6 MHz band.
#[wasm_bindgen]
pub fn lab_sweep(rx_x: f64, rx_y: f64, freq_ghz: f64, max_side: usize) -> String {
    to_json(sweep(rx_x, rx_y, freq_ghz, max_side))
}

fn sweep(rx_x: f64, rx_y: f64, freq_ghz: f64, max_side: usize) -> Result<Vec<SweepPoint>> {
    let f = check_freq(freq_ghz)?;
    let scene = Scene::indoor(&IndoorLayout::lab(), &MaterialLibrary::builtin())?;
    let sizes: Vec<usize> = (2..=max_side.clamp(2, 16)).collect();
    let spec = SweepSpec {
        frequencies: vec![f],
        bandwidth: 25.6e6,
        subcarrier_spacing: 400e3,
        rx_array: (3, 3),
        pattern: ElementPattern::Tr38901,
        eval: EvalConfig::default(),
        trace: TraceConfig::new(3, f),
        hardening: HardeningMode::Subcarriers,
        workers: 1,
    };
    let rx = [Vec3::new(rx_x, rx_y, 1.5)];
    let out = sweep_fixed_count(&scene, &Vec3::from(INDOOR_TX), &rx, &sizes, &spec)?;
    if let Some(fail) = out.failures.first() {
        return Err(raychan::Error::InvalidEndpoint(fail.message.clone()));
    }
    Ok(out
        .rows
        .into_iter()
        .map(|r| SweepPoint {
            n_tx: r.n_tx,
            mean_rank: r.mean_rank,
            mean_cond_db: r.mean_cond_db,
            se_bps_hz: r.se_bps_hz,
            eta_db: r.eta_db.is_finite().then_some(r.eta_db),
        })
        .collect())
}
