//! Receiver placement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RxMode;
use super::seed::{derive_seed, STREAM_PLACEMENT};
use crate::geometry::Vec3;
use crate::scene::Scene;
use crate::{Error, Result};

/// Rejection-sampling attempts allowed per requested point.
pub const ATTEMPTS_PER_POINT: usize = 10_000;

/// Rx positions for `mode`. Random placement draws `(x, y)` uniformly over
/// the scene footprint shrunk by the margin, at the configured height, and
/// rejects points inside or within `margin` of obstacles and buildings.
/// Fixed positions are validated against the scene.
pub fn place_rx(scene: &Scene, mode: &RxMode, master_seed: u64) -> Result<Vec<Vec3>> {
    match mode {
        RxMode::Fixed { positions } => positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = Vec3::new(p[0], p[1], p[2]);
                scene
                    .validate_point(&v)
                    .map_err(|e| e.context(format!("fixed Rx {i}")))?;
                Ok(v)
            })
            .collect(),
        &RxMode::Random {
            n,
            seed,
            height,
            margin,
        } => {
            let seed = seed.unwrap_or_else(|| derive_seed(master_seed, STREAM_PLACEMENT, 0));
            random_points(scene, n, seed, height, margin)
        }
    }
}

fn random_points(scene: &Scene, n: usize, seed: u64, height: f64, margin: f64) -> Result<Vec<Vec3>> {
    let b = scene.bounds;
    let (x0, x1) = (b.min[0] + margin, b.max[0] - margin);
    let (y0, y1) = (b.min[1] + margin, b.max[1] - margin);
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::Config(format!(
            "margin {margin} m leaves no room for Rx placement"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts == ATTEMPTS_PER_POINT * n.max(1) {
            return Err(Error::Config(format!(
                "placed only {} of {n} Rx after {attempts} attempts; the scene is too crowded",
                out.len()
            )));
        }
        attempts += 1;
        let p = Vec3::new(rng.random_range(x0..x1), rng.random_range(y0..y1), height);
        if scene.validate_point(&p).is_ok() && !scene.occupied(&p, margin) {
            out.push(p);
        }
    }
    Ok(out)
}
