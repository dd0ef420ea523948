//! Channel synthesis checked against direct evaluation of the multipath sum.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raychan::channel::{
    cfr, cfr_from_paths, element_gain_db_tr38901, pdp, read_channel_csv, steering_vector, subcarrier_count, synthesize,
    write_channel_csv, ArrayConfig,
};
use raychan::geometry::Angles;
use raychan::tracer::{Path, PathKind};
use raychan::SPEED_OF_LIGHT;

fn path(delay: f64, gain: Complex64, aod: Angles, aoa: Angles) -> Path {
    Path {
        kind: PathKind::Specular(1),
        delay,
        gain,
        aod,
        aoa,
        interactions: vec![0],
        length: delay * SPEED_OF_LIGHT,
    }
}

fn random_paths(rng: &mut ChaCha8Rng, n: usize) -> Vec<Path> {
    let angle = |r: &mut ChaCha8Rng| Angles {
        azimuth: r.random_range(-PI..PI),
        elevation: r.random_range(-1.0..1.0),
    };
    (0..n)
        .map(|_| {
            let aod = angle(rng);
            let aoa = angle(rng);
            path(
                rng.random_range(5e-9..400e-9),
                Complex64::from_polar(rng.random_range(1e-4..1e-2), rng.random_range(-PI..PI)),
                aod,
                aoa,
            )
        })
        .collect()
}

/// Element phase of an isotropic UPA with boresight +x: columns along +y,
/// rows along +z, centered.
fn element_phase(rows: usize, cols: usize, d: f64, idx: usize, dir: Angles, f: f64) -> Complex64 {
    let (r, c) = (idx / cols, idx % cols);
    let y = (c as f64 - (cols as f64 - 1.0) / 2.0) * d;
    let z = (r as f64 - (rows as f64 - 1.0) / 2.0) * d;
    let u = [
        dir.elevation.cos() * dir.azimuth.cos(),
        dir.elevation.cos() * dir.azimuth.sin(),
        dir.elevation.sin(),
    ];
    Complex64::from_polar(1.0, 2.0 * PI * f / SPEED_OF_LIGHT * (y * u[1] + z * u[2]))
}

#[test]
fn cfr_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let f_c = 7e9;
    let (bw, scs) = (6.4e6, 400e3);
    let tx = ArrayConfig::isotropic(2, 3, f_c);
    let rx = ArrayConfig::isotropic(2, 2, f_c);
    let d = SPEED_OF_LIGHT / f_c / 2.0;
    let paths = random_paths(&mut rng, 12);
    let ch = cfr_from_paths(&paths, &tx, &rx, f_c, bw, scs).unwrap();
    assert_eq!(ch.n_subcarriers(), 16);
    for k in 0..16 {
        let offset = -bw / 2.0 + (k as f64 + 0.5) * scs;
        for r in 0..4 {
            for t in 0..6 {
                let direct: Complex64 = paths
                    .iter()
                    .map(|p| {
                        p.gain
                            * element_phase(2, 2, d, r, p.aoa, f_c)
                            * element_phase(2, 3, d, t, p.aod, f_c)
                            * Complex64::from_polar(1.0, -2.0 * PI * offset * p.delay)
                    })
                    .sum();
                let got = ch.h[k][(r, t)];
                assert!(
                    (got - direct).norm() < 1e-12 * direct.norm().max(1e-6),
                    "k={k} r={r} t={t}"
                );
            }
        }
    }
}

#[test]
fn two_equal_taps_null_at_half_integer_products() {
    let (bw, scs) = (4e6, 400e3);
    // subcarrier offsets are odd multiples of 200 kHz; a 2.5 µs separation
    // puts every one of them at (m + ½)/Δτ
    let a = Angles::default();
    let one = Complex64::new(1.0, 0.0);
    let paths = [path(1e-6, one, a, a), path(3.5e-6, one, a, a)];
    let iso = ArrayConfig::isotropic(1, 1, 3.5e9);
    let ch = cfr_from_paths(&paths, &iso, &iso, 3.5e9, bw, scs).unwrap();
    for h in &ch.h {
        assert!(h[(0, 0)].norm() < 1e-9);
    }
    // separation 1.25 µs: |H|² = 2 + 2cos(2π·f·Δτ) at each offset
    let paths = [path(1e-6, one, a, a), path(2.25e-6, one, a, a)];
    let ch = cfr_from_paths(&paths, &iso, &iso, 3.5e9, bw, scs).unwrap();
    for (k, h) in ch.h.iter().enumerate() {
        let off = ch.subcarrier_offset(k);
        let expected = 2.0 + 2.0 * (2.0 * PI * off * 1.25e-6).cos();
        assert!((h[(0, 0)].norm_sqr() - expected).abs() < 1e-9);
    }
}

#[test]
fn steering_vectors_have_pattern_weighted_norm() {
    let f = 28e9;
    let arr = ArrayConfig::upa(4, 5, f);
    // boresight: 8 dBi
    let s = steering_vector(&arr, Angles::default(), f);
    let norm2: f64 = s.iter().map(|c| c.norm_sqr()).sum();
    assert!((norm2 - 20.0 * 10f64.powf(0.8)).abs() < 1e-9);
    // directly behind: 8 − 30 dBi
    let back = steering_vector(
        &arr,
        Angles {
            azimuth: PI,
            elevation: 0.0,
        },
        f,
    );
    assert!((back[0].norm() - 10f64.powf(-22.0 / 20.0)).abs() < 1e-12);
}

#[test]
fn element_pattern_values() {
    assert_eq!(element_gain_db_tr38901(90.0, 0.0), 8.0);
    assert!((element_gain_db_tr38901(90.0, 65.0 / 2.0) - 5.0).abs() < 1e-12);
    assert!((element_gain_db_tr38901(90.0 + 65.0 / 2.0, 0.0) - 5.0).abs() < 1e-12);
    assert_eq!(element_gain_db_tr38901(0.0, 180.0), -22.0);
}

#[test]
fn subcarrier_counts() {
    assert_eq!(subcarrier_count(102.4e6, 400e3).unwrap(), 256);
    assert_eq!(subcarrier_count(25.6e6, 400e3).unwrap(), 64);
    assert!(subcarrier_count(1e6, 400e3).is_err());
    assert!(subcarrier_count(0.0, 400e3).is_err());
}

#[test]
fn channel_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let f = 10e9;
    let ch = cfr_from_paths(
        &random_paths(&mut rng, 5),
        &ArrayConfig::upa(2, 2, f),
        &ArrayConfig::upa(1, 3, f),
        f,
        1.6e6,
        400e3,
    )
    .unwrap();
    let mut buf = Vec::new();
    write_channel_csv(&mut buf, &ch).unwrap();
    assert_eq!(read_channel_csv(buf.as_slice()).unwrap(), ch);
}

proptest! {
    #[test]
    fn pdp_conserves_power(seed in any::<u64>(), n in 1usize..20, bins in 1usize..40, width in 1e-9f64..50e-9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = 3.5e9;
        let cir = synthesize(&random_paths(&mut rng, n), &ArrayConfig::upa(2, 2, f), &ArrayConfig::upa(2, 1, f), f).unwrap();
        let profile = pdp(&cir, bins, width).unwrap();
        let total: f64 = (0..cir.n_taps()).map(|l| cir.tap_power(l)).sum();
        prop_assert!((profile.iter().sum::<f64>() - total).abs() <= 1e-12 * total);
        // first arrival always lands in bin 0
        prop_assert!(profile[0] >= cir.tap_power(0) * (1.0 - 1e-12));
    }

    #[test]
    fn mean_gain_is_band_independent_for_isotropic_siso(seed in any::<u64>()) {
        // Averaged over a band much wider than 1/Δτ, E_k|H|² → Σ|a_l|².
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = random_paths(&mut rng, 3);
        let iso = ArrayConfig::isotropic(1, 1, 10e9);
        let cir = synthesize(&paths, &iso, &iso, 10e9).unwrap();
        let ch = cfr(&cir, 409.6e6, 400e3).unwrap();
        let mean = ch.gains().iter().sum::<f64>() / ch.n_subcarriers() as f64;
        let power: f64 = paths.iter().map(Path::power).sum();
        let min_sep = {
            let mut d: Vec<f64> = paths.iter().map(|p| p.delay).collect();
            d.sort_by(f64::total_cmp);
            d.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
        };
        prop_assume!(min_sep > 20e-9);
        prop_assert!((mean - power).abs() < 0.1 * power, "{mean} vs {power}");
    }
}
