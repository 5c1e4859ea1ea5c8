use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stepturn::density::{density_mc_check, f_s_density, f_s_grid, f_v_grid, f_z_density, f_z_grid, von_mises_pdf};
use stepturn::movement::{sample_exponential, sample_von_mises};
use statrs::distribution::{Continuous, Gamma};

/// Integrate over the turn angle instead of over `cos(phi)`: composite
/// Simpson on the whole circle.
fn angle_oracle(s: f64, kappa: f64, scale_pdf: impl Fn(f64) -> f64) -> f64 {
    let n = 400_000;
    let (a, b) = (-PI, PI);
    let h = (b - a) / n as f64;
    let g = |phi: f64| {
        let c = phi.cos();
        if c.abs() < 1e-300 {
            return 0.0;
        }
        von_mises_pdf(phi, kappa) * scale_pdf(s / c) / c.abs()
    };
    let mut acc = g(a) + g(b);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn f_z_matches_angle_integral() {
    for &(kappa, lambda) in &[(0.0, 1.0), (5.0, 2.0), (20.0, 0.5)] {
        let exp_pdf = |t: f64| if t < 0.0 { 0.0 } else { lambda * (-lambda * t).exp() };
        for z in [-1.7, -0.2, 0.05, 0.4, 1.3, 3.0] {
            let got = f_z_density(z, kappa, lambda).unwrap();
            let want = angle_oracle(z, kappa, exp_pdf);
            assert!((got - want).abs() < 1e-7 * want.max(1e-3), "kappa {kappa} lambda {lambda} z {z}: {got} vs {want}");
        }
    }
}

#[test]
fn f_s_matches_angle_integral() {
    for &(kappa, lambda, n, c) in &[(5.0, 2.0, 3u32, 4.0), (1.0, 1.0, 2, 3.0), (10.0, 4.0, 5, 2.0)] {
        let gamma = Gamma::new(n as f64, lambda).unwrap();
        let pdf = |y: f64| if c - y <= 0.0 { 0.0 } else { gamma.pdf(c - y) };
        for s in [-2.5, -0.6, 0.1, 0.9, 1.8, 3.5] {
            let got = f_s_density(s, kappa, lambda, n, c).unwrap();
            let want = angle_oracle(s, kappa, pdf);
            assert!((got - want).abs() < 1e-7 * want.max(1e-3), "({kappa},{lambda},{n},{c}) s {s}: {got} vs {want}");
        }
    }
}

#[test]
fn grids_normalize_and_match_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let m = 20_000;

    for kappa in [0.5, 2.0, 8.0] {
        let g = f_v_grid(kappa, 200).unwrap();
        assert!((g.mass - 1.0).abs() < 1e-6, "f_V mass {}", g.mass);
        let xs: Vec<f64> = (0..m).map(|_| sample_von_mises(kappa, 0.0, &mut rng).unwrap().cos()).collect();
        let c = density_mc_check(&g, &xs).unwrap();
        assert!(c.passed(), "f_V kappa {kappa}: {c:?}");
    }

    for &(kappa, lambda) in &[(0.0, 1.0), (5.0, 2.0), (20.0, 0.5)] {
        let g = f_z_grid(kappa, lambda, 300).unwrap();
        assert!((g.mass - 1.0).abs() < 1e-6, "f_Z mass {}", g.mass);
        let xs: Vec<f64> = (0..m)
            .map(|_| sample_von_mises(kappa, 0.0, &mut rng).unwrap().cos() * sample_exponential(lambda, &mut rng).unwrap())
            .collect();
        let c = density_mc_check(&g, &xs).unwrap();
        assert!(c.passed(), "f_Z ({kappa},{lambda}): {c:?}");
    }

    for &(kappa, lambda, n, cc) in &[(5.0, 2.0, 3u32, 4.0), (1.0, 1.0, 2, 3.0), (10.0, 4.0, 5, 2.0)] {
        let g = f_s_grid(kappa, lambda, n, cc, 300).unwrap();
        assert!((g.mass - 1.0).abs() < 1e-6, "f_S mass {}", g.mass);
        let xs: Vec<f64> = (0..m)
            .map(|_| {
                let w: f64 = (0..n).map(|_| sample_exponential(lambda, &mut rng).unwrap()).sum();
                sample_von_mises(kappa, 0.0, &mut rng).unwrap().cos() * (cc - w)
            })
            .collect();
        let c = density_mc_check(&g, &xs).unwrap();
        assert!(c.passed(), "f_S ({kappa},{lambda},{n},{cc}): {c:?}");
    }
}

#[test]
fn dropping_the_jacobian_is_detected() {
    // Without the 1/sqrt(1 - v^2) factor the "density" of cos(phi) neither
    // integrates to one nor matches draws.
    let kappa = 2.0;
    let wrong = |v: f64| {
        let a = v.acos();
        Ok(von_mises_pdf(a, kappa) + von_mises_pdf(-a, kappa))
    };
    let g = stepturn::density::DensityGrid::build(
        wrong,
        (-1.0, 1.0),
        &[-1.0, 1.0],
        stepturn::density::NodeLayout::Chebyshev,
        200,
    )
    .unwrap();
    assert!((g.mass - 1.0).abs() > 0.05, "{}", g.mass);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..20_000).map(|_| sample_von_mises(kappa, 0.0, &mut rng).unwrap().cos()).collect();
    assert!(!matches!(density_mc_check(&g, &xs), Ok(c) if c.passed()));
}

#[test]
fn small_concentration_approaches_arcsine() {
    for i in 0..=180 {
        let v = -0.9 + i as f64 * 0.01;
        let got = stepturn::density::f_v_density(v, 1e-6).unwrap();
        let arcsine = 1.0 / (PI * (1.0 - v * v).sqrt());
        assert!((got - arcsine).abs() < 1e-6, "{v}: {got} vs {arcsine}");
    }
}

#[test]
fn sharp_gamma_collapses_to_scaled_cosine() {
    let (kappa, c) = (3.0, 2.0);
    let s = f_s_grid(kappa, 1e6, 1, c, 300).unwrap();
    let v = f_v_grid(kappa, 300).unwrap();
    let mut ks: f64 = 0.0;
    for i in 1..400 {
        let x = -c + 2.0 * c * i as f64 / 400.0;
        ks = ks.max((s.cdf(x) / s.mass - v.cdf(x / c) / v.mass).abs());
    }
    assert!(ks < 1e-2, "{ks}");
}

#[test]
fn grid_refinement_is_stable() {
    let coarse = f_z_grid(5.0, 2.0, 150).unwrap();
    let fine = f_z_grid(5.0, 2.0, 300).unwrap();
    assert!((coarse.mass - fine.mass).abs() < 1e-8);
    for z in [-2.0, -0.5, -0.01, 0.02, 0.7, 2.5] {
        assert!((coarse.cdf(z) - fine.cdf(z)).abs() < 1e-3, "{z}");
    }
}

#[test]
fn z_grid_symmetric_without_concentration() {
    let g = f_z_grid(0.0, 1.3, 200).unwrap();
    let n = g.x.len();
    for i in 0..n {
        let (a, b) = (g.x[i], g.x[n - 1 - i]);
        assert!((a + b).abs() < 1e-12);
        assert!((g.f[i] - g.f[n - 1 - i]).abs() < 1e-8 * g.f[i].max(1.0));
    }
}
