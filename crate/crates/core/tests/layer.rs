use std::f64::consts::PI;

use proptest::prelude::*;
use vortex_core::layer::*;
use vortex_core::quadrature::{integrate, QuadOptions};
use vortex_core::Nonlinearity;

fn opts(n: usize) -> LayerOptions {
    LayerOptions { n, ..Default::default() }
}

#[test]
fn sine_layer_matches_arctan() {
    for a in [0.5, 1.0, 2.0] {
        let p = solve_layer(&Nonlinearity::Sine { a }, opts(512)).unwrap();
        let err = (0..=2000)
            .map(|i| -50.0 + 0.05 * i as f64)
            .map(|x| (p.value(x) - layer_explicit_sine(a, x)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "a = {a}: {err}");
    }
}

#[test]
fn cubic_layer_is_odd_monotone_and_decays() {
    let p = solve_layer(&Nonlinearity::Cubic, opts(512)).unwrap();
    assert!(p.residual <= 1e-10);
    assert!(p.v.windows(2).all(|w| w[1] > w[0]));
    for x in [0.1, 1.0, 5.0, 60.0] {
        assert!((p.value(x) + p.value(-x)).abs() <= 1e-10, "{x}");
    }
    assert!(p.value(0.0).abs() < 1e-14);
    assert!(p.value(100.0) >= 0.95);
    assert!(p.tail_coeff > 0.0);
    // linearising at +1 gives v ≈ 1 - (2/π)/(G''(1)·x) for the half-Laplacian
    let c = 2.0 / (PI * 2.0);
    assert!((p.tail_coeff / c - 1.0).abs() < 0.05, "{}", p.tail_coeff);
}

#[test]
fn truncated_energy_sine_against_area_quadrature() {
    // U = Re[1 + (2i/π) log(z + i)] so |∇U|² = (4/π²)/|z + i|²; G(U) on the line
    // integrates to (4/π²) arctan R.
    let p = solve_layer(&Nonlinearity::Sine { a: 1.0 }, opts(128)).unwrap();
    let r = 10.0;
    let o = QuadOptions::abs(1e-12);
    let area = integrate(
        |phi: f64| {
            integrate(
                |rho: f64| {
                    let (x, y) = (rho * phi.cos(), rho * phi.sin());
                    rho * 4.0 / (PI * PI) / (x * x + (y + 1.0) * (y + 1.0))
                },
                0.0,
                r,
                o,
            )
            .unwrap()
            .value
        },
        0.0,
        PI,
        o,
    )
    .unwrap()
    .value;
    let expected = 0.5 * area + 4.0 / (PI * PI) * r.atan();
    let got = layer_energy_truncated(&p, r).unwrap();
    assert!((got - expected).abs() < 1e-9, "{got} {expected}");
    let twenty = layer_energy_truncated(&p, 20.0).unwrap();
    assert!(twenty > got);
}

#[test]
fn energy_scaling() {
    let p = solve_layer(&Nonlinearity::Cubic, opts(256)).unwrap();
    let a = layer_energy_scaled(&p, 0.5, 10.0).unwrap();
    let b = layer_energy_truncated(&p, 20.0).unwrap();
    assert!((a - b).abs() < 1e-9, "{a} {b}");
    assert!(layer_energy_truncated(&p, 0.9 * p.x_max).is_err());
}

#[test]
fn sine_remainder_converges() {
    let p = solve_layer(&Nonlinearity::Sine { a: 1.0 }, opts(256)).unwrap();
    let rem: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&r| layer_energy_truncated(&p, r).unwrap() - 2.0 / PI * f64::ln(r))
        .collect();
    assert!(rem.windows(2).all(|w| w[1] < w[0]));
    assert!((rem[0] - rem[2]).abs() <= 2e-3 * 10.0);
}

#[test]
fn cf_sine_one() {
    let fit = compute_cf(&Nonlinearity::Sine { a: 1.0 }, &DEFAULT_CF_RADII, 512).unwrap();
    assert!((fit.cf_estimate - cf_closed_form(1.0)).abs() < 2e-3, "{fit:?}");
    let json = serde_json::to_value(&fit).unwrap();
    assert!(json.get("R_list").is_some() && json.get("I_values").is_some());
}

#[test]
fn cf_cubic_resolution_independent() {
    let radii = [10.0, 20.0, 40.0, 80.0, 160.0];
    let a = compute_cf(&Nonlinearity::Cubic, &radii, 256).unwrap();
    let b = compute_cf(&Nonlinearity::Cubic, &radii, 512).unwrap();
    assert!((a.cf_estimate - b.cf_estimate).abs() <= 1e-3, "{} {}", a.cf_estimate, b.cf_estimate);
    assert!(a.a.is_none());
}

#[test]
fn bumps_collapse() {
    for f in [Nonlinearity::Cubic, Nonlinearity::Sine { a: 1.0 }] {
        for h in [0.5, 1.0, 1.5] {
            let r = homoclinic_probe(&f, h, 3.0, 1e-6, ProbeOptions::default()).unwrap();
            assert_eq!(r.verdict, ProbeVerdict::CollapsedToConstant, "{f:?} {h}: {r:?}");
            assert!((r.final_level + 1.0).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn half_laplacian_symmetric_psd(u in prop::collection::vec(-1.0f64..1.0, 64), v in prop::collection::vec(-1.0f64..1.0, 64), s in -3.0f64..3.0) {
        let lu = half_laplacian_apply(&u);
        let lv = half_laplacian_apply(&v);
        let uv: f64 = lu.iter().zip(&v).map(|(a, b)| a * b).sum();
        let vu: f64 = u.iter().zip(&lv).map(|(a, b)| a * b).sum();
        prop_assert!((uv - vu).abs() < 1e-12);
        prop_assert!(lu.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() >= -1e-12);
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + b).collect();
        let lw = half_laplacian_apply(&w);
        for i in 0..64 {
            prop_assert!((lw[i] - s * lu[i] - lv[i]).abs() < 1e-12);
        }
    }
}
