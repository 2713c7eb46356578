mod common;

use blowup::Nonlinearity;
use common::oracle_big_f;
use proptest::prelude::*;

const MATRIX: [(f64, f64); 9] = [
    (1.5, 0.0),
    (1.5, 1.0),
    (1.5, 2.0),
    (2.0, 0.0),
    (2.0, 1.0),
    (2.0, 2.0),
    (3.0, 0.0),
    (3.0, 1.0),
    (3.0, 2.0),
];

#[test]
fn oracle_is_validated_on_known_integrals() {
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let half = oracle_big_f(2.0, 0.0, 0.0);
    assert!((half / (sqrt_pi / 2.0) - 1.0).abs() < 1e-12, "{half}");
    for &u in &[0.25f64, 1.0, 2.0, 4.0] {
        let got = oracle_big_f(2.0, 0.0, u);
        let exact = sqrt_pi / 2.0 * libm::erfc(u);
        assert!((got / exact - 1.0).abs() < 1e-12, "u={u}: {got} vs {exact}");
    }
    // q = 1, p = 1 would be E1; use p = 2, q = 1: F(u) = E1(u^2)/2
    let got = oracle_big_f(2.0, 1.0, 1.0);
    assert!((got / (0.219_383_934_395_520_27 / 2.0) - 1.0).abs() < 1e-12, "{got}");
}

#[test]
fn incomplete_gamma_path_agrees_with_quadrature_oracle() {
    for (p, q) in MATRIX {
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        let start = if q == 0.0 { 0.0 } else { 0.05 };
        for i in 0..=40 {
            let u = start + (5.0 - start) * i as f64 / 40.0;
            let exact = oracle_big_f(p, q, u);
            if exact < 1e-300 {
                continue;
            }
            let got = nl.log_big_f(u).unwrap().exp();
            let rel = (got / exact - 1.0).abs();
            assert!(rel <= 1e-10, "p={p} q={q} u={u}: {got} vs {exact} ({rel:e})");
        }
    }
}

#[test]
fn log_f_derivative_matches_finite_differences() {
    for (p, q) in [(2.0, 0.0), (1.5, 1.0), (3.0, 2.0)] {
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        for i in 0..50 {
            let u = 0.3 + 4.0 * i as f64 / 49.0;
            let h = 1e-5 * u.max(1.0);
            let fd = (nl.ln_big_f(u + h).unwrap() - nl.ln_big_f(u - h).unwrap()) / (2.0 * h);
            let analytic = -(-nl.ln_f_big_f(u).unwrap()).exp();
            assert!((fd / analytic - 1.0).abs() <= 1e-6, "p={p} q={q} u={u}");
        }
    }
}

#[test]
fn log_big_f_strictly_decreasing() {
    for (p, q) in MATRIX {
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..=400 {
            let u = 0.02 * i as f64 + 0.001 * (i as f64).sqrt();
            let v = nl.ln_big_f(u).unwrap();
            assert!(v < prev, "p={p} q={q} u={u}");
            prev = v;
        }
    }
}

#[test]
fn closed_form_references() {
    let ex = Nonlinearity::exponential_reference();
    let pw = Nonlinearity::power_reference(2.5).unwrap();
    for i in 1..100 {
        let u = 0.37 * i as f64;
        assert!((ex.log_big_f(u).unwrap().exp() - (-u).exp()).abs() <= 1e-12 * (-u).exp());
        let expect = u.powf(-1.5) / 1.5;
        assert!((pw.log_big_f(u).unwrap().exp() / expect - 1.0).abs() <= 1e-12);
        let back = pw.f_inv_log(expect.ln()).unwrap();
        assert!((back / u - 1.0).abs() <= 1e-12);
        assert!((ex.f_inv_log(-u).unwrap() - u).abs() <= 1e-12 * u);
    }
}

#[test]
fn remainder_bound_tail_behaviour() {
    // (1 - f'F)(p u^p + q) stays bounded and approaches p - 1 in the tail
    for (p, q) in MATRIX {
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        let tail: Vec<f64> = [10.0, 20.0, 40.0, 50.0]
            .iter()
            .map(|&u| nl.one_minus_fprime_f(u).unwrap() * (p * u.powf(p) + q))
            .collect();
        for w in tail.windows(2) {
            assert!((w[1] - (p - 1.0)).abs() <= (w[0] - (p - 1.0)).abs() + 1e-9);
        }
        assert!((tail[3] - (p - 1.0)).abs() < 0.05 * (p - 1.0), "{tail:?}");
    }
}

proptest! {
    #[test]
    fn round_trip_inverse(u in 0.5f64..50.0, pi in 0usize..3, qi in 0usize..3) {
        let p = [1.5, 2.0, 3.0][pi];
        let q = [0.0, 1.0, 2.0][qi];
        let nl = Nonlinearity::super_exponential(p, q).unwrap();
        let back = nl.f_inv_log(nl.ln_big_f(u).unwrap()).unwrap();
        prop_assert!((back - u).abs() <= 1e-10 * u.max(1.0));
    }

    #[test]
    fn warm_start_inverse_matches_cold(u in 0.05f64..30.0, shift in -0.3f64..0.3) {
        let nl = Nonlinearity::super_exponential(2.0, 1.0).unwrap();
        let target = nl.ln_big_f(u).unwrap();
        let warm = nl.f_inv_log_from(target, Some(u * (1.0 + shift))).unwrap();
        let cold = nl.f_inv_log(target).unwrap();
        prop_assert!((warm - cold).abs() <= 1e-11 * u.max(1.0));
    }
}
