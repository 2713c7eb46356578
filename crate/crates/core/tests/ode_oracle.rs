use blowup::ode::{ode_blowup_time, ode_exact, ode_integrate};
use blowup::Nonlinearity;

#[test]
fn gaussian_case_matches_inverse_lifetime() {
    let nl = Nonlinearity::super_exponential(2.0, 0.0).unwrap();
    let run = ode_integrate(&nl, 1.0, 10.0, 1e-8).unwrap();
    let big_t = ode_blowup_time(&nl, 1.0).unwrap().exp();
    assert!(run.samples.last().unwrap().y >= 10.0);
    let mut worst = 0.0f64;
    for s in &run.samples {
        let exact = nl.f_inv_log(s.log_gap).unwrap();
        worst = worst.max(((s.y - exact) / exact).abs());
    }
    assert!(worst <= 1e-6, "worst relative deviation {worst:e}");
    for (k, inv) in run.lifetime_invariant().unwrap().iter().enumerate() {
        assert!((inv / big_t - 1.0).abs() <= 1e-6, "sample {k}: {inv} vs {big_t}");
    }
    let g0 = run.samples[0].log_gap.exp();
    assert!((g0 / big_t - 1.0).abs() <= 1e-6, "gap0 {g0} vs {big_t}, n={}", run.samples.len());
    // resolved part of the trajectory against the fixed-t closed form
    for s in run.samples.iter().filter(|s| big_t - s.t > 0.1 * big_t) {
        let exact = ode_exact(&nl, 1.0, s.t).unwrap();
        assert!(((s.y - exact) / exact).abs() <= 1e-6);
    }
    // gaps strictly decrease, times never go backwards
    for w in run.samples.windows(2) {
        assert!(w[1].log_gap < w[0].log_gap);
        assert!(w[1].t >= w[0].t);
    }
}
