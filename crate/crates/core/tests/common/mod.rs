//! Test-only oracles, independent of the library's evaluation paths.
#![allow(dead_code)]

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// F(u) = ∫_u^∞ e^{-s^p} s^{-q} ds by adaptive Simpson on the original
/// integrand, split geometrically away from the lower endpoint.
pub fn oracle_big_f(p: f64, q: f64, u: f64) -> f64 {
    let integrand = |s: f64| {
        if s == 0.0 {
            if q == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            (-s.powf(p)).exp() * s.powf(-q)
        }
    };
    let upper = (u.powf(p) + 60.0).powf(1.0 / p);
    let mut breaks = vec![u];
    if u > 0.0 {
        let mut b = 2.0 * u;
        while b < 1.0f64.min(upper) {
            breaks.push(b);
            b *= 2.0;
        }
    }
    let start = *breaks.last().unwrap();
    let pieces = 64;
    for i in 1..=pieces {
        breaks.push(start + (upper - start) * i as f64 / pieces as f64);
    }
    let scale = integrand(u.max(1e-300)).min(1e300).max(1e-300);
    breaks
        .windows(2)
        .map(|w| adaptive_simpson(&integrand, w[0], w[1], 1e-17 * scale))
        .sum()
}

/// Median of a sample.
pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Manufactured solution Φ*(r,t) = Φ_R + A cos(πr/2R) e^t for the
/// Φ-equation with f(u) = e^{u²}, forced by the matching source term. Returns
/// max_j |Φ_j − Φ*(r_j, t_end)| on a grid of `cells` cells (n = 2, R = 1).
pub fn mms_error(cells: usize, t_end: f64) -> f64 {
    use blowup::grid::RadialGrid;
    use blowup::solver::{PhiSolver, SolverOptions};
    use blowup::Nonlinearity;
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    let nl = Nonlinearity::super_exponential(2.0, 0.0).unwrap();
    let n = 2.0;
    let amp = 1.0;
    let phi_r = -nl.ln_big_f_at_zero();
    let exact = move |r: f64, t: f64| phi_r + amp * (FRAC_PI_2 * r).cos() * t.exp();
    let source = move |r: f64, t: f64| {
        let c = amp * t.exp();
        let k = FRAC_PI_2;
        let p = phi_r + c * (k * r).cos();
        let pt = c * (k * r).cos();
        let pr = -c * k * (k * r).sin();
        let prr = -c * k * k * (k * r).cos();
        let lap = if r == 0.0 { n * prr } else { prr + (n - 1.0) / r * pr };
        let u = nl.f_inv_log(-p).unwrap();
        let coeff = -nl.one_minus_fprime_f(u).unwrap();
        pt - lap - p.exp() - pr * pr * coeff
    };
    let grid = RadialGrid::new(2, 1.0, cells).unwrap();
    let phi0: Vec<f64> = grid.nodes().iter().map(|&r| exact(r, 0.0)).collect();
    let opts = SolverOptions {
        source: Some(Arc::new(source)),
        ..SolverOptions::default()
    };
    let mut s = PhiSolver::from_phi(nl, grid, phi0, opts).unwrap();
    s.advance_to(t_end).unwrap();
    let t = s.time();
    grid.nodes()
        .iter()
        .zip(s.phi())
        .map(|(&r, p)| (p - exact(r, t)).abs())
        .fold(0.0, f64::max)
}
