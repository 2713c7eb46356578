//! The spatially homogeneous problem y' = f(y): exact solution through F and
//! an independent adaptive Runge–Kutta integrator for differential testing.
//!
//! Near blow-up the elapsed time t saturates in double precision long before
//! the remaining lifetime T − t underflows, so every sample also carries the
//! log of its remaining lifetime *as seen by the integrator*: the final
//! state's exact lifetime F(y_N) plus the backward sum of the accepted steps.

use crate::error::{Error, Result};
use crate::nonlinearity::{LogValue, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSample {
    pub t: f64,
    pub y: f64,
    /// log of the remaining lifetime of the numerical trajectory.
    pub log_gap: f64,
}

#[derive(Debug, Clone)]
pub struct OdeRun {
    pub nl: Nonlinearity,
    pub y0: f64,
    /// Exact blow-up time F(y0).
    pub blowup_time: LogValue,
    pub samples: Vec<OdeSample>,
}

impl OdeRun {
    /// t_k + F(y_k) for every sample.
    pub fn lifetime_invariant(&self) -> Result<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| Ok(s.t + self.nl.ln_big_f(s.y)?.exp()))
            .collect()
    }
}

/// T = F(y0) for the ODE started at y0.
pub fn ode_blowup_time(nl: &Nonlinearity, y0: f64) -> Result<LogValue> {
    if !(y0 > 0.0) {
        return Err(Error::domain(format!("y0 must be positive, got {y0}")));
    }
    nl.log_big_f(y0)
}

/// y(t) = F^{-1}(T - t) with T = F(y0); log(T - t) is formed as
/// log T + log1p(-t/T).
pub fn ode_exact(nl: &Nonlinearity, y0: f64, t: f64) -> Result<f64> {
    let log_t = ode_blowup_time(nl, y0)?.log_magnitude;
    let big_t = log_t.exp();
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be nonnegative, got {t}")));
    }
    if t >= big_t {
        return Err(Error::domain(format!("t = {t} is past the blow-up time {big_t}")));
    }
    if t == 0.0 {
        return Ok(y0);
    }
    nl.f_inv_log_from(log_t + (-t / big_t).ln_1p(), Some(y0))
}

/// Exact solution at a given remaining lifetime.
pub fn ode_exact_at_gap(nl: &Nonlinearity, log_gap: f64) -> Result<f64> {
    nl.f_inv_log(log_gap)
}

// Dormand–Prince 5(4) tableau (autonomous, so the nodes c_i are not needed)
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive embedded RK45 (PI step control) for y' = f(y) until
/// y ≥ `stop_value`. Steps are capped at half the remaining lifetime F(y).
pub fn ode_integrate(nl: &Nonlinearity, y0: f64, stop_value: f64, rel_tol: f64) -> Result<OdeRun> {
    if !(y0 > 0.0) {
        return Err(Error::domain(format!("y0 must be positive, got {y0}")));
    }
    if !(stop_value > y0) {
        return Err(Error::domain(format!("stop value {stop_value} must exceed y0 = {y0}")));
    }
    if !(1e-12..=1e-3).contains(&rel_tol) {
        return Err(Error::domain(format!("rel_tol {rel_tol} outside [1e-12, 1e-3]")));
    }
    let blowup_time = ode_blowup_time(nl, y0)?;
    let rhs = |y: f64| nl.f(y);

    let mut y = y0;
    let mut t = 0.0f64;
    let mut t_comp = 0.0f64;
    let mut steps: Vec<(f64, f64, f64)> = vec![(0.0, y0, 0.0)]; // (t, y, dt leading here)
    let mut dt = 0.01 * nl.ln_big_f(y)?.exp();
    let mut err_prev = 1.0f64;
    let mut k = [0.0f64; 7];
    k[0] = rhs(y)?;
    let mut guard = 0usize;

    while y < stop_value {
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::StepUnderflow(format!("step budget exhausted at t = {t}, y = {y}")));
        }
        let lifetime = nl.ln_big_f(y)?.exp();
        dt = dt.min(0.5 * lifetime);
        if dt < 1e-12 * lifetime || dt == 0.0 {
            return Err(Error::StepUnderflow(format!(
                "dt = {dt:e} at t = {t}, y = {y}, remaining lifetime {lifetime:e}"
            )));
        }
        for s in 1..7 {
            let mut ys = y;
            for j in 0..s {
                ys += dt * A[s][j] * k[j];
            }
            k[s] = rhs(ys)?;
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5 += dt * B5[s] * k[s];
            y4 += dt * B4[s] * k[s];
        }
        let err = ((y5 - y4) / (rel_tol * y5.abs().max(y.abs()))).abs();
        if err <= 1.0 && y5.is_finite() {
            // Kahan-compensated elapsed time
            let add = dt - t_comp;
            let next_t = t + add;
            t_comp = (next_t - t) - add;
            t = next_t;
            y = y5;
            steps.push((t, y, dt));
            k[0] = k[6];
            let factor = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            dt *= factor.clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
        } else {
            let factor = 0.9 * err.max(1e-10).powf(-1.0 / 5.0);
            dt *= factor.clamp(0.1, 0.9);
            if !y5.is_finite() {
                dt *= 0.1;
            }
        }
    }

    // backward accumulation of the remaining lifetime
    let mut log_gap = nl.ln_big_f(y)?;
    let mut samples = vec![
        OdeSample {
            t: 0.0,
            y: 0.0,
            log_gap: 0.0
        };
        steps.len()
    ];
    for i in (0..steps.len()).rev() {
        let (ti, yi, _) = steps[i];
        samples[i] = OdeSample { t: ti, y: yi, log_gap };
        let dt_in = steps[i].2;
        if i > 0 {
            log_gap = log_add_exp(log_gap, dt_in.ln());
        }
    }
    Ok(OdeRun {
        nl: *nl,
        y0,
        blowup_time,
        samples,
    })
}

/// log(e^a + e^b) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
