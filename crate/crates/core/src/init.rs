//! Radially nonincreasing initial data and the supersolution check
//! Δu0 + f(u0) ≥ 0 used to place q = 0 runs in the type-I regime.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian_at, RadialGrid};
use crate::nonlinearity::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// A (1 - (r/R)^2)
    Parabolic { amplitude: f64 },
    /// Radial steady state w of -Δw = f(w) with w(0) = A, stretched so its
    /// first zero sits at R.
    ScaledSteady { amplitude: f64 },
    /// Spatially constant data (only meaningful with the Neumann test hook).
    Constant { value: f64 },
}

impl Profile {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Profile::Parabolic { amplitude } | Profile::ScaledSteady { amplitude } => amplitude,
            Profile::Constant { value } => value,
        }
    }

    pub fn with_amplitude(&self, a: f64) -> Profile {
        match self {
            Profile::Parabolic { .. } => Profile::Parabolic { amplitude: a },
            Profile::ScaledSteady { .. } => Profile::ScaledSteady { amplitude: a },
            Profile::Constant { .. } => Profile::Constant { value: a },
        }
    }

    pub fn sample(&self, nl: &Nonlinearity, grid: &RadialGrid) -> Result<Vec<f64>> {
        let a = self.amplitude();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::config("init.amplitude", "amplitude must be positive"));
        }
        let nodes = grid.nodes();
        match *self {
            Profile::Parabolic { amplitude } => Ok(nodes
                .iter()
                .map(|r| amplitude * (1.0 - (r / grid.radius).powi(2)).max(0.0))
                .collect()),
            Profile::Constant { value } => Ok(vec![value; nodes.len()]),
            Profile::ScaledSteady { amplitude } => {
                let branch = SteadyBranch::shoot(nl, grid.n, amplitude)?;
                let kappa = branch.first_zero / grid.radius;
                let mut out: Vec<f64> = nodes
                    .iter()
                    .map(|r| branch.eval(r * kappa).max(0.0))
                    .collect();
                *out.last_mut().unwrap() = 0.0;
                Ok(out)
            }
        }
    }
}

/// Dense RK4 table of the radial steady state up to its first zero.
struct SteadyBranch {
    r: Vec<f64>,
    w: Vec<f64>,
    dw: Vec<f64>,
    first_zero: f64,
}

impl SteadyBranch {
    fn shoot(nl: &Nonlinearity, n: u32, a: f64) -> Result<SteadyBranch> {
        let n = n as f64;
        let fa = nl.f(a)?;
        let scale = (2.0 * n / fa).sqrt();
        let step = 2e-4 * scale;
        // series start w = a - f(a) r^2 / (2n) avoids the (n-1)/r singularity
        let r0 = 1e-3 * step;
        let mut state = [a - fa * r0 * r0 / (2.0 * n), -fa * r0 / n];
        let mut r = r0;
        let rhs = |r: f64, s: [f64; 2]| -> Result<[f64; 2]> {
            let fw = nl.f(s[0].max(0.0))?;
            Ok([s[1], -fw - (n - 1.0) / r * s[1]])
        };
        let mut table = SteadyBranch {
            r: vec![0.0, r0],
            w: vec![a, state[0]],
            dw: vec![0.0, state[1]],
            first_zero: f64::NAN,
        };
        for _ in 0..50_000_000usize {
            let k1 = rhs(r, state)?;
            let mid = |k: [f64; 2], c: f64| [state[0] + c * step * k[0], state[1] + c * step * k[1]];
            let k2 = rhs(r + 0.5 * step, mid(k1, 0.5))?;
            let k3 = rhs(r + 0.5 * step, mid(k2, 0.5))?;
            let k4 = rhs(r + step, mid(k3, 1.0))?;
            let next = [
                state[0] + step / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                state[1] + step / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            let r_next = r + step;
            if next[0] <= 0.0 {
                // root of the cubic Hermite segment by bisection
                let (mut lo, mut hi) = (r, r_next);
                let seg = [(r, state[0], state[1]), (r_next, next[0], next[1])];
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hermite(seg[0], seg[1], mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                table.first_zero = 0.5 * (lo + hi);
                table.r.push(r_next);
                table.w.push(next[0]);
                table.dw.push(next[1]);
                return Ok(table);
            }
            state = next;
            r = r_next;
            table.r.push(r);
            table.w.push(state[0]);
            table.dw.push(state[1]);
        }
        Err(Error::Convergence {
            what: "steady-state shooting",
            iterations: 50_000_000,
        })
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.w[0];
        }
        let i = self.r.partition_point(|&v| v <= x).clamp(1, self.r.len() - 1) - 1;
        hermite(
            (self.r[i], self.w[i], self.dw[i]),
            (self.r[i + 1], self.w[i + 1], self.dw[i + 1]),
            x,
        )
    }
}

fn hermite(a: (f64, f64, f64), b: (f64, f64, f64), x: f64) -> f64 {
    let h = b.0 - a.0;
    let t = (x - a.0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * a.1
        + (t3 - 2.0 * t2 + t) * h * a.2
        + (-2.0 * t3 + 3.0 * t2) * b.1
        + (t3 - t2) * h * b.2
}

/// Node-wise Δ_h u0 + f(u0) at interior nodes.
pub fn supersolution_margin(nl: &Nonlinearity, grid: &RadialGrid, u0: &[f64]) -> Result<Vec<f64>> {
    (0..grid.cells)
        .map(|j| Ok(laplacian_at(grid, u0, j) + nl.f(u0[j])?))
        .collect()
}

pub fn is_supersolution(nl: &Nonlinearity, grid: &RadialGrid, u0: &[f64]) -> Result<bool> {
    let margin = supersolution_margin(nl, grid, u0)?;
    for (j, m) in margin.iter().enumerate() {
        if *m < -1e-9 * nl.f(u0[j])? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub profile: Profile,
    pub u0: Vec<f64>,
    /// Amplitude adjustments made by the supersolution search.
    pub adjustments: u32,
    pub supersolution: Option<bool>,
}

/// Samples the profile; for q = 0 enforces the supersolution condition by
/// rescaling the amplitude (parabolic data shrinks, steady-state data grows —
/// the directions in which the margin improves), capped at 50 attempts.
pub fn prepare(nl: &Nonlinearity, grid: &RadialGrid, profile: Profile, enforce: bool) -> Result<PreparedData> {
    let mut current = profile;
    let factor = match profile {
        Profile::Parabolic { .. } => 1.0 / 1.2,
        Profile::ScaledSteady { .. } => 1.2,
        Profile::Constant { .. } => 1.0,
    };
    let check = enforce && nl.q() == 0.0 && !matches!(profile, Profile::Constant { .. });
    for attempt in 0..=50u32 {
        let u0 = current.sample(nl, grid)?;
        if !check {
            return Ok(PreparedData {
                profile: current,
                u0,
                adjustments: 0,
                supersolution: None,
            });
        }
        if is_supersolution(nl, grid, &u0)? {
            return Ok(PreparedData {
                profile: current,
                u0,
                adjustments: attempt,
                supersolution: Some(true),
            });
        }
        current = current.with_amplitude(current.amplitude() * factor);
    }
    Err(Error::config(
        "init.amplitude",
        "no amplitude within 50 adjustments satisfies Δu0 + f(u0) >= 0",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nl() -> Nonlinearity {
        Nonlinearity::super_exponential(2.0, 0.0).unwrap()
    }

    #[test]
    fn parabolic_supersolution_threshold() {
        // Δu0 = -2nA, f >= 1: passes iff 2nA <= 1
        let g = RadialGrid::new(1, 1.0, 128).unwrap();
        let ok = Profile::Parabolic { amplitude: 0.45 }.sample(&nl(), &g).unwrap();
        assert!(is_supersolution(&nl(), &g, &ok).unwrap());
        let bad = Profile::Parabolic { amplitude: 0.6 }.sample(&nl(), &g).unwrap();
        assert!(!is_supersolution(&nl(), &g, &bad).unwrap());
        let prepared = prepare(&nl(), &g, Profile::Parabolic { amplitude: 0.6 }, true).unwrap();
        assert_eq!(prepared.adjustments, 1);
        assert!((prepared.profile.amplitude() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scaled_steady_profile_is_a_supersolution() {
        let g = RadialGrid::new(1, 1.0, 256).unwrap();
        let prepared = prepare(&nl(), &g, Profile::ScaledSteady { amplitude: 1.5 }, true).unwrap();
        assert_eq!(prepared.adjustments, 0);
        let u0 = &prepared.u0;
        assert!((u0[0] - 1.5).abs() < 1e-12);
        assert_eq!(*u0.last().unwrap(), 0.0);
        assert!(u0.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn steady_branch_solves_the_ode() {
        // n = 1: w'^2/2 + G(w) = G(a), G' = f; check energy conservation for f = e^u
        let e = Nonlinearity::exponential_reference();
        let b = SteadyBranch::shoot(&e, 1, 1.0).unwrap();
        for k in (0..b.r.len()).step_by(997) {
            let energy = 0.5 * b.dw[k].powi(2) + b.w[k].exp();
            assert!((energy - 1f64.exp()).abs() < 1e-9, "{energy}");
        }
        // closed form first zero: w = a - 2 ln cosh(c r), c = sqrt(e^a / 2)
        let c = (1f64.exp() / 2.0).sqrt();
        let zero = (0.5f64).exp().acosh() / c;
        assert!((b.first_zero - zero).abs() < 1e-9);
    }
}
