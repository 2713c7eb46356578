//! Radial finite-difference solver in the Φ = −log F(u) representation.
//!
//! In Φ the equation reads Φ_t = ΔΦ + e^Φ + (∂_rΦ)² (f'(u)F(u) − 1), and near
//! blow-up Φ(0, t) ≈ −log(T − t): the singularity becomes a logarithmically
//! slow drift that double precision can follow to s ≈ 700.
//!
//! Linear time saturates long before that (T − t drops below ulp(t)), so the
//! solver also records, for each snapshot window, the log of the elapsed time
//! accumulated inside the window. Remaining lifetimes are then reconstructed
//! backwards from the final state, never by subtracting nearby times.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{laplacian_at, RadialGrid};
use crate::nonlinearity::{Nonlinearity, LN_MAX};
use crate::ode::log_add_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repr {
    PhiSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Φ at the nodes; `-∞` marks u = 0 when F(0) diverges.
    pub phi: Vec<f64>,
    pub repr: Repr,
    /// u(0, t).
    pub umax: f64,
    pub step_index: u64,
    /// log of the time elapsed since the previous snapshot (`-∞` for the first).
    pub log_window: f64,
}

impl Snapshot {
    pub fn phi_max(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn center(&self) -> f64 {
        self.phi[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// u = 0 at r = R.
    Dirichlet,
    /// Zero flux at r = R; turns spatially constant data into the ODE.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    /// Fraction of the explicit diffusion limit h²/(2n).
    pub safety: f64,
    /// Fraction of the reaction time scale e^{-Φmax}.
    pub reaction_safety: f64,
    /// Allowed increase of Φ along r, relative to |Φ(0)|.
    pub monotone_tol: f64,
    pub max_halvings: u32,
}

impl Default for Controller {
    fn default() -> Self {
        Controller {
            safety: 0.4,
            reaction_safety: 0.02,
            monotone_tol: 1e-9,
            max_halvings: 40,
        }
    }
}

pub type Source = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SolverOptions {
    pub controller: Controller,
    pub boundary: Boundary,
    /// Test hook: evolve Φ_t = ΔΦ only (no reaction, no u recovery).
    pub diffusion_only: bool,
    /// Test hook: extra term S(r, t) added to the Φ equation.
    pub source: Option<Source>,
    /// Below this u the boundary layer is advanced through the u-equation
    /// (only when F(0) = ∞, where Φ → −∞ at the wall).
    pub u_switch: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            controller: Controller::default(),
            boundary: Boundary::Dirichlet,
            diffusion_only: false,
            source: None,
            u_switch: 0.5,
        }
    }
}

impl std::fmt::Debug for SolverOptions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverOptions")
            .field("controller", &self.controller)
            .field("boundary", &self.boundary)
            .field("diffusion_only", &self.diffusion_only)
            .field("source", &self.source.is_some())
            .field("u_switch", &self.u_switch)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub phi_stop: f64,
    /// Snapshot every time Φmax crosses another multiple of this spacing.
    pub snapshot_spacing: f64,
    /// Below this Φmax snapshots are taken every `dense_spacing` instead
    /// (the early window, where the grid still resolves the parabolic scale).
    pub dense_until: f64,
    pub dense_spacing: f64,
    pub t_max: f64,
    pub max_steps: u64,
    /// max |Φ_t| below this is taken as convergence to a steady state.
    pub stall_rate: f64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            phi_stop: 400.0,
            snapshot_spacing: 1.0,
            dense_until: f64::NEG_INFINITY,
            dense_spacing: 0.1,
            t_max: 1e3,
            max_steps: 5_000_000,
            stall_rate: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub dt: f64,
    pub halvings: u32,
    pub max_rate: f64,
}

/// Compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

pub struct PhiSolver {
    nl: Nonlinearity,
    grid: RadialGrid,
    opts: SolverOptions,
    phi: Vec<f64>,
    u: Vec<f64>,
    t: Kahan,
    step_index: u64,
    // window accumulator, scaled by e^{window_ref}
    window: Kahan,
    window_ref: f64,
    log_window_start: bool,
    boundary_phi: f64,
}

impl PhiSolver {
    /// Starts from u-space data.
    pub fn new(nl: Nonlinearity, grid: RadialGrid, u0: &[f64], opts: SolverOptions) -> Result<Self> {
        if u0.len() != grid.len() {
            return Err(Error::domain("initial data must have J+1 entries"));
        }
        if opts.diffusion_only {
            return Self::from_phi(nl, grid, u0.to_vec(), opts);
        }
        let mut phi = Vec::with_capacity(u0.len());
        for (j, &u) in u0.iter().enumerate() {
            if !(u >= 0.0 && u.is_finite()) {
                return Err(Error::NonFinite { index: j, value: u });
            }
            phi.push(-nl.ln_big_f(u)?);
        }
        let mut s = Self::assemble(nl, grid, phi, opts);
        s.u = u0.to_vec();
        if s.opts.boundary == Boundary::Dirichlet {
            *s.u.last_mut().unwrap() = 0.0;
            *s.phi.last_mut().unwrap() = s.boundary_phi;
        }
        Ok(s)
    }

    /// Starts from Φ directly (u recovered by inversion).
    pub fn from_phi(nl: Nonlinearity, grid: RadialGrid, phi: Vec<f64>, opts: SolverOptions) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::domain("Φ must have J+1 entries"));
        }
        let mut s = Self::assemble(nl, grid, phi, opts);
        if !s.opts.diffusion_only {
            let mut u = vec![0.0; s.phi.len()];
            s.recover_u(&s.phi.clone(), &mut u, None)?;
            s.u = u;
        }
        Ok(s)
    }

    fn assemble(nl: Nonlinearity, grid: RadialGrid, phi: Vec<f64>, opts: SolverOptions) -> Self {
        let boundary_phi = if opts.diffusion_only {
            *phi.last().unwrap()
        } else {
            -nl.ln_big_f_at_zero()
        };
        let n = phi.len();
        PhiSolver {
            nl,
            grid,
            opts,
            phi,
            u: vec![0.0; n],
            t: Kahan::default(),
            step_index: 0,
            window: Kahan::default(),
            window_ref: 0.0,
            log_window_start: true,
            boundary_phi,
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn time(&self) -> f64 {
        self.t.sum
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn phi_max(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn dirichlet(&self) -> bool {
        self.opts.boundary == Boundary::Dirichlet
    }

    /// Current state as a snapshot; closes the running time window.
    pub fn snapshot(&mut self) -> Snapshot {
        let log_window = if self.log_window_start {
            f64::NEG_INFINITY
        } else if self.window.sum > 0.0 {
            self.window.sum.ln() - self.window_ref
        } else {
            f64::NEG_INFINITY
        };
        self.log_window_start = false;
        self.window = Kahan::default();
        self.window_ref = self.phi_max().min(LN_MAX).max(0.0);
        Snapshot {
            t: self.t.sum,
            phi: self.phi.clone(),
            repr: Repr::PhiSpace,
            umax: self.u[0],
            step_index: self.step_index,
            log_window,
        }
    }

    /// u = F^{-1}(e^{-Φ}) node-wise; `warm` is a previous (Φ, u) pair used
    /// as Newton seed, and reused verbatim where Φ did not change.
    fn recover_u(&self, phi: &[f64], u: &mut [f64], warm: Option<(&[f64], &[f64])>) -> Result<()> {
        let l0 = self.nl.ln_big_f_at_zero();
        for j in 0..phi.len() {
            if let Some((p_old, u_old)) = warm {
                if p_old[j] == phi[j] {
                    u[j] = u_old[j];
                    continue;
                }
            }
            let log_y = -phi[j];
            if log_y == f64::INFINITY {
                u[j] = 0.0;
                continue;
            }
            if !log_y.is_finite() {
                return Err(Error::NonFinite { index: j, value: phi[j] });
            }
            // tiny overshoot below u = 0 is clipped to the boundary value
            if log_y >= l0 {
                u[j] = 0.0;
                continue;
            }
            let guess = warm.map(|(_, w)| w[j]).filter(|g| *g > 0.0);
            u[j] = self.nl.f_inv_log_from(log_y, guess)?;
        }
        Ok(())
    }

    /// Φ_t at every node (zero on Dirichlet nodes).
    pub fn rhs(&self, phi: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>> {
        let g = &self.grid;
        let last = g.cells;
        let h = g.h();
        let mut out = vec![0.0; phi.len()];
        let interior_end = if self.dirichlet() { last } else { last + 1 };
        let wall_singular = self.dirichlet() && !self.opts.diffusion_only && self.boundary_phi == f64::NEG_INFINITY;
        for j in 0..interior_end {
            let lap = if j == last {
                // mirrored ghost node: zero flux
                2.0 * (phi[last - 1] - phi[last]) / (h * h)
            } else {
                laplacian_at(g, phi, j)
            };
            let mut rate = if self.opts.diffusion_only {
                lap
            } else if wall_singular && (j + 1 == last || u[j] < self.opts.u_switch) {
                self.u_space_rate(u, j)?
            } else {
                if phi[j] > LN_MAX {
                    return Err(Error::Overflow { u: u[j] });
                }
                let grad = if j == 0 || j == last {
                    0.0
                } else {
                    (phi[j + 1] - phi[j - 1]) / (2.0 * h)
                };
                let coeff = if grad == 0.0 {
                    0.0
                } else {
                    self.fprime_f_minus_one(u[j], phi[j])?
                };
                lap + phi[j].exp() + grad * grad * coeff
            };
            if let Some(src) = &self.opts.source {
                rate += src(g.r(j), t);
            }
            if !rate.is_finite() {
                return Err(Error::NonFinite { index: j, value: rate });
            }
            out[j] = rate;
        }
        Ok(out)
    }

    // f'F − 1 with log F = −Φ already known
    fn fprime_f_minus_one(&self, u: f64, phi: f64) -> Result<f64> {
        let lfp = self.nl.log_f_prime(u)?;
        if lfp == f64::NEG_INFINITY {
            return Ok(-1.0);
        }
        match self.nl.family() {
            crate::nonlinearity::Family::SuperExponential => Ok((lfp - phi).exp_m1()),
            _ => Ok(-self.nl.one_minus_fprime_f(u)?),
        }
    }

    // Φ_t = (Δu + f(u)) / (f F) = e^Φ (1 + Δu / f)
    fn u_space_rate(&self, u: &[f64], j: usize) -> Result<f64> {
        let lap = laplacian_at(&self.grid, u, j);
        let lf = self.nl.log_f(u[j])?;
        let phi = -self.nl.ln_big_f(u[j])?;
        Ok((phi).exp() + lap * (phi - lf).exp())
    }

    fn monotone(&self, phi: &[f64]) -> bool {
        let tol = self.opts.controller.monotone_tol * phi[0].abs().max(1.0);
        phi.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Suggested dt for the current state.
    pub fn suggested_dt(&self) -> f64 {
        let c = &self.opts.controller;
        let diffusion = c.safety * self.grid.diffusion_dt();
        if self.opts.diffusion_only {
            return diffusion;
        }
        let pm = self.phi_max().min(LN_MAX);
        diffusion.min(c.reaction_safety * (-pm).exp())
    }

    fn try_step(&self, dt: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let t = self.t.sum;
        let k1 = self.rhs(&self.phi, &self.u, t)?;
        let max_rate = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut mid: Vec<f64> = self.phi.iter().zip(&k1).map(|(p, k)| p + 0.5 * dt * k).collect();
        let mut u_mid = self.u.clone();
        if !self.opts.diffusion_only {
            self.recover_u(&mid, &mut u_mid, Some((&self.phi, &self.u)))?;
            self.clip_below_boundary(&mut mid);
        }
        let k2 = self.rhs(&mid, &u_mid, t + 0.5 * dt)?;
        let mut next: Vec<f64> = self.phi.iter().zip(&k2).map(|(p, k)| p + dt * k).collect();
        let mut u_next = self.u.clone();
        if !self.opts.diffusion_only {
            self.recover_u(&next, &mut u_next, Some((&self.phi, &self.u)))?;
            self.clip_below_boundary(&mut next);
        }
        Ok((next, u_next, max_rate))
    }

    fn clip_below_boundary(&self, phi: &mut [f64]) {
        let floor = self.boundary_phi;
        if floor.is_finite() {
            for p in phi.iter_mut() {
                if *p < floor {
                    *p = floor;
                }
            }
        }
    }

    /// One RK2 (midpoint) step with the controller's dt, halving on loss of
    /// radial monotonicity.
    pub fn step(&mut self) -> Result<StepInfo> {
        let base = self.suggested_dt();
        let floor = 1e-3 * self.opts.controller.reaction_safety.recip().min(1.0)
            * (-self.phi_max().min(LN_MAX)).exp()
            * self.opts.controller.reaction_safety;
        let mut dt = base;
        for halvings in 0..=self.opts.controller.max_halvings {
            match self.try_step(dt) {
                Ok((phi, u, max_rate)) if self.monotone(&phi) => {
                    self.commit(dt, phi, u);
                    return Ok(StepInfo { dt, halvings, max_rate });
                }
                Ok(_) | Err(Error::Domain(_)) | Err(Error::Convergence { .. }) => {}
                Err(e) => return Err(e),
            }
            dt *= 0.5;
            if !self.opts.diffusion_only && dt < floor {
                break;
            }
        }
        Err(Error::StepUnderflow(self.state_dump(dt)))
    }

    /// Step of exactly `dt` (no monotonicity retry); used by probes.
    pub fn step_fixed(&mut self, dt: f64) -> Result<StepInfo> {
        let (phi, u, max_rate) = self.try_step(dt)?;
        self.commit(dt, phi, u);
        Ok(StepInfo {
            dt,
            halvings: 0,
            max_rate,
        })
    }

    fn commit(&mut self, dt: f64, phi: Vec<f64>, u: Vec<f64>) {
        self.phi = phi;
        self.u = u;
        if self.dirichlet() {
            *self.phi.last_mut().unwrap() = self.boundary_phi;
            if !self.opts.diffusion_only {
                *self.u.last_mut().unwrap() = 0.0;
            }
        }
        self.t.add(dt);
        self.window.add(dt * self.window_ref.exp());
        self.step_index += 1;
    }

    fn state_dump(&self, dt: f64) -> String {
        format!(
            "dt = {dt:e} at step {} (t = {:.17e}, Φmax = {:.17e}, u(0) = {:.17e}, Φ(0..4) = {:?})",
            self.step_index,
            self.t.sum,
            self.phi_max(),
            self.u[0],
            &self.phi[..self.phi.len().min(4)]
        )
    }

    /// Three consecutive states at a fixed step dt (the centre one is the
    /// current state after the first step).
    pub fn probe_triple(&mut self, dt: f64) -> Result<[Snapshot; 3]> {
        let a = self.peek();
        self.step_fixed(dt)?;
        let b = self.peek();
        self.step_fixed(dt)?;
        let c = self.peek();
        Ok([a, b, c])
    }

    fn peek(&self) -> Snapshot {
        Snapshot {
            t: self.t.sum,
            phi: self.phi.clone(),
            repr: Repr::PhiSpace,
            umax: self.u[0],
            step_index: self.step_index,
            log_window: f64::NAN,
        }
    }

    /// Integrates to `t_end` (last step shortened to land on it).
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t.sum < t_end {
            let remaining = t_end - self.t.sum;
            if remaining <= 1e-15 * t_end.abs().max(1.0) {
                break;
            }
            let dt = self.suggested_dt();
            if dt >= remaining {
                self.step_fixed(remaining)?;
            } else {
                self.step()?;
            }
        }
        Ok(())
    }

    /// Runs until Φmax reaches `limits.phi_stop`, snapshotting at every
    /// scheduled Φmax level.
    pub fn run_to_blowup(&mut self, limits: &RunLimits) -> Result<Vec<Snapshot>> {
        let mut out = vec![self.snapshot()];
        let spacing = |level: f64| {
            if level < limits.dense_until {
                limits.dense_spacing
            } else {
                limits.snapshot_spacing
            }
        };
        let start = self.phi_max();
        let mut next_level = ((start / spacing(start)).floor() + 1.0) * spacing(start);
        loop {
            let info = self.step()?;
            let pm = self.phi_max();
            if pm >= limits.phi_stop {
                out.push(self.snapshot());
                return Ok(out);
            }
            if pm >= next_level {
                out.push(self.snapshot());
                while next_level <= pm {
                    next_level += spacing(next_level);
                }
            }
            if info.max_rate < limits.stall_rate {
                return Err(Error::GlobalExistence(format!(
                    "max |Φ_t| = {:e} < {:e} at t = {:.6} (Φmax = {:.6}): solution is settling to a steady state",
                    info.max_rate,
                    limits.stall_rate,
                    self.t.sum,
                    pm
                )));
            }
            if self.t.sum > limits.t_max {
                return Err(Error::GlobalExistence(format!(
                    "no blow-up by t_max = {} (Φmax = {:.6})",
                    limits.t_max, pm
                )));
            }
            if self.step_index >= limits.max_steps {
                return Err(Error::StepUnderflow(format!(
                    "step budget of {} exhausted at t = {:.6}, Φmax = {:.6}",
                    limits.max_steps, self.t.sum, pm
                )));
            }
        }
    }
}

/// Φ_t for a stand-alone snapshot (u recovered pointwise by inversion).
pub fn rhs_phi(nl: &Nonlinearity, grid: &RadialGrid, snapshot: &Snapshot) -> Result<Vec<f64>> {
    let solver = PhiSolver::from_phi(*nl, *grid, snapshot.phi.clone(), SolverOptions::default())?;
    solver.rhs(&snapshot.phi, &solver.u, snapshot.t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    /// Estimated blow-up time (linear; saturates like t itself).
    pub t_est: f64,
    /// log(T_est − t_last), the quantity that stays meaningful.
    pub log_gap_last: f64,
    pub method: String,
    /// Absolute uncertainty of T_est (spread of the last extrapolants).
    pub uncertainty: f64,
    /// uncertainty / (T_est − t_last).
    pub relative_uncertainty: f64,
    /// T_k − t_last, scaled by 1/(T_est − t_last), for the snapshots used.
    pub scaled_sequence: Vec<f64>,
    /// Set when the T_k sequence is non-monotone beyond the uncertainty.
    pub warning: Option<String>,
}

/// T_k = t_k + F(u(0, t_k)) for the tail of the run, extrapolated by
/// Aitken Δ². Formed relative to the last snapshot so that nothing is
/// differenced at the scale of t.
pub fn estimate_t(snapshots: &[Snapshot]) -> Result<BlowupEstimate> {
    let n = snapshots.len();
    if n < 5 {
        return Err(Error::domain(format!("estimate_T needs >= 5 snapshots, got {n}")));
    }
    let last = &snapshots[n - 1];
    let scale = last.center();
    // d_k = (F(u0_k) − elapsed(k → last)) · e^{Φ0_last}
    let tail = 5usize;
    let mut d = Vec::with_capacity(tail);
    for k in n - tail..n {
        let mut elapsed = 0.0;
        for s in &snapshots[k + 1..n] {
            elapsed += (s.log_window + scale).exp();
        }
        d.push((scale - snapshots[k].center()).exp() - elapsed);
    }
    if !snapshots[n - tail..].windows(2).all(|w| w[1].umax > w[0].umax) {
        return Err(Error::domain("estimate_T needs increasing umax over the last snapshots"));
    }
    let mut extrapolants = Vec::new();
    for w in d.windows(3) {
        let (x0, x1, x2) = (w[0], w[1], w[2]);
        let denom = (x2 - x1) - (x1 - x0);
        if denom.abs() > 1e-14 * x2.abs().max(1.0) {
            let a = x2 - (x2 - x1).powi(2) / denom;
            if a.is_finite() && a > 0.0 {
                extrapolants.push(a);
            }
        }
    }
    let (value, method, spread) = if extrapolants.len() == 3 {
        let lo = extrapolants.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = extrapolants.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (extrapolants[2], "aitken", hi - lo)
    } else {
        let last3 = &d[tail - 3..];
        let lo = last3.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = last3.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (d[tail - 1], "last_value", hi - lo)
    };
    if !(value > 0.0) {
        return Err(Error::domain("blow-up time extrapolation is not after the last snapshot"));
    }
    let log_gap_last = value.ln() - scale;
    let increments: Vec<f64> = d.windows(2).map(|w| w[1] - w[0]).collect();
    let up = increments.iter().any(|x| *x > spread);
    let down = increments.iter().any(|x| *x < -spread);
    let warning = (up && down).then(|| "T_k sequence is non-monotone beyond the uncertainty".to_string());
    let gap = log_gap_last.exp();
    Ok(BlowupEstimate {
        t_est: last.t + gap,
        log_gap_last,
        method: method.to_string(),
        uncertainty: spread * (-scale).exp(),
        relative_uncertainty: spread / value,
        scaled_sequence: d.iter().map(|x| x / value).collect(),
        warning,
    })
}

/// log(T − t_k) for every snapshot, accumulated backwards from the estimate.
pub fn log_gaps(snapshots: &[Snapshot], estimate: &BlowupEstimate) -> Vec<f64> {
    let n = snapshots.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    out[n - 1] = estimate.log_gap_last;
    for k in (0..n - 1).rev() {
        out[k] = log_add_exp(out[k + 1], snapshots[k + 1].log_window);
    }
    out
}

/// log(T_est − t_first): the resolved time window of the run.
pub fn log_window_length(snapshots: &[Snapshot], estimate: &BlowupEstimate) -> f64 {
    log_gaps(snapshots, estimate).first().copied().unwrap_or(f64::NAN)
}
