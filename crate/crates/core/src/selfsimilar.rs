//! Self-similar frames v(y, s) = (T − t)/F(u(y e^{−s/2}, t)), s = −log(T − t),
//! and the energy bookkeeping on the balls B_{s^α}.
//!
//! Everything is derived from Φ = −log F(u): log v = log(T − t) + Φ, so the
//! frame needs the compensated log gap of its snapshot and nothing else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient_radial, laplacian_at, RadialGrid};
use crate::interp::MonotoneCubic;
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{self, simpson, unit_sphere_area};
use crate::solver::Snapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarFrame {
    pub s: f64,
    pub alpha: f64,
    pub y_nodes: Vec<f64>,
    pub v: Vec<f64>,
    pub source_t: f64,
    pub n: u32,
    pub source_step: u64,
    /// True when the y-extent is cut below s^α (by the ball or Y_max).
    pub truncated: bool,
}

impl SelfSimilarFrame {
    pub fn extent(&self) -> f64 {
        *self.y_nodes.last().unwrap()
    }

    /// sup over nodes with |y| ≤ y_lim of |v − 1|.
    pub fn sup_deviation(&self, y_lim: f64) -> f64 {
        self.y_nodes
            .iter()
            .zip(&self.v)
            .filter(|(y, _)| **y <= y_lim * (1.0 + 1e-12))
            .map(|(_, v)| (v - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_v(&self, y_lim: f64) -> f64 {
        self.y_nodes
            .iter()
            .zip(&self.v)
            .filter(|(y, _)| **y <= y_lim * (1.0 + 1e-12))
            .map(|(_, v)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    fn y_grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.n, self.extent(), self.y_nodes.len() - 1)
    }
}

/// Φ(·, t) of one snapshot as a function of r.
pub struct RadialProfile {
    interp: MonotoneCubic,
    reach: f64,
}

impl RadialProfile {
    pub fn new(grid: &RadialGrid, snapshot: &Snapshot) -> Result<Self> {
        // drop the −∞ wall node (u = 0 with F(0) = ∞)
        let mut keep = snapshot.phi.len();
        while keep > 0 && !snapshot.phi[keep - 1].is_finite() {
            keep -= 1;
        }
        if keep < 4 {
            return Err(Error::domain("snapshot has too few finite Φ values"));
        }
        let nodes = grid.nodes();
        let interp = MonotoneCubic::with_left_slope(&nodes[..keep], &snapshot.phi[..keep], 0.0)?;
        Ok(RadialProfile {
            interp,
            reach: nodes[keep - 1],
        })
    }

    /// Largest r the profile covers.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn phi(&self, r: f64) -> Result<f64> {
        self.interp.eval(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub alpha: f64,
    /// Number of y-intervals.
    pub resolution: usize,
    pub y_max: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            alpha: 0.25,
            resolution: 256,
            y_max: 8.0,
        }
    }
}

/// Frame of a snapshot on its natural y-grid [0, min(s^α, R e^{s/2}, Y_max)].
pub fn to_frame(grid: &RadialGrid, snapshot: &Snapshot, log_gap: f64, spec: &FrameSpec) -> Result<SelfSimilarFrame> {
    let s = -log_gap;
    if !(s > 0.0) {
        return Err(Error::domain(format!("frames need s > 0, got s = {s}")));
    }
    let profile = RadialProfile::new(grid, snapshot)?;
    let ball = profile.reach() * (0.5 * s).exp();
    let target = s.powf(spec.alpha);
    let extent = target.min(ball).min(spec.y_max);
    let m = spec.resolution.max(crate::grid::MIN_CELLS);
    let y: Vec<f64> = (0..=m)
        .map(|i| if i == m { extent } else { extent * i as f64 / m as f64 })
        .collect();
    let mut frame = frame_from_profile(&profile, grid.n, snapshot, log_gap, spec.alpha, &y)?;
    frame.truncated = extent < target;
    Ok(frame)
}

/// Frame of a snapshot on prescribed y-nodes (used to put neighbouring
/// frames on a common grid).
pub fn to_frame_on(
    grid: &RadialGrid,
    snapshot: &Snapshot,
    log_gap: f64,
    alpha: f64,
    y_nodes: &[f64],
) -> Result<SelfSimilarFrame> {
    let profile = RadialProfile::new(grid, snapshot)?;
    frame_from_profile(&profile, grid.n, snapshot, log_gap, alpha, y_nodes)
}

fn frame_from_profile(
    profile: &RadialProfile,
    n: u32,
    snapshot: &Snapshot,
    log_gap: f64,
    alpha: f64,
    y: &[f64],
) -> Result<SelfSimilarFrame> {
    let s = -log_gap;
    let shrink = (-0.5 * s).exp();
    let mut v = Vec::with_capacity(y.len());
    for &yj in y {
        let r = yj * shrink;
        if r > profile.reach() * (1.0 + 1e-14) {
            return Err(Error::domain(format!(
                "y = {yj} maps to r = {r} outside the resolved ball (r <= {})",
                profile.reach()
            )));
        }
        v.push((log_gap + profile.phi(r.min(profile.reach()))?).exp());
    }
    Ok(SelfSimilarFrame {
        s,
        alpha,
        y_nodes: y.to_vec(),
        v,
        source_t: snapshot.t,
        n,
        source_step: snapshot.step_index,
        truncated: false,
    })
}

/// u at every node of a frame: log F(u) = −s − log v.
pub fn frame_u(nl: &Nonlinearity, frame: &SelfSimilarFrame) -> Result<Vec<f64>> {
    frame
        .v
        .iter()
        .map(|v| nl.f_inv_log(-frame.s - v.ln()))
        .collect()
}

fn check_common(a: &SelfSimilarFrame, b: &SelfSimilarFrame) -> Result<()> {
    if a.y_nodes != b.y_nodes {
        return Err(Error::domain("frames must share a y-grid"));
    }
    Ok(())
}

/// Three-point derivative in s on a non-uniform stencil, at the middle frame.
pub fn ds_middle(prev: &SelfSimilarFrame, mid: &SelfSimilarFrame, next: &SelfSimilarFrame) -> Result<Vec<f64>> {
    check_common(prev, mid)?;
    check_common(mid, next)?;
    let (h1, h2) = (mid.s - prev.s, next.s - mid.s);
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::domain("frames must be strictly s-ordered"));
    }
    let (a, b, c) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
    Ok((0..mid.v.len())
        .map(|j| a * prev.v[j] + b * mid.v[j] + c * next.v[j])
        .collect())
}

/// Pointwise residual of
/// v_s = Δv − (y/2)·∇v − |∇v|²/v + v² − v + (|∇v|²/v)(f'F − 1)
/// at the middle frame, on interior nodes (the last node is reported as 0).
pub fn residual_veq(
    prev: &SelfSimilarFrame,
    mid: &SelfSimilarFrame,
    next: &SelfSimilarFrame,
    nl: &Nonlinearity,
) -> Result<Vec<f64>> {
    let vs = ds_middle(prev, mid, next)?;
    let g = mid.y_grid()?;
    let v = &mid.v;
    let grad = gradient_radial(&g, v);
    let u = frame_u(nl, mid)?;
    let mut out = vec![0.0; v.len()];
    for j in 0..g.cells {
        let lap = laplacian_at(&g, v, j);
        let g2v = grad[j] * grad[j] / v[j];
        let pert = if g2v == 0.0 {
            0.0
        } else {
            -g2v * nl.one_minus_fprime_f(u[j])?
        };
        let rhs = lap - 0.5 * mid.y_nodes[j] * grad[j] - g2v + v[j] * v[j] - v[j] + pert;
        out[j] = vs[j] - rhs;
    }
    Ok(out)
}

/// Max norm of a residual weighted by the Gaussian ρ (|y| ≤ s^α).
pub fn weighted_max(frame: &SelfSimilarFrame, residual: &[f64]) -> f64 {
    frame
        .y_nodes
        .iter()
        .zip(residual)
        .map(|(y, r)| (r * (-y * y / 4.0).exp()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub s: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub dirichlet_part: f64,
    pub potential_part: f64,
    #[serde(rename = "H")]
    pub h: f64,
    /// ½∫(|∇v|/v)⁴ (f'F − 1)² ρ, the square part of H.
    pub h_square: f64,
    #[serde(rename = "G_boundary")]
    pub g_boundary: f64,
    pub vs_integral: f64,
    pub truncated: bool,
}

fn radial_weights(frame: &SelfSimilarFrame) -> Vec<f64> {
    let area = unit_sphere_area(frame.n as usize);
    frame
        .y_nodes
        .iter()
        .map(|y| area * y.powi(frame.n as i32 - 1) * (-y * y / 4.0).exp())
        .collect()
}

fn weighted_integral(frame: &SelfSimilarFrame, weights: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let integrand: Vec<f64> = values.zip(weights).map(|(a, w)| a * w).collect();
    let dy = frame.extent() / (frame.y_nodes.len() - 1) as f64;
    simpson(&integrand, dy)
}

/// Energy quantities of `mid`, with v_s from its neighbours (all three on
/// the same y-grid).
pub fn energy(
    prev: &SelfSimilarFrame,
    mid: &SelfSimilarFrame,
    next: &SelfSimilarFrame,
    nl: &Nonlinearity,
) -> Result<EnergyRecord> {
    let vs = ds_middle(prev, mid, next)?;
    let g = mid.y_grid()?;
    let v = &mid.v;
    let grad = gradient_radial(&g, v);
    let u = frame_u(nl, mid)?;
    let w = radial_weights(mid);
    let q: Vec<f64> = grad.iter().zip(v).map(|(d, v)| d * d / (v * v)).collect();
    let dirichlet_part = 0.5 * weighted_integral(mid, &w, q.iter().copied());
    let potential_part = weighted_integral(mid, &w, v.iter().map(|v| v - v.ln()));
    let mut pert = Vec::with_capacity(v.len());
    for (j, qj) in q.iter().enumerate() {
        pert.push(if *qj == 0.0 {
            0.0
        } else {
            qj * qj * nl.one_minus_fprime_f(u[j])?.powi(2)
        });
    }
    let h_square = 0.5 * weighted_integral(mid, &w, pert.into_iter());
    let vs_integral = 0.5 * weighted_integral(mid, &w, vs.iter().zip(v).map(|(a, v)| a * a / (v * v)));

    // boundary term on ∂B at the frame edge Y (= s^α unless truncated);
    // the flux term uses ∂v/∂ν, the derivative of the frame itself
    let last = v.len() - 1;
    let big_y = mid.extent();
    let surface = unit_sphere_area(mid.n as usize) * big_y.powi(mid.n as i32 - 1) * (-big_y * big_y / 4.0).exp();
    let flux = vs[last] / (v[last] * v[last]) * grad[last];
    let density = 0.5 * q[last] - v[last] + v[last].ln();
    let g_boundary = surface * (flux - mid.alpha / mid.s * density * big_y);

    Ok(EnergyRecord {
        s: mid.s,
        e: dirichlet_part - potential_part,
        dirichlet_part,
        potential_part,
        h: g_boundary + h_square,
        h_square,
        g_boundary,
        vs_integral,
        truncated: mid.truncated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCheck {
    pub s_left: f64,
    pub s_right: f64,
    /// ½∫v_s²/v²ρ at the interval midpoint.
    pub lhs: f64,
    /// −dE/ds + H at the midpoint.
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Interval-wise check of ½∫v_s²/v² ρ ≤ −dE/ds + H (+ slack).
pub fn energy_inequality_check(records: &[EnergyRecord], slack: f64) -> Vec<IntervalCheck> {
    records
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let ds = b.s - a.s;
            let lhs = 0.5 * (a.vs_integral + b.vs_integral);
            let rhs = (a.e - b.e) / ds + 0.5 * (a.h + b.h);
            IntervalCheck {
                s_left: a.s,
                s_right: b.s,
                lhs,
                rhs,
                slack,
                holds: lhs <= rhs + slack,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryIdentity {
    pub i1: f64,
    pub i2: f64,
    pub residual: f64,
}

/// I1 = ¼∫|∇v|²/v² |y|² ρ, I2 = ∫|∇v|²/v² ρ, residual = I1 + (2 − n)/2 · I2.
pub fn stationary_identity(frame: &SelfSimilarFrame) -> Result<StationaryIdentity> {
    let g = frame.y_grid()?;
    let grad = gradient_radial(&g, &frame.v);
    let w = radial_weights(frame);
    let q: Vec<f64> = grad.iter().zip(&frame.v).map(|(d, v)| d * d / (v * v)).collect();
    let i1 = 0.25 * weighted_integral(frame, &w, q.iter().zip(&frame.y_nodes).map(|(q, y)| q * y * y));
    let i2 = weighted_integral(frame, &w, q.iter().copied());
    Ok(StationaryIdentity {
        i1,
        i2,
        residual: i1 + (2.0 - frame.n as f64) / 2.0 * i2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeibnizFunction {
    /// g ≡ 1
    Constant,
    /// g = e^{−|y|²/4}
    Gaussian,
    /// g = s |y|² e^{−|y|²/4}
    PolyGaussian,
}

impl LeibnizFunction {
    pub const ALL: [LeibnizFunction; 3] = [
        LeibnizFunction::Constant,
        LeibnizFunction::Gaussian,
        LeibnizFunction::PolyGaussian,
    ];

    fn g(&self, y: f64, s: f64) -> f64 {
        match self {
            LeibnizFunction::Constant => 1.0,
            LeibnizFunction::Gaussian => (-y * y / 4.0).exp(),
            LeibnizFunction::PolyGaussian => s * y * y * (-y * y / 4.0).exp(),
        }
    }

    fn g_s(&self, y: f64, _s: f64) -> f64 {
        match self {
            LeibnizFunction::Constant | LeibnizFunction::Gaussian => 0.0,
            LeibnizFunction::PolyGaussian => y * y * (-y * y / 4.0).exp(),
        }
    }
}

fn ball_integral(n: u32, radius: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let area = unit_sphere_area(n as usize);
    Ok(quadrature::integrate(|y| area * y.powi(n as i32 - 1) * g(y), 0.0, radius, 1e-15, 1e-14)?.value)
}

/// max over s of |d/ds ∫_{B_{s^α}} g − ∫ g_s − (α/s)∮ g (y·ν) dS|, the
/// s-derivative by a five-point difference of accurate quadratures.
pub fn leibniz_check(alpha: f64, function: LeibnizFunction, s_samples: &[f64], n: u32) -> Result<f64> {
    let mut worst = 0.0f64;
    for &s in s_samples {
        if !(s > 0.0) {
            return Err(Error::domain("Leibniz samples need s > 0"));
        }
        let total = |s: f64| ball_integral(n, s.powf(alpha), |y| function.g(y, s));
        // step proportional to s: the radius s^α varies on the scale s
        let d = 2e-3 * s;
        let lhs = (-total(s + 2.0 * d)? + 8.0 * total(s + d)? - 8.0 * total(s - d)? + total(s - 2.0 * d)?)
            / (12.0 * d);
        let radius = s.powf(alpha);
        let interior = ball_integral(n, radius, |y| function.g_s(y, s))?;
        let surface = unit_sphere_area(n as usize) * radius.powi(n as i32 - 1);
        let rhs = interior + alpha / s * function.g(radius, s) * radius * surface;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
