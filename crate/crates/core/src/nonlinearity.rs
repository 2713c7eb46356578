//! The nonlinearity f(u) = e^{u^p} u^q and its lifetime function
//! F(u) = ∫_u^∞ ds / f(s), evaluated in log space.
//!
//! For the super-exponential family the substitution t = s^p gives
//! F(u) = Γ((1-q)/p, u^p) / p, so everything reduces to one log-space
//! incomplete gamma kernel. Two reference families with closed forms
//! (e^u and u^p) share the same interface for cross-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incgamma::ln_upper_gamma;
use crate::quadrature;

/// Largest `x` with `e^x` finite in f64.
pub const LN_MAX: f64 = 709.782_712_893_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SuperExponential,
    PureExponentialReference,
    PowerReference,
}

/// Natural log of a positive quantity. `±∞` are used as sentinels for 0 and ∞.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue {
    pub log_magnitude: f64,
}

impl LogValue {
    pub fn new(log_magnitude: f64) -> Self {
        LogValue { log_magnitude }
    }

    /// Linear value; 0 or ∞ outside the representable range.
    pub fn exp(self) -> f64 {
        self.log_magnitude.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nonlinearity {
    p: f64,
    q: f64,
    family: Family,
    threshold: f64,
}

impl Nonlinearity {
    /// f(u) = e^{u^p} u^q with p > 1 and q ∈ {0} ∪ [1, ∞).
    pub fn super_exponential(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("super-exponential family needs p > 1, got {p}")));
        }
        if !(q == 0.0 || q >= 1.0) || !q.is_finite() {
            return Err(Error::domain(format!(
                "super-exponential family needs q in {{0}} ∪ [1, ∞), got {q}"
            )));
        }
        let mut nl = Nonlinearity {
            p,
            q,
            family: Family::SuperExponential,
            threshold: 0.0,
        };
        nl.threshold = nl.compute_threshold();
        Ok(nl)
    }

    /// f(u) = e^u, F(u) = e^{-u}.
    pub fn exponential_reference() -> Self {
        Nonlinearity {
            p: 1.0,
            q: 0.0,
            family: Family::PureExponentialReference,
            threshold: 0.0,
        }
    }

    /// f(u) = u^p, F(u) = u^{1-p} / (p - 1).
    pub fn power_reference(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("power family needs p > 1, got {p}")));
        }
        Ok(Nonlinearity {
            p,
            q: 0.0,
            family: Family::PowerReference,
            threshold: 0.0,
        })
    }

    pub fn from_parts(family: Family, p: f64, q: f64) -> Result<Self> {
        match family {
            Family::SuperExponential => Self::super_exponential(p, q),
            Family::PureExponentialReference => {
                if p != 1.0 || q != 0.0 {
                    return Err(Error::domain(format!(
                        "exponential reference is (p, q) = (1, 0), got ({p}, {q})"
                    )));
                }
                Ok(Self::exponential_reference())
            }
            Family::PowerReference => Self::power_reference(p),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Incomplete gamma parameter (1 - q) / p.
    fn gamma_a(&self) -> f64 {
        (1.0 - self.q) / self.p
    }

    fn check_u(u: f64) -> Result<()> {
        if u >= 0.0 && u.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!("u must be finite and nonnegative, got {u}")))
        }
    }

    /// log f(u), `-∞` when f(u) = 0.
    pub fn log_f(&self, u: f64) -> Result<f64> {
        Self::check_u(u)?;
        Ok(match self.family {
            Family::SuperExponential => {
                if self.q == 0.0 {
                    u.powf(self.p)
                } else if u == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    u.powf(self.p) + self.q * u.ln()
                }
            }
            Family::PureExponentialReference => u,
            Family::PowerReference => self.p * u.ln(),
        })
    }

    /// f(u) in linear space; errors once e^{u^p} would overflow.
    pub fn f(&self, u: f64) -> Result<f64> {
        let lf = self.log_f(u)?;
        if lf > LN_MAX {
            return Err(Error::Overflow { u });
        }
        Ok(lf.exp())
    }

    /// log f'(u) for u > 0 (u = 0 allowed when q = 0, giving f'(0) = 0).
    pub fn log_f_prime(&self, u: f64) -> Result<f64> {
        Self::check_u(u)?;
        match self.family {
            Family::SuperExponential => {
                if u == 0.0 {
                    if self.q == 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    return Err(Error::domain("f'(0) is undefined for q >= 1 (u^{-1} factor)"));
                }
                let up = u.powf(self.p);
                Ok((self.p * up / u + self.q / u).ln() + up + self.q * u.ln())
            }
            Family::PureExponentialReference => Ok(u),
            Family::PowerReference => {
                if u == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                Ok(self.p.ln() + (self.p - 1.0) * u.ln())
            }
        }
    }

    pub fn f_prime(&self, u: f64) -> Result<f64> {
        let l = self.log_f_prime(u)?;
        if l > LN_MAX {
            return Err(Error::Overflow { u });
        }
        Ok(l.exp())
    }

    /// log F(u). `+∞` at u = 0 whenever F(0) diverges (q ≥ 1, power family).
    pub fn log_big_f(&self, u: f64) -> Result<LogValue> {
        Self::check_u(u)?;
        let v = match self.family {
            Family::SuperExponential => {
                ln_upper_gamma(self.gamma_a(), u.powf(self.p))? - self.p.ln()
            }
            Family::PureExponentialReference => -u,
            Family::PowerReference => {
                if u == 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 - self.p) * u.ln() - (self.p - 1.0).ln()
                }
            }
        };
        Ok(LogValue::new(v))
    }

    /// Raw log F used on hot paths.
    pub fn ln_big_f(&self, u: f64) -> Result<f64> {
        Ok(self.log_big_f(u)?.log_magnitude)
    }

    /// log F(0); `+∞` when F(0) diverges.
    pub fn ln_big_f_at_zero(&self) -> f64 {
        match self.family {
            Family::SuperExponential if self.q == 0.0 => {
                libm::lgamma(1.0 / self.p) - self.p.ln()
            }
            Family::SuperExponential => f64::INFINITY,
            Family::PureExponentialReference => 0.0,
            Family::PowerReference => f64::INFINITY,
        }
    }

    /// log(f(u) F(u)); d/du log F = -exp(-this).
    pub fn ln_f_big_f(&self, u: f64) -> Result<f64> {
        Ok(self.log_f(u)? + self.ln_big_f(u)?)
    }

    /// Leading-order seed (-log y)^{1/p} for the inverse of F.
    pub fn asymptote_f_inv(&self, log_y: f64) -> f64 {
        (-log_y).max(0.0).powf(1.0 / self.p)
    }

    /// F^{-1}(y) given log y. Accepts y as small as e^{-10^6} and beyond.
    pub fn f_inv_log(&self, log_y: f64) -> Result<f64> {
        self.f_inv_log_from(log_y, None)
    }

    /// F^{-1} with an optional warm-start guess (used by the solver, where the
    /// previous state is an excellent seed).
    pub fn f_inv_log_from(&self, log_y: f64, guess: Option<f64>) -> Result<f64> {
        if log_y.is_nan() {
            return Err(Error::domain("F^{-1} of NaN"));
        }
        if log_y == f64::NEG_INFINITY {
            return Err(Error::domain("F^{-1}(0): y must be positive (upper bound u < ∞ failed)"));
        }
        let l0 = self.ln_big_f_at_zero();
        if log_y > l0 {
            return Err(Error::domain(format!(
                "log y = {log_y} exceeds log F(0) = {l0}: y is outside the range of F (lower bound u >= 0 failed)"
            )));
        }
        match self.family {
            Family::PureExponentialReference => return Ok(-log_y),
            Family::PowerReference => {
                return Ok((-((self.p - 1.0).ln() + log_y) / (self.p - 1.0)).exp())
            }
            Family::SuperExponential => {}
        }
        if log_y == l0 {
            return Ok(0.0);
        }
        if let Some(g) = guess {
            if g > 0.0 && g.is_finite() {
                if let Some(u) = self.newton_unbracketed(log_y, g) {
                    return Ok(u);
                }
            }
        }
        self.newton_bracketed(log_y)
    }

    fn converged(&self, residual: f64, log_y: f64) -> bool {
        residual.abs() <= 4.0 * f64::EPSILON * log_y.abs().max(1.0)
    }

    fn newton_unbracketed(&self, log_y: f64, mut u: f64) -> Option<f64> {
        for _ in 0..12 {
            let lf = self.ln_big_f(u).ok()?;
            let r = lf - log_y;
            if self.converged(r, log_y) {
                return Some(u);
            }
            let scale = (self.log_f(u).ok()? + lf).exp(); // f F = -1 / (d log F / du)
            let next = u + r * scale;
            if !(next > 0.0) || !next.is_finite() {
                return None;
            }
            if (next - u).abs() <= 1e-15 * u {
                return Some(next);
            }
            u = next;
        }
        None
    }

    fn newton_bracketed(&self, log_y: f64) -> Result<f64> {
        // log F is strictly decreasing; keep lo with log F(lo) > log_y > log F(hi).
        let mut lo = 0.0;
        let mut hi = self.asymptote_f_inv(log_y).max(1e-3) * 2.0 + 1.0;
        let mut grow = 0;
        while self.ln_big_f(hi)? > log_y {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 2000 {
                return Err(Error::Convergence {
                    what: "F^{-1} bracket",
                    iterations: grow,
                });
            }
        }
        // shrink the lower end geometrically for tiny targets (large log_y, q >= 1)
        if lo == 0.0 {
            let mut probe = hi * 0.5;
            while probe > 1e-300 && self.ln_big_f(probe)? < log_y {
                hi = probe;
                probe *= 0.5;
            }
            lo = if probe > 1e-300 { probe } else { 0.0 };
        }
        let mut u = 0.5 * (lo + hi);
        for _ in 0..400 {
            let lf = self.ln_big_f(u)?;
            let r = lf - log_y;
            if self.converged(r, log_y) {
                return Ok(u);
            }
            if r > 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let scale = (self.log_f(u)? + lf).exp();
            let mut next = u + r * scale;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if lo > 0.0 && hi / lo > 4.0 {
                    (lo * hi).sqrt()
                } else {
                    0.5 * (lo + hi)
                };
            }
            if (next - u).abs() <= 1e-16 * u.max(1e-300) || hi - lo <= 1e-16 * hi {
                return Ok(next);
            }
            u = next;
        }
        Err(Error::Convergence {
            what: "F^{-1} safeguarded Newton",
            iterations: 400,
        })
    }

    /// f'(u) F(u).
    pub fn fprime_f(&self, u: f64) -> Result<f64> {
        match self.family {
            Family::PureExponentialReference => Ok(1.0),
            Family::PowerReference => Ok(self.p / (self.p - 1.0)),
            Family::SuperExponential => {
                let lfp = self.log_f_prime(u)?;
                if lfp == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                Ok((lfp + self.ln_big_f(u)?).exp())
            }
        }
    }

    /// 1 - f'(u) F(u) without cancellation: for u ≥ l the remainder integral
    /// from integrating F by parts is evaluated directly.
    pub fn one_minus_fprime_f(&self, u: f64) -> Result<f64> {
        match self.family {
            Family::PureExponentialReference => Ok(0.0),
            Family::PowerReference => Ok(-1.0 / (self.p - 1.0)),
            Family::SuperExponential => {
                if u > 0.0 && u >= self.threshold {
                    self.remainder_integral(u)
                } else {
                    Ok(1.0 - self.fprime_f(u)?)
                }
            }
        }
    }

    /// (p u^{p-1} + q/u) ∫_0^∞ g(s) e^{-t} (u/s)^q / (p s^{p-1}) dt,
    /// s = (u^p + t)^{1/p}, g(s) = (p(p-1)s^p - q) / (p s^p + q)^2.
    fn remainder_integral(&self, u: f64) -> Result<f64> {
        let (p, q) = (self.p, self.q);
        let up = u.powf(p);
        let integrand = |t: f64| {
            let sp = up + t;
            let s = sp.powf(1.0 / p);
            let g = (p * (p - 1.0) * sp - q) / (p * sp + q).powi(2);
            let ratio = if q == 0.0 { 1.0 } else { (u / s).powf(q) };
            g * (-t).exp() * ratio / (p * sp / s)
        };
        let r = quadrature::integrate(integrand, 0.0, 60.0, 0.0, 1e-13)?;
        Ok((p * up / u + q / u) * r.value)
    }

    /// Threshold l(p, q) beyond which f'F ≤ 1 with the (1 - f'F) decay bound.
    pub fn threshold_l(&self) -> f64 {
        self.threshold
    }

    fn compute_threshold(&self) -> f64 {
        let (p, q) = (self.p, self.q);
        let floor = (q / (p * (p - 1.0))).powf(1.0 / p);
        floor.max(self.monotonicity_onset())
    }

    /// Smallest s beyond which (p(p-1)s^p - q)/(p s^p + q)^2 decreases,
    /// located on a geometric grid and bisected to 1e-8.
    pub fn monotonicity_onset(&self) -> f64 {
        let (p, q) = (self.p, self.q);
        let a = p * (p - 1.0);
        let dg = |s: f64| {
            let sp = s.powf(p);
            let n = a * sp - q;
            let d = p * sp + q;
            let dn = a * p * sp / s;
            let dd = p * p * sp / s;
            (dn * d - 2.0 * n * dd) / d.powi(3)
        };
        let grid: Vec<f64> = (0..=2000)
            .map(|i| 1e-6 * (1e8f64).powf(i as f64 / 2000.0))
            .collect();
        let last_nonneg = grid.iter().rposition(|&s| dg(s) >= 0.0);
        match last_nonneg {
            None => 0.0,
            Some(i) if i + 1 >= grid.len() => grid[i],
            Some(i) => {
                let (mut lo, mut hi) = (grid[i], grid[i + 1]);
                while hi - lo > 1e-8 {
                    let mid = 0.5 * (lo + hi);
                    if dg(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// One row of the tabulated function suite.
    pub fn table_row(&self, u: f64) -> Result<FunctionRow> {
        let log_f = self.ln_big_f(u)?;
        let round_trip = self.f_inv_log(log_f)?;
        let fpf = self.fprime_f(u)?;
        let om = self.one_minus_fprime_f(u)?;
        Ok(FunctionRow {
            u,
            log_big_f: log_f,
            round_trip,
            fprime_f: fpf,
            scaled_remainder: om * (self.p * u.powf(self.p) + self.q),
        })
    }
}

/// (u, log F, F⁻¹∘F, f'F, (1 - f'F)(p u^p + q)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionRow {
    pub u: f64,
    pub log_big_f: f64,
    pub round_trip: f64,
    pub fprime_f: f64,
    pub scaled_remainder: f64,
}
