//! Numerical integration: adaptive Gauss–Kronrod (7/15) on finite intervals
//! and composite Simpson on uniform samples.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Subintervals are bisected until the Kronrod/Gauss difference on each is
/// below `max(abs_tol, rel_tol * |I|)` distributed by length. The global
/// error estimate is the sum of the local ones.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    const MAX_INTERVALS: usize = 4000;
    let (v0, e0) = gk15(&f, a, b);
    let mut pieces: Vec<(f64, f64, f64, f64)> = vec![(a, b, v0, e0)];
    let mut evaluations = 15;
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        let tol = abs_tol.max(rel_tol * total.abs());
        if !total.is_finite() {
            return Err(Error::domain(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= tol {
            return Ok(Integral {
                value: total,
                error: err,
                evaluations,
            });
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Convergence {
                what: "adaptive Gauss-Kronrod quadrature",
                iterations: pieces.len(),
            });
        }
        // bisect the worst piece
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0usize, -1.0f64), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            // interval can no longer be split; accept what we have
            return Ok(Integral {
                value: total,
                error: err,
                evaluations,
            });
        }
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        evaluations += 30;
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
}

/// Composite Simpson rule on uniformly spaced samples. An odd number of
/// intervals is handled by closing the last three intervals with the
/// Simpson 3/8 rule.
pub fn simpson(values: &[f64], spacing: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * spacing * (values[0] + values[1]),
        3 => spacing / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                let tail = 3.0 * spacing / 8.0
                    * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
                (k, tail)
            };
            let mut sum = values[0] + values[simpson_end];
            for (i, v) in values.iter().enumerate().take(simpson_end).skip(1) {
                sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            sum * spacing / 3.0 + tail
        }
    }
}

/// Surface area of the unit sphere in R^n (2 for n = 1, 2π for n = 2).
pub fn unit_sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / libm::tgamma(half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_kronrod_polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        // ∫ = [x^6/6 - x^3 + x] from -1 to 2
        let exact = (64.0 / 6.0 - 8.0 + 2.0) - (1.0 / 6.0 + 1.0 - 1.0);
        assert_relative_eq!(r.value, exact, max_relative = 1e-14);
    }

    #[test]
    fn gauss_kronrod_peaked() {
        let r = integrate(|x| (-x * x).exp(), -8.0, 8.0, 1e-15, 1e-14).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn simpson_cubic_exact_even_and_odd() {
        let h = 0.1;
        for n in [11usize, 12] {
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            let len = (n - 1) as f64 * h;
            assert_relative_eq!(simpson(&v, h), len.powi(4) / 4.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(1), 2.0, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(2), 2.0 * std::f64::consts::PI, max_relative = 1e-14);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * std::f64::consts::PI, max_relative = 1e-14);
    }
}
