//! Shape-preserving (Fritsch–Carlson / PCHIP) cubic Hermite interpolation.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::build(x, y, None)
    }

    /// Interpolant with a prescribed slope at the left end (0 for even
    /// radial profiles at r = 0).
    pub fn with_left_slope(x: &[f64], y: &[f64], slope: f64) -> Result<Self> {
        Self::build(x, y, Some(slope))
    }

    fn build(x: &[f64], y: &[f64], left: Option<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::domain("interpolation needs >= 2 matching samples"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("interpolation nodes must be strictly increasing"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("interpolation values must be finite"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        if let Some(s) = left {
            d[0] = s;
        }
        Ok(MonotoneCubic {
            x: x.to_vec(),
            y: y.to_vec(),
            slopes: d,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    fn locate(&self, xq: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(xq >= lo && xq <= hi) {
            return Err(Error::domain(format!(
                "interpolation point {xq} outside [{lo}, {hi}]"
            )));
        }
        let i = self.x.partition_point(|&v| v <= xq);
        Ok(i.clamp(1, self.x.len() - 1) - 1)
    }

    pub fn eval(&self, xq: f64) -> Result<f64> {
        let i = self.locate(xq)?;
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.y[i] + h10 * h * self.slopes[i] + h01 * self.y[i + 1] + h11 * h * self.slopes[i + 1])
    }

    pub fn derivative(&self, xq: f64) -> Result<f64> {
        let i = self.locate(xq)?;
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        Ok(d00 * self.y[i] + d10 * self.slopes[i] + d01 * self.y[i + 1] + d11 * self.slopes[i + 1])
    }
}

// three-point end slope, limited to preserve shape
fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_linear_data() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let m = MonotoneCubic::new(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((m.eval(*xi).unwrap() - yi).abs() < 1e-15);
        }
        assert!((m.eval(1.05).unwrap() - (2.0 - 0.525)).abs() < 1e-14);
        assert!((m.derivative(1.05).unwrap() + 0.5).abs() < 1e-14);
    }

    #[test]
    fn preserves_monotonicity_of_steep_data() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [10.0, 9.99, 5.0, 4.99, 0.0];
        let m = MonotoneCubic::new(&x, &y).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let v = m.eval(i as f64 / 100.0).unwrap();
            assert!(v <= prev + 1e-14);
            prev = v;
        }
    }

    #[test]
    fn rejects_out_of_domain_and_bad_nodes() {
        let m = MonotoneCubic::new(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(m.eval(1.5).is_err());
        assert!(MonotoneCubic::new(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn converges_on_smooth_even_profile() {
        // harmonic-mean slopes are second-order accurate
        let err = |n: usize| {
            let x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let y: Vec<f64> = x.iter().map(|v| v.cos()).collect();
            let m = MonotoneCubic::with_left_slope(&x, &y, 0.0).unwrap();
            (0..1000)
                .map(|i| {
                    let xq = i as f64 / 1000.0;
                    (m.eval(xq).unwrap() - xq.cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let order = (err(32) / err(64)).log2();
        assert!(order > 1.8, "{order}");
    }
}
