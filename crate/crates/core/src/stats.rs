//! Small robust statistics used by the trend verdicts.

/// Median of a slice (NaNs are not expected; they sort last).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Theil–Sen slope: median of all pairwise slopes with distinct x.
pub fn theil_sen(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut slopes = Vec::with_capacity(x.len() * x.len() / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[j] - x[i];
            if dx != 0.0 {
                slopes.push((y[j] - y[i]) / dx);
            }
        }
    }
    median(&slopes)
}

/// Exponent β of a power law |y| ≈ C x^β, Theil–Sen on log–log data.
/// Zero entries are dropped; returns `None` with fewer than 3 usable points.
pub fn power_law_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && b.abs() > 0.0 && b.is_finite())
        .map(|(a, b)| (a.ln(), b.abs().ln()))
        .unzip();
    (lx.len() >= 3).then(|| theil_sen(&lx, &ly))
}

/// Observed convergence order from errors at successively halved h.
pub fn observed_order(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn theil_sen_ignores_an_outlier() {
        let x: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let mut y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        y[4] = 100.0;
        assert!((theil_sen(&x, &y) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_law_recovered() {
        let x: Vec<f64> = (1..40).map(|i| 10.0 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 7.0 * v.powf(-2.25)).collect();
        assert!((power_law_exponent(&x, &y).unwrap() + 2.25).abs() < 1e-12);
        assert_eq!(observed_order(&[4.0, 1.0]), vec![2.0]);
    }
}
