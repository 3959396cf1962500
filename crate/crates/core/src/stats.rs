//! Small statistics helpers shared by the estimators, the ensemble summary
//! and the test suites.

use serde::{Deserialize, Serialize};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Linear-interpolated quantile, `q` in `[0, 1]`. NaN for an empty slice.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return s[lo];
    }
    let w = pos - lo as f64;
    if s[hi].is_infinite() || s[lo].is_infinite() {
        return if w < 0.5 { s[lo] } else { s[hi] };
    }
    s[lo] * (1.0 - w) + s[hi] * w
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Ordinary least-squares fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual scatter.
    pub slope_stderr: f64,
    pub n: usize,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        n,
    })
}

/// Two-sided exact sign test: probability under a fair coin of a split at
/// least as lopsided as `wins` out of `trials`.
pub fn sign_test_p_value(wins: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let extreme = wins.min(trials - wins);
    let n = trials as f64;
    // ln C(n, k) accumulated incrementally
    let mut ln_c = 0.0;
    let mut tail = 0.0;
    for k in 0..=extreme {
        if k > 0 {
            ln_c += ((n - k as f64 + 1.0) / k as f64).ln();
        }
        tail += (ln_c - n * std::f64::consts::LN_2).exp();
    }
    (2.0 * tail).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_and_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&v), 2.5);
        assert!((variance(&v) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(median(&[3.0, f64::INFINITY, 1.0]), 3.0);
        assert_eq!(median(&[f64::INFINITY, f64::INFINITY, 1.0]), f64::INFINITY);
    }

    #[test]
    fn exact_power_law_fit() {
        let x: Vec<f64> = (1..50).map(|k| (k as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|l| 0.7 - l / 3.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test_p_value(5, 10), 1.0);
        // P(X <= 1) for Bin(10, 1/2) = 11/1024, doubled
        assert!((sign_test_p_value(9, 10) - 22.0 / 1024.0).abs() < 1e-12);
        assert!(sign_test_p_value(600, 1000) < 1e-9);
    }
}
