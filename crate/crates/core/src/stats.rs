//! Sample statistics shared by the Monte-Carlo estimators.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_err: f64::NAN };
        }
        let mean = mean(samples);
        let std_err = if n > 1 { (variance(samples) / n as f64).sqrt() } else { 0.0 };
        Self { mean, std_err }
    }

    /// Whether `target` lies within `k` standard errors of the mean.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Neumaier-compensated sum in slice order.
pub fn sum(values: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    sum(&sq) / (n - 1) as f64
}

/// Sample variance together with the standard error of that variance,
/// `sqrt((m4 - s^4) / n)` from the fourth central moment.
pub fn variance_with_se(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    let m = mean(values);
    let s2 = variance(values);
    let m4: Vec<f64> = values.iter().map(|v| (v - m).powi(4)).collect();
    let m4 = sum(&m4) / n;
    Estimate { mean: s2, std_err: ((m4 - s2 * s2).max(0.0) / n).sqrt() }
}

/// Kish effective sample size of a set of nonnegative weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = sum(weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    s * s / sum(&sq)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_keeps_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&v), 2.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_se() {
        let e = Estimate::from_samples(&[3.0; 10]);
        assert_eq!(e.mean, 3.0);
        assert_eq!(e.std_err, 0.0);
    }

    #[test]
    fn ess_of_equal_weights_is_count() {
        assert!((effective_sample_size(&[2.0; 8]) - 8.0).abs() < 1e-12);
    }
}
