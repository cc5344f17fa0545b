//! Monte Carlo estimate carrier.

use serde::{Deserialize, Serialize};

/// A Monte Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl MCEstimate {
    /// Two-pass sample mean and standard error (sample sd / sqrt(n)).
    pub fn from_samples(samples: &[f64]) -> Self {
        assert!(!samples.is_empty(), "need at least one sample");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        Self { value: mean, std_error, n_samples: samples.len() }
    }

    /// Weighted mean with the weighted analogue of the iid standard error,
    /// `sqrt(sum w_i^2 (x_i - mean)^2)`. Weights must sum to one.
    pub fn from_weighted<I>(pairs: I) -> Self
    where
        I: Iterator<Item = (f64, f64)> + Clone,
    {
        let mut mean = 0.0;
        let mut n = 0usize;
        for (w, x) in pairs.clone() {
            mean += w * x;
            n += 1;
        }
        assert!(n > 0, "need at least one sample");
        let var = pairs.map(|(w, x)| (w * (x - mean)).powi(2)).sum::<f64>();
        Self { value: mean, std_error: var.sqrt(), n_samples: n }
    }

    /// Standard error of a difference of two independent estimates.
    pub fn combined_se(&self, other: &Self) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_samples_have_zero_error() {
        let e = MCEstimate::from_samples(&[3.0; 50]);
        assert_eq!(e.value, 3.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n_samples, 50);
    }

    #[test]
    fn matches_textbook_formulas() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let e = MCEstimate::from_samples(&xs);
        assert!((e.value - 2.5).abs() < 1e-15);
        // sample sd = sqrt(5/3), SE = sd / 2
        assert!((e.std_error - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn equal_weights_reduce_to_iid_up_to_bessel() {
        let xs = [0.5, -1.0, 2.0, 0.25];
        let n = xs.len() as f64;
        let w = 1.0 / n;
        let weighted = MCEstimate::from_weighted(xs.iter().map(|&x| (w, x)));
        let iid = MCEstimate::from_samples(&xs);
        assert!((weighted.value - iid.value).abs() < 1e-15);
        // weighted form uses the population variance; rescale to compare
        let rescaled = weighted.std_error * (n / (n - 1.0)).sqrt();
        assert!((rescaled - iid.std_error).abs() < 1e-15);
    }
}
