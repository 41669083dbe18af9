use serde::Serialize;

use crate::error::{Error, Result};

/// Pairwise summation with a fixed split, so the result depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Sample mean with its standard error `s / √M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    #[serde(rename = "M")]
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let m = samples.len();
        if m < 2 {
            return Err(Error::Estimation(format!("need at least 2 samples, got {m}")));
        }
        let mean = pairwise_sum(samples) / m as f64;
        let centered: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&centered) / (m - 1) as f64;
        Ok(MonteCarloEstimate {
            mean,
            std_error: (var / m as f64).sqrt(),
            samples: m,
        })
    }

    /// Estimate of the sample variance with a delta-method standard error.
    pub fn variance_of(samples: &[f64]) -> Result<Self> {
        let m = samples.len();
        if m < 4 {
            return Err(Error::Estimation(format!("need at least 4 samples, got {m}")));
        }
        let mean = pairwise_sum(samples) / m as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&sq) * (1.0 / (m - 1) as f64);
        let fourth: Vec<f64> = sq.iter().map(|s| s * s).collect();
        let mu4 = pairwise_sum(&fourth) / m as f64;
        let se = ((mu4 - var * var * (m as f64 - 3.0) / (m as f64 - 1.0)) / m as f64).max(0.0).sqrt();
        Ok(MonteCarloEstimate {
            mean: var,
            std_error: se,
            samples: m,
        })
    }

    /// `|mean - reference| <= k · std_error`.
    pub fn agrees_with(&self, reference: f64, k: f64) -> bool {
        (self.mean - reference).abs() <= k * self.std_error
    }

    /// `sqrt(se₁² + se₂²)`.
    pub fn combined_se(&self, other: &MonteCarloEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), 249_750.0);
    }

    #[test]
    fn estimate_of_known_samples() {
        let e = MonteCarloEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(MonteCarloEstimate::from_samples(&[1.0]).is_err());
        assert!(e.agrees_with(2.0, 1.0));
        assert!(!e.agrees_with(0.0, 1.0));
    }
}
