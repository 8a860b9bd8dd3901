use serde::{Deserialize, Serialize};

use crate::stats::{histogram_mode, mean, quantile_sorted};

/// Quantile levels reported for priors and posteriors.
pub const QUANTILE_LEVELS: [f64; 8] = [0.025, 0.05, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975];

/// Location summary of a distribution over population size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    /// `(level, value)` pairs in increasing level order.
    pub quantiles: Vec<(f64, f64)>,
}

impl Summary {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN sample"));
        Summary {
            mean: mean(&sorted),
            median: quantile_sorted(&sorted, 0.5),
            mode: histogram_mode(&sorted),
            quantiles: QUANTILE_LEVELS
                .iter()
                .map(|&p| (p, quantile_sorted(&sorted, p)))
                .collect(),
        }
    }

    pub fn quantile(&self, level: f64) -> Option<f64> {
        self.quantiles
            .iter()
            .find(|(l, _)| (l - level).abs() < 1e-12)
            .map(|&(_, v)| v)
    }

    /// Apply `f` to every statistic.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Summary {
        Summary {
            mean: f(self.mean),
            median: f(self.median),
            mode: f(self.mode),
            quantiles: self.quantiles.iter().map(|&(l, v)| (l, f(v))).collect(),
        }
    }
}
