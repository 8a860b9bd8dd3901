//! Degree distribution model used by the successive-sampling likelihood.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rds_model::RecruitmentForest;
use crate::ss_estimator::InclusionWeights;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DegreeFamily {
    /// Discrete exponential on 1, 2, ...: `P(d) ∝ (1 - 1/mean)^(d - 1)`,
    /// truncated at the cap.
    Geometric { mean: f64 },
    /// Explicit probabilities for degrees `1..=cap`.
    Table { pmf: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeModel {
    #[serde(flatten)]
    pub family: DegreeFamily,
    pub cap: u32,
}

impl DegreeModel {
    pub fn geometric(mean: f64, cap: u32) -> Result<Self> {
        if !(mean > 1.0) || !mean.is_finite() {
            return Err(Error::Estimation(format!(
                "geometric mean parameter must exceed 1, got {mean}"
            )));
        }
        if cap == 0 {
            return Err(Error::Invalid("degree cap must be positive".into()));
        }
        Ok(DegreeModel {
            family: DegreeFamily::Geometric { mean },
            cap,
        })
    }

    /// Model with explicit probabilities for degrees `1..=pmf.len()`.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if pmf.is_empty() || pmf.iter().any(|p| *p < 0.0) || !(total > 0.0) {
            return Err(Error::Invalid("degree pmf must be non-negative with positive mass".into()));
        }
        let cap = pmf.len() as u32;
        Ok(DegreeModel {
            family: DegreeFamily::Table {
                pmf: pmf.into_iter().map(|p| p / total).collect(),
            },
            cap,
        })
    }

    /// Mean parameter of a geometric model.
    pub fn mean_parameter(&self) -> Option<f64> {
        match self.family {
            DegreeFamily::Geometric { mean } => Some(mean),
            DegreeFamily::Table { .. } => None,
        }
    }

    /// Same family with a new mean parameter; tables are returned unchanged.
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        match self.family {
            DegreeFamily::Geometric { .. } => DegreeModel::geometric(mean, self.cap),
            DegreeFamily::Table { .. } => Ok(self.clone()),
        }
    }

    /// Probabilities of degrees `1..=cap`; entry `d - 1` holds `P(d)`.
    pub fn pmf_table(&self) -> Vec<f64> {
        match &self.family {
            DegreeFamily::Table { pmf } => pmf.clone(),
            DegreeFamily::Geometric { mean } => {
                let q = 1.0 - 1.0 / mean;
                let mut table = Vec::with_capacity(self.cap as usize);
                let mut w = 1.0;
                for _ in 0..self.cap {
                    table.push(w);
                    w *= q;
                }
                let total: f64 = table.iter().sum();
                table.iter_mut().for_each(|p| *p /= total);
                table
            }
        }
    }

    pub fn ln_pmf(&self, d: u32) -> f64 {
        if d == 0 || d > self.cap {
            return f64::NEG_INFINITY;
        }
        match &self.family {
            DegreeFamily::Table { pmf } => pmf[d as usize - 1].ln(),
            DegreeFamily::Geometric { mean } => {
                let q = 1.0 - 1.0 / mean;
                let ln_norm = (1.0 - q.powi(self.cap as i32)).ln() - (1.0 - q).ln();
                (d - 1) as f64 * q.ln() - ln_norm
            }
        }
    }

    pub fn expected_degree(&self) -> f64 {
        self.pmf_table()
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    pub fn sampler(&self) -> DegreeSampler {
        let mut cdf = Vec::with_capacity(self.cap as usize);
        let mut acc = 0.0;
        for p in self.pmf_table() {
            acc += p;
            cdf.push(acc);
        }
        DegreeSampler { cdf }
    }
}

/// Inverse-CDF sampler over a precomputed table.
#[derive(Debug, Clone)]
pub struct DegreeSampler {
    cdf: Vec<f64>,
}

impl DegreeSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.cdf.last().copied().unwrap_or(1.0);
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u32 + 1
    }
}

/// Geometric model whose mean is the weighted mean degree of the sample;
/// weighting by inverse inclusion probability undoes the size bias.
pub fn fit_degree_model(
    forest: &RecruitmentForest,
    weights: &InclusionWeights,
) -> Result<DegreeModel> {
    if forest.len() != weights.len() || forest.is_empty() {
        return Err(Error::Invalid(
            "degree model needs one weight per respondent".into(),
        ));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (r, w) in forest.respondents().iter().zip(&weights.weights) {
        num += w * r.degree as f64;
        den += w;
    }
    let mean = num / den;
    if mean <= 1.0 {
        return Err(Error::Estimation(format!(
            "weighted mean degree {mean} is degenerate (must exceed 1)"
        )));
    }
    let max_degree = forest.degrees().into_iter().max().unwrap_or(1);
    DegreeModel::geometric(mean, 2 * max_degree)
}
