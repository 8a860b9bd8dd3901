//! Design-weighted trait proportions for RDS samples.

mod bootstrap;
mod weights;

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::rds_model::RecruitmentForest;
use crate::{Error, Result};

pub use bootstrap::{bootstrap_ci, bootstrap_trait, BootstrapConfig, BootstrapFlavor};
pub use weights::{
    gile_ss_fit, gile_ss_weights, rds2_weights, ss_inclusion_probabilities, DegreeClasses,
    GileSsConfig, GileSsFit, InclusionWeights, WeightMethod,
};

/// z-value for two-sided 95% normal intervals.
pub const Z95: f64 = 1.96;

/// A weighted category share. All quantities are percentages except the
/// design effect and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub category: String,
    pub point: f64,
    pub se: Option<f64>,
    pub ci95: Option<(f64, f64)>,
    pub design_effect: Option<f64>,
    /// Respondents observed in the category.
    pub sample_size: usize,
    /// Respondents with the trait observed (the analysis n).
    pub analysis_n: usize,
}

impl ProportionEstimate {
    /// Attach a standard error (percentage points), deriving the symmetric
    /// 95% interval and the design effect.
    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self.ci95 = Some(ci95_from_se(self.point, se));
        self.design_effect = Some(design_effect(self.point, se, self.analysis_n));
        self
    }
}

/// `point ± 1.96 se`; the lower end may be negative.
pub fn ci95_from_se(point: f64, se: f64) -> (f64, f64) {
    (point - Z95 * se, point + Z95 * se)
}

/// Ratio of the estimator variance to simple-random-sampling variance at the
/// same n. Inputs are percentages; zero when the SRS variance vanishes.
pub fn design_effect(point_pct: f64, se_pct: f64, n: usize) -> f64 {
    let p = point_pct / 100.0;
    let srs_var = p * (1.0 - p) / n as f64;
    if srs_var <= 0.0 || n == 0 {
        return 0.0;
    }
    let se = se_pct / 100.0;
    se * se / srs_var
}

/// Weighted share of `category` among respondents with `trait_name` observed.
pub fn weighted_proportion(
    forest: &RecruitmentForest,
    weights: &InclusionWeights,
    trait_name: &str,
    category: &str,
) -> Result<ProportionEstimate> {
    forest.schema().categories(trait_name)?;
    check_aligned(forest, weights)?;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut in_cat, mut observed) = (0, 0);
    for (i, w) in weights.weights.iter().enumerate() {
        if let Some(v) = forest.trait_value(i, trait_name) {
            den += w;
            observed += 1;
            if v == category {
                num += w;
                in_cat += 1;
            }
        }
    }
    if observed == 0 || den <= 0.0 {
        return Err(Error::Estimation(format!(
            "no respondents with `{trait_name}` observed"
        )));
    }
    Ok(ProportionEstimate {
        trait_name: trait_name.to_string(),
        category: category.to_string(),
        point: 100.0 * num / den,
        se: None,
        ci95: None,
        design_effect: None,
        sample_size: in_cat,
        analysis_n: observed,
    })
}

pub(crate) fn check_aligned(forest: &RecruitmentForest, weights: &InclusionWeights) -> Result<()> {
    if forest.len() != weights.len() {
        return Err(Error::Invalid(format!(
            "{} weights for {} respondents",
            weights.len(),
            forest.len()
        )));
    }
    Ok(())
}

/// Sum of disjoint category shares of one trait.
pub fn aggregate_categories(estimates: &[ProportionEstimate]) -> Result<f64> {
    let mut seen = BTreeSet::new();
    if let Some(first) = estimates.first() {
        for e in estimates {
            if e.trait_name != first.trait_name {
                return Err(Error::Invalid(format!(
                    "cannot aggregate categories of different traits (`{}` and `{}`)",
                    first.trait_name, e.trait_name
                )));
            }
            if !seen.insert(e.category.as_str()) {
                return Err(Error::Invalid(format!(
                    "category `{}` listed twice",
                    e.category
                )));
            }
        }
    }
    Ok(estimates.iter().map(|e| e.point).sum())
}

pub const TABLE_HEADER: [&str; 8] = [
    "trait",
    "category",
    "point",
    "ci95_lo",
    "ci95_hi",
    "design_effect",
    "se",
    "sample_size",
];

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Write estimates as a per-category table, one row per estimate.
pub fn write_estimates_csv<W: Write>(estimates: &[ProportionEstimate], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_HEADER)?;
    for e in estimates {
        w.write_record([
            e.trait_name.clone(),
            e.category.clone(),
            format!("{:.4}", e.point),
            fmt_opt(e.ci95.map(|c| c.0)),
            fmt_opt(e.ci95.map(|c| c.1)),
            fmt_opt(e.design_effect),
            fmt_opt(e.se),
            e.sample_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
