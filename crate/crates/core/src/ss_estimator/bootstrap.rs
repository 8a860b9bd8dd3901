//! Tree bootstrap for chain-referral samples.
//!
//! Seeds are resampled with replacement; then, recursively, each selected
//! respondent's recruits are resampled with replacement from that
//! respondent's actual recruits. Weights travel with respondents.

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_aligned, weighted_proportion, InclusionWeights, ProportionEstimate};
use crate::rds_model::RecruitmentForest;
use crate::seed::{rng_from_seed, sub_seed, SimRng};
use crate::stats::sample_sd;
use crate::{Error, Result};

pub const MIN_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapFlavor {
    #[serde(rename = "tree")]
    Tree,
    /// Independent resampling of respondents; used when there are fewer than
    /// two seeds.
    #[serde(rename = "respondent")]
    Respondent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraitBootstrap {
    pub estimates: Vec<ProportionEstimate>,
    pub flavor: BootstrapFlavor,
    /// Replicates whose resample contained at least one observed value.
    pub usable_replicates: usize,
    pub warnings: Vec<String>,
}

fn tree_resample(forest: &RecruitmentForest, rng: &mut SimRng, out: &mut Vec<usize>) {
    out.clear();
    let seeds = forest.seeds();
    let mut stack = Vec::new();
    for _ in 0..seeds.len() {
        stack.push(seeds[rng.random_range(0..seeds.len())]);
    }
    while let Some(node) = stack.pop() {
        out.push(node);
        let kids = forest.recruits_of(node);
        for _ in 0..kids.len() {
            stack.push(kids[rng.random_range(0..kids.len())]);
        }
    }
}

fn respondent_resample(n: usize, rng: &mut SimRng, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..n).map(|_| rng.random_range(0..n)));
}

/// Bootstrap every category of `trait_name` jointly, so the replicate
/// estimates of one resample always sum to 100.
pub fn bootstrap_trait(
    forest: &RecruitmentForest,
    weights: &InclusionWeights,
    trait_name: &str,
    cfg: &BootstrapConfig,
) -> Result<TraitBootstrap> {
    let categories = forest.schema().categories(trait_name)?.to_vec();
    check_aligned(forest, weights)?;
    if cfg.replicates < MIN_REPLICATES {
        return Err(Error::Invalid(format!(
            "bootstrap needs at least {MIN_REPLICATES} replicates, got {}",
            cfg.replicates
        )));
    }
    let mut warnings = Vec::new();
    let flavor = if forest.seeds().len() < 2 {
        let msg = format!(
            "only {} seed(s): falling back to respondent-level resampling",
            forest.seeds().len()
        );
        warn!("{msg}");
        warnings.push(msg);
        BootstrapFlavor::Respondent
    } else {
        BootstrapFlavor::Tree
    };

    // Category index per respondent, None when the trait is missing.
    let cat_of: Vec<Option<usize>> = (0..forest.len())
        .map(|i| {
            forest
                .trait_value(i, trait_name)
                .and_then(|v| categories.iter().position(|c| c == v))
        })
        .collect();

    let replicate_points: Vec<Option<Vec<f64>>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(sub_seed(cfg.seed, r as u64));
            let mut idx = Vec::with_capacity(forest.len());
            match flavor {
                BootstrapFlavor::Tree => tree_resample(forest, &mut rng, &mut idx),
                BootstrapFlavor::Respondent => respondent_resample(forest.len(), &mut rng, &mut idx),
            }
            let mut num = vec![0.0; categories.len()];
            let mut den = 0.0;
            for &i in &idx {
                if let Some(c) = cat_of[i] {
                    num[c] += weights.weights[i];
                    den += weights.weights[i];
                }
            }
            (den > 0.0).then(|| num.iter().map(|x| 100.0 * x / den).collect())
        })
        .collect();
    let usable: Vec<&Vec<f64>> = replicate_points.iter().flatten().collect();
    if usable.len() < 2 {
        return Err(Error::Estimation(format!(
            "bootstrap produced {} usable replicates",
            usable.len()
        )));
    }
    if usable.len() < cfg.replicates {
        let msg = format!(
            "{} bootstrap replicates had no observed `{trait_name}` and were skipped",
            cfg.replicates - usable.len()
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut estimates = Vec::with_capacity(categories.len());
    for (c, category) in categories.iter().enumerate() {
        let column: Vec<f64> = usable.iter().map(|v| v[c]).collect();
        let se = sample_sd(&column);
        estimates.push(weighted_proportion(forest, weights, trait_name, category)?.with_se(se));
    }
    Ok(TraitBootstrap {
        estimates,
        flavor,
        usable_replicates: usable.len(),
        warnings,
    })
}

/// Bootstrap interval, standard error and design effect for one category.
pub fn bootstrap_ci(
    forest: &RecruitmentForest,
    weights: &InclusionWeights,
    trait_name: &str,
    category: &str,
    cfg: &BootstrapConfig,
) -> Result<ProportionEstimate> {
    let all = bootstrap_trait(forest, weights, trait_name, cfg)?;
    all.estimates
        .into_iter()
        .find(|e| e.category == category)
        .ok_or_else(|| Error::Invalid(format!("`{category}` is not a category of `{trait_name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds_model::{read_dataset, ParseOptions};
    use crate::ss_estimator::rds2_weights;

    fn chains() -> RecruitmentForest {
        let mut csv = String::from("id,recruiter_id,degree,order,g\n");
        let mut k = 0;
        for s in 0..6 {
            csv.push_str(&format!("s{s},,{},,{}\n", 2 + s, if s % 2 == 0 { "a" } else { "b" }));
            for j in 0..8 {
                let parent = if j == 0 { format!("s{s}") } else { format!("c{}", k - 1) };
                csv.push_str(&format!("c{k},{parent},{},,{}\n", 1 + (k % 5), if k % 3 == 0 { "a" } else { "b" }));
                k += 1;
            }
        }
        read_dataset(csv.as_bytes(), None, &ParseOptions::default()).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let f = chains();
        let w = rds2_weights(&f);
        let cfg = BootstrapConfig { replicates: 300, seed: 11 };
        let a = bootstrap_trait(&f, &w, "g", &cfg).unwrap();
        let b = bootstrap_trait(&f, &w, "g", &cfg).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.flavor, BootstrapFlavor::Tree);
        let total: f64 = a.estimates.iter().map(|e| e.point).sum();
        assert!((total - 100.0).abs() < 1e-9);
        // complementary categories share one standard error
        assert!((a.estimates[0].se.unwrap() - a.estimates[1].se.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn single_seed_falls_back() {
        let f = read_dataset(
            "id,recruiter_id,degree,order,g\nS,,2,,a\nA,S,2,,b\nB,S,3,,a\nC,A,1,,b\n".as_bytes(),
            None,
            &ParseOptions::default(),
        )
        .unwrap();
        let w = rds2_weights(&f);
        let cfg = BootstrapConfig { replicates: 200, seed: 3 };
        let r = bootstrap_trait(&f, &w, "g", &cfg).unwrap();
        assert_eq!(r.flavor, BootstrapFlavor::Respondent);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn too_few_replicates() {
        let f = chains();
        let w = rds2_weights(&f);
        let cfg = BootstrapConfig { replicates: 50, seed: 3 };
        assert!(bootstrap_ci(&f, &w, "g", "a", &cfg).is_err());
    }

    #[test]
    fn constant_trait_has_zero_design_effect() {
        let f = read_dataset(
            "id,recruiter_id,degree,order,g\nS,,2,,a\nT,,3,,a\nA,S,2,,a\n".as_bytes(),
            None,
            &ParseOptions::default(),
        )
        .unwrap();
        let w = rds2_weights(&f);
        let e = bootstrap_ci(&f, &w, "g", "a", &BootstrapConfig { replicates: 200, seed: 1 }).unwrap();
        assert_eq!(e.point, 100.0);
        assert_eq!(e.se, Some(0.0));
        assert_eq!(e.ci95, Some((100.0, 100.0)));
        assert_eq!(e.design_effect, Some(0.0));
    }
}
