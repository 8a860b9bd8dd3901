//! Inclusion weights: RDS-II (reciprocal degree) and Gile's successive-sampling
//! fixed point.

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rds_model::RecruitmentForest;
use crate::seed::{rng_from_seed, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMethod {
    #[serde(rename = "rds2")]
    Rds2,
    #[serde(rename = "giless")]
    GileSs,
}

/// Per-respondent weights, aligned with the forest's sample order and
/// normalized to mean 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionWeights {
    pub weights: Vec<f64>,
    pub method: WeightMethod,
    pub assumed_n: Option<u64>,
    pub converged: bool,
    pub iterations: usize,
}

impl InclusionWeights {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn normalize_mean_one(mut w: Vec<f64>) -> Vec<f64> {
    if w.is_empty() {
        return w;
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    for x in &mut w {
        *x /= mean;
    }
    w
}

/// RDS-II weights: proportional to 1/degree.
pub fn rds2_weights(forest: &RecruitmentForest) -> InclusionWeights {
    let raw = forest
        .respondents()
        .iter()
        .map(|r| 1.0 / r.degree as f64)
        .collect();
    InclusionWeights {
        weights: normalize_mean_one(raw),
        method: WeightMethod::Rds2,
        assumed_n: None,
        converged: true,
        iterations: 0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GileSsConfig {
    pub assumed_n: u64,
    pub sim_draws: usize,
    pub tol: f64,
    pub max_iterations: usize,
    pub max_classes: usize,
    pub seed: u64,
}

impl GileSsConfig {
    pub fn new(assumed_n: u64, seed: u64) -> Self {
        GileSsConfig {
            assumed_n,
            sim_draws: 1000,
            tol: 1e-4,
            max_iterations: 50,
            max_classes: 30,
            seed,
        }
    }
}

/// Grouping of respondents into degree classes.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeClasses {
    /// Representative degree of each class.
    pub degrees: Vec<f64>,
    /// Number of sampled respondents per class.
    pub sample_counts: Vec<u64>,
    /// Class index of each respondent.
    pub member_of: Vec<usize>,
}

impl DegreeClasses {
    /// Distinct observed degrees, or at most `max_classes` quantile bins when
    /// there are more distinct values than that.
    pub fn from_degrees(degrees: &[u32], max_classes: usize) -> Self {
        let mut distinct: Vec<u32> = degrees.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let class_of_value: Vec<usize> = if distinct.len() <= max_classes.max(1) {
            (0..distinct.len()).collect()
        } else {
            // Quantile binning by sorted position of each distinct value.
            let mut sorted = degrees.to_vec();
            sorted.sort_unstable();
            let n = sorted.len();
            let mut bins = Vec::with_capacity(distinct.len());
            for &v in &distinct {
                let first = sorted.partition_point(|&x| x < v);
                bins.push((first * max_classes / n).min(max_classes - 1));
            }
            // Compact to consecutive class ids.
            let mut compact = Vec::with_capacity(bins.len());
            let mut next = 0;
            let mut last = None;
            for b in bins {
                if last != Some(b) {
                    if last.is_some() {
                        next += 1;
                    }
                    last = Some(b);
                }
                compact.push(next);
            }
            compact
        };
        let n_classes = class_of_value.last().map_or(0, |c| c + 1);
        let mut sums = vec![0.0; n_classes];
        let mut counts = vec![0u64; n_classes];
        let member_of: Vec<usize> = degrees
            .iter()
            .map(|d| {
                let c = class_of_value[distinct.binary_search(d).unwrap()];
                sums[c] += *d as f64;
                counts[c] += 1;
                c
            })
            .collect();
        DegreeClasses {
            degrees: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
            sample_counts: counts,
            member_of,
        }
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
}

/// Estimated per-unit inclusion probability for each class when `n` units are
/// drawn successively, with probability proportional to degree and without
/// replacement, from a population with `class_sizes[k]` units of degree
/// `class_degrees[k]`.
///
/// Each simulated path accumulates the conditional selection probabilities
/// rather than the realized draws, which gives the same expectation with much
/// lower variance.
pub fn ss_inclusion_probabilities(
    class_degrees: &[f64],
    class_sizes: &[u64],
    n: usize,
    draws: usize,
    rng: &mut SimRng,
) -> Vec<f64> {
    let k = class_degrees.len();
    let total_units: u64 = class_sizes.iter().sum();
    assert!(n as u64 <= total_units, "sample larger than population");
    if n as u64 == total_units {
        return class_sizes.iter().map(|&s| if s == 0 { 0.0 } else { 1.0 }).collect();
    }
    let mut expected = vec![0.0; k];
    let mut remaining = vec![0u64; k];
    let mut probs = vec![0.0; k];
    for _ in 0..draws {
        remaining.copy_from_slice(class_sizes);
        for _ in 0..n {
            let total: f64 = class_degrees
                .iter()
                .zip(&remaining)
                .map(|(d, &r)| d * r as f64)
                .sum();
            for c in 0..k {
                probs[c] = class_degrees[c] * remaining[c] as f64 / total;
                expected[c] += probs[c];
            }
            let u: f64 = rng.random::<f64>();
            let mut acc = 0.0;
            let mut pick = None;
            for c in 0..k {
                if remaining[c] == 0 {
                    continue;
                }
                acc += probs[c];
                pick = Some(c);
                if u < acc {
                    break;
                }
            }
            remaining[pick.expect("population exhausted")] -= 1;
        }
    }
    expected
        .iter()
        .zip(class_sizes)
        .map(|(e, &size)| {
            if size == 0 {
                0.0
            } else {
                (e / (draws as f64 * size as f64)).min(1.0)
            }
        })
        .collect()
}

/// Population class sizes implied by inclusion probabilities: sampled counts
/// are inflated by 1/pi and the unsampled `assumed_n - n` units are spread over
/// classes by largest remainder, so every class keeps at least its sample.
pub(crate) fn allocate_population(sample_counts: &[u64], pi: &[f64], assumed_n: u64) -> Vec<u64> {
    let n: u64 = sample_counts.iter().sum();
    let inflated: Vec<f64> = sample_counts
        .iter()
        .zip(pi)
        .map(|(&c, &p)| c as f64 / p)
        .collect();
    let total: f64 = inflated.iter().sum();
    let target: Vec<f64> = inflated
        .iter()
        .map(|x| assumed_n as f64 * x / total)
        .collect();
    let excess: Vec<f64> = target
        .iter()
        .zip(sample_counts)
        .map(|(t, &c)| (t - c as f64).max(0.0))
        .collect();
    let remaining = assumed_n - n;
    let excess_total: f64 = excess.iter().sum();
    let shares: Vec<f64> = if excess_total > 0.0 {
        excess
            .iter()
            .map(|e| remaining as f64 * e / excess_total)
            .collect()
    } else {
        target
            .iter()
            .map(|t| remaining as f64 * t / assumed_n as f64)
            .collect()
    };
    let mut extra: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = extra.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &c in order.iter().take((remaining - assigned.min(remaining)) as usize) {
        extra[c] += 1;
    }
    sample_counts.iter().zip(extra).map(|(c, e)| c + e).collect()
}

/// Result of the successive-sampling fixed point, before mapping to weights.
#[derive(Debug, Clone)]
pub struct GileSsFit {
    pub classes: DegreeClasses,
    pub class_pi: Vec<f64>,
    pub population_sizes: Vec<u64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Fixed-point estimation of per-class inclusion probabilities under
/// successive sampling from a population of `assumed_n` units.
pub fn gile_ss_fit(degrees: &[u32], cfg: &GileSsConfig) -> Result<GileSsFit> {
    let n = degrees.len();
    if n == 0 {
        return Err(Error::Estimation("no respondents to weight".into()));
    }
    if cfg.assumed_n < n as u64 {
        return Err(Error::Invalid(format!(
            "assumed population size {} is smaller than the sample size {n}",
            cfg.assumed_n
        )));
    }
    if cfg.sim_draws == 0 {
        return Err(Error::Invalid("sim_draws must be positive".into()));
    }
    let classes = DegreeClasses::from_degrees(degrees, cfg.max_classes);
    let mut pi = classes.degrees.clone();
    let mut population = allocate_population(&classes.sample_counts, &pi, cfg.assumed_n);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        iterations = it;
        // Common random numbers across iterations keep the map smooth.
        let mut rng = rng_from_seed(cfg.seed);
        let next = ss_inclusion_probabilities(
            &classes.degrees,
            &population,
            n,
            cfg.sim_draws,
            &mut rng,
        );
        let change = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        population = allocate_population(&classes.sample_counts, &pi, cfg.assumed_n);
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "successive-sampling weights did not converge after {} iterations",
            cfg.max_iterations
        );
    }
    Ok(GileSsFit {
        classes,
        class_pi: pi,
        population_sizes: population,
        converged,
        iterations,
    })
}

/// Gile's successive-sampling weights at an assumed population size.
pub fn gile_ss_weights(forest: &RecruitmentForest, cfg: &GileSsConfig) -> Result<InclusionWeights> {
    if cfg.sim_draws < 1000 {
        return Err(Error::Invalid(format!(
            "sim_draws must be at least 1000, got {}",
            cfg.sim_draws
        )));
    }
    let fit = gile_ss_fit(&forest.degrees(), cfg)?;
    let raw = fit
        .classes
        .member_of
        .iter()
        .map(|&c| 1.0 / fit.class_pi[c])
        .collect();
    Ok(InclusionWeights {
        weights: normalize_mean_one(raw),
        method: WeightMethod::GileSs,
        assumed_n: Some(cfg.assumed_n),
        converged: fit.converged,
        iterations: fit.iterations,
    })
}
