//! Synthetic populations with known size, degrees and traits, and simulated
//! successive-sampling and coupon-chain samples drawn from them.
//!
//! Contacts are chosen with probability proportional to degree among the
//! units not yet sampled, so no network is materialized. All selection is on
//! integer degree totals, which keeps draws identical across platforms.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rds_model::{RecruitmentForest, Respondent, TraitSchema};
use crate::seed::{rng_from_seed, sub_seed, SimRng};
use crate::ss_estimator::{
    gile_ss_weights, rds2_weights, weighted_proportion, GileSsConfig, InclusionWeights,
};
use crate::sspse::{
    fit_degree_model, fit_prior, multi_trial, DegreeModel, McmcConfig, PriorForm, PriorSpec,
    SuccessiveSamplingLikelihood, Summary, DEFAULT_HARD_MAX_FACTOR,
};
use crate::stats::mean;
use crate::{Error, Result};

/// Fenwick tree over integer weights, for repeated PPS draws without
/// replacement in `O(log N)` each.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
    values: Vec<u64>,
    total: u64,
}

impl Fenwick {
    fn new(values: &[u64]) -> Self {
        let n = values.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &v) in values.iter().enumerate() {
            tree[i + 1] += v;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                let carry = tree[i + 1];
                tree[parent] += carry;
            }
        }
        Fenwick {
            tree,
            values: values.to_vec(),
            total: values.iter().sum(),
        }
    }

    fn remove(&mut self, i: usize) {
        let v = std::mem::take(&mut self.values[i]);
        self.total -= v;
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] -= v;
            k += k & k.wrapping_neg();
        }
    }

    /// Index whose cumulative weight interval contains `u < total`.
    fn find(&self, mut u: u64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    /// Draw one remaining index with probability proportional to its weight
    /// and remove it; `None` once the remaining weight is zero.
    fn draw<R: Rng>(&mut self, rng: &mut R) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        let i = self.find(rng.random_range(0..self.total));
        self.remove(i);
        Some(i)
    }
}

/// Categorical trait with fixed prevalences (fractions summing to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitConfig {
    pub name: String,
    pub prevalence: BTreeMap<String, f64>,
}

impl TraitConfig {
    pub fn new(name: &str, prevalence: &[(&str, f64)]) -> Self {
        TraitConfig {
            name: name.to_string(),
            prevalence: prevalence
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let total: f64 = self.prevalence.values().sum();
        if self.prevalence.is_empty()
            || self.prevalence.values().any(|p| !(*p >= 0.0))
            || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Invalid(format!(
                "prevalences of trait `{}` must be non-negative and sum to 1",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPopulation {
    pub true_n: u64,
    pub degrees: Vec<u32>,
    /// Per-unit labels for each trait.
    pub traits: BTreeMap<String, Vec<String>>,
    pub degree_model: DegreeModel,
    pub trait_configs: Vec<TraitConfig>,
    pub seed: u64,
}

impl SyntheticPopulation {
    pub fn schema(&self) -> TraitSchema {
        TraitSchema::new(
            self.trait_configs
                .iter()
                .map(|t| (t.name.clone(), t.prevalence.keys().cloned().collect()))
                .collect(),
        )
    }

    /// Share of units (percent) carrying `category` of `trait_name`.
    pub fn prevalence(&self, trait_name: &str, category: &str) -> Result<f64> {
        let labels = self
            .traits
            .get(trait_name)
            .ok_or_else(|| Error::UnknownTrait(trait_name.to_string()))?;
        let hits = labels.iter().filter(|l| *l == category).count();
        Ok(100.0 * hits as f64 / labels.len() as f64)
    }

    fn respondent(&self, unit: usize, recruiter: Option<usize>, order: usize) -> Respondent {
        Respondent {
            id: unit_id(unit),
            recruiter_id: recruiter.map(unit_id),
            degree: self.degrees[unit],
            traits: self
                .traits
                .iter()
                .map(|(k, v)| (k.clone(), v[unit].clone()))
                .collect(),
            sample_order: order,
        }
    }
}

fn unit_id(unit: usize) -> String {
    format!("u{unit}")
}

/// Independent degrees from `degree_model` and independent trait labels.
pub fn generate_population(
    true_n: u64,
    degree_model: &DegreeModel,
    traits: &[TraitConfig],
    seed: u64,
) -> Result<SyntheticPopulation> {
    if true_n == 0 {
        return Err(Error::Invalid("population size must be at least 1".into()));
    }
    for t in traits {
        t.validate()?;
    }
    let sampler = degree_model.sampler();
    let mut rng = rng_from_seed(sub_seed(seed, 0));
    let degrees: Vec<u32> = (0..true_n).map(|_| sampler.sample(&mut rng)).collect();
    let mut labels = BTreeMap::new();
    for (k, t) in traits.iter().enumerate() {
        let mut rng = rng_from_seed(sub_seed(seed, k as u64 + 1));
        let cats: Vec<(&String, f64)> = t.prevalence.iter().map(|(c, p)| (c, *p)).collect();
        let unit_labels = (0..true_n)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (c, p) in &cats {
                    acc += p;
                    if u < acc {
                        return (*c).clone();
                    }
                }
                cats.iter()
                    .rev()
                    .find(|(_, p)| *p > 0.0)
                    .map(|(c, _)| (*c).clone())
                    .expect("some category has positive prevalence")
            })
            .collect();
        labels.insert(t.name.clone(), unit_labels);
    }
    Ok(SyntheticPopulation {
        true_n,
        degrees,
        traits: labels,
        degree_model: degree_model.clone(),
        trait_configs: traits.to_vec(),
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// PPS without replacement; every respondent is a seed.
    SuccessiveSampling,
    /// Seeds drawn PPS, then coupon referral chains.
    #[default]
    CouponChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdsConfig {
    pub n_target: usize,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_coupons")]
    pub max_coupons: usize,
    /// Chance that an issued coupon comes back with a recruit.
    #[serde(default = "default_return")]
    pub coupon_return_prob: f64,
    #[serde(default)]
    pub mode: SamplingMode,
    #[serde(default)]
    pub seed: u64,
}

fn default_seeds() -> usize {
    10
}
fn default_coupons() -> usize {
    3
}
fn default_return() -> f64 {
    1.0
}

impl RdsConfig {
    fn validate(&self, true_n: u64) -> Result<()> {
        if self.n_target as u64 > true_n {
            return Err(Error::Invalid(format!(
                "target sample size {} exceeds population size {true_n}",
                self.n_target
            )));
        }
        if self.n_seeds == 0 || self.n_seeds > self.n_target.max(1) {
            return Err(Error::Invalid(format!(
                "need between 1 and {} seeds, got {}",
                self.n_target, self.n_seeds
            )));
        }
        if !(0.0..=1.0).contains(&self.coupon_return_prob) {
            return Err(Error::Invalid("coupon return probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub forest: RecruitmentForest,
    /// Population unit behind each respondent, by respondent index.
    pub unit_ids: Vec<usize>,
    /// The sample stopped short of its target.
    pub truncated: bool,
    pub warnings: Vec<String>,
}

fn pps_table(pop: &SyntheticPopulation) -> Fenwick {
    let w: Vec<u64> = pop.degrees.iter().map(|&d| d as u64).collect();
    Fenwick::new(&w)
}

fn build_sample(
    pop: &SyntheticPopulation,
    picks: Vec<(usize, Option<usize>)>,
    max_coupons: usize,
    warnings: Vec<String>,
    truncated: bool,
) -> Result<SimulatedSample> {
    let respondents = picks
        .iter()
        .enumerate()
        .map(|(order, &(unit, rec))| pop.respondent(unit, rec, order + 1))
        .collect();
    let forest = RecruitmentForest::new(respondents, pop.schema(), max_coupons)?;
    Ok(SimulatedSample {
        forest,
        unit_ids: picks.into_iter().map(|(u, _)| u).collect(),
        truncated,
        warnings,
    })
}

/// `n` units drawn successively with probability proportional to degree.
pub fn successive_sampling_draw(
    pop: &SyntheticPopulation,
    n: usize,
    seed: u64,
) -> Result<SimulatedSample> {
    if n as u64 > pop.true_n {
        return Err(Error::Invalid(format!(
            "sample size {n} exceeds population size {}",
            pop.true_n
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut table = pps_table(pop);
    let picks = (0..n)
        .map(|_| (table.draw(&mut rng).expect("positive degrees remain"), None))
        .collect();
    build_sample(pop, picks, default_coupons(), Vec::new(), false)
}

/// Coupon-chain RDS: seeds drawn PPS, coupons redeemed breadth-first, each
/// recruit chosen PPS among unsampled units.
pub fn simulate_rds(pop: &SyntheticPopulation, cfg: &RdsConfig) -> Result<SimulatedSample> {
    cfg.validate(pop.true_n)?;
    if cfg.mode == SamplingMode::SuccessiveSampling {
        return successive_sampling_draw(pop, cfg.n_target, cfg.seed);
    }
    let mut rng: SimRng = rng_from_seed(cfg.seed);
    let mut table = pps_table(pop);
    let mut picks: Vec<(usize, Option<usize>)> = Vec::with_capacity(cfg.n_target);
    let mut queue = VecDeque::new();
    for _ in 0..cfg.n_seeds {
        let unit = table.draw(&mut rng).expect("positive degrees remain");
        picks.push((unit, None));
        queue.push_back(unit);
    }
    'outer: while let Some(recruiter) = queue.pop_front() {
        for _ in 0..cfg.max_coupons {
            if picks.len() >= cfg.n_target {
                break 'outer;
            }
            if cfg.coupon_return_prob < 1.0 && rng.random::<f64>() >= cfg.coupon_return_prob {
                continue;
            }
            let Some(unit) = table.draw(&mut rng) else {
                break 'outer;
            };
            picks.push((unit, Some(recruiter)));
            queue.push_back(unit);
        }
    }
    let mut warnings = Vec::new();
    let truncated = picks.len() < cfg.n_target;
    if truncated {
        let msg = format!(
            "recruitment died out after {} of {} respondents",
            picks.len(),
            cfg.n_target
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    build_sample(pop, picks, cfg.max_coupons, warnings, truncated)
}

/// Prior for a scenario; the lower bound is always the realized sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPrior {
    #[serde(flatten)]
    pub form: PriorForm,
    #[serde(default)]
    pub hard_max: Option<u64>,
}

impl ScenarioPrior {
    pub fn spec(&self, sample_size: u64) -> PriorSpec {
        let mut spec = PriorSpec::with_default_max(self.form, sample_size);
        if let Some(max) = self.hard_max {
            spec.hard_max = max;
        }
        spec
    }
}

/// A recovery experiment: population, sampling design, analysis settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub population_size: u64,
    pub degree: DegreeModel,
    #[serde(default)]
    pub traits: Vec<TraitConfig>,
    pub sampling: RdsConfig,
    /// Population-size prior; no size estimation when absent.
    #[serde(default)]
    pub prior: Option<ScenarioPrior>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Independent chains per replicate.
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Simulation draws for the trait-share weights (at the true N).
    #[serde(default = "default_sim_draws")]
    pub weight_draws: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_replicates() -> usize {
    10
}
fn default_trials() -> usize {
    1
}
fn default_sim_draws() -> usize {
    1000
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Seeds for replicate `r`: population, sample, chains.
    fn replicate_seeds(&self, r: usize) -> (u64, u64, u64) {
        let base = sub_seed(self.seed, r as u64);
        (sub_seed(base, 0), sub_seed(base, 1), sub_seed(base, 2))
    }

    pub fn population(&self, replicate: usize) -> Result<SyntheticPopulation> {
        let (pop_seed, _, _) = self.replicate_seeds(replicate);
        generate_population(self.population_size, &self.degree, &self.traits, pop_seed)
    }

    pub fn sample(&self, pop: &SyntheticPopulation, replicate: usize) -> Result<SimulatedSample> {
        let (_, sample_seed, _) = self.replicate_seeds(replicate);
        simulate_rds(
            pop,
            &RdsConfig {
                seed: sample_seed,
                ..self.sampling.clone()
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRecovery {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub category: String,
    /// Population share, percent.
    pub truth: f64,
    pub estimate: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecovery {
    pub posterior_mean: f64,
    pub posterior_median: f64,
    pub interval90: (f64, f64),
    pub covered: bool,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub sample_size: usize,
    pub warnings: Vec<String>,
    pub size: Option<SizeRecovery>,
    pub traits: Vec<TraitRecovery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitBias {
    #[serde(rename = "trait")]
    pub trait_name: String,
    pub category: String,
    pub mean_truth: f64,
    pub mean_estimate: f64,
    pub mean_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub name: Option<String>,
    pub true_n: u64,
    pub replicates: Vec<ReplicateResult>,
    /// Replicates whose 90% interval contains the true size.
    pub covered: Option<usize>,
    pub coverage: Option<f64>,
    pub mean_of_means: Option<f64>,
    /// `(mean_of_means - N) / N`.
    pub relative_bias: Option<f64>,
    pub trait_bias: Vec<TraitBias>,
}

fn estimate_traits(
    pop: &SyntheticPopulation,
    sample: &SimulatedSample,
    weights: &InclusionWeights,
) -> Result<Vec<TraitRecovery>> {
    let mut out = Vec::new();
    for t in &pop.trait_configs {
        for category in t.prevalence.keys() {
            let truth = pop.prevalence(&t.name, category)?;
            let est = weighted_proportion(&sample.forest, weights, &t.name, category)?;
            out.push(TraitRecovery {
                trait_name: t.name.clone(),
                category: category.clone(),
                truth,
                estimate: est.point,
                bias: est.point - truth,
            });
        }
    }
    Ok(out)
}

fn run_replicate(scenario: &Scenario, r: usize) -> Result<ReplicateResult> {
    let pop = scenario.population(r)?;
    let sample = scenario.sample(&pop, r)?;
    let (_, _, chain_seed) = scenario.replicate_seeds(r);
    let forest = &sample.forest;

    let traits = if scenario.traits.is_empty() {
        Vec::new()
    } else {
        let cfg = GileSsConfig {
            sim_draws: scenario.weight_draws,
            ..GileSsConfig::new(pop.true_n, chain_seed)
        };
        let w = gile_ss_weights(forest, &cfg)?;
        estimate_traits(&pop, &sample, &w)?
    };

    let size = match &scenario.prior {
        None => None,
        Some(p) => {
            let prior = fit_prior(&p.spec(forest.len() as u64))?;
            let model = fit_degree_model(forest, &rds2_weights(forest))?;
            let lik = SuccessiveSamplingLikelihood::new(&forest.degrees(), scenario.mcmc.mc_draws)?;
            let runs = multi_trial(&lik, &prior, &model, &scenario.mcmc, scenario.trials, chain_seed)?;
            let pooled: Vec<f64> = runs.pooled_samples().iter().map(|&x| x as f64).collect();
            let pooled = Summary::from_samples(&pooled);
            let interval90 = (
                pooled.quantile(0.05).expect("standard level"),
                pooled.quantile(0.95).expect("standard level"),
            );
            let truth = pop.true_n as f64;
            Some(SizeRecovery {
                posterior_mean: runs.aggregate.average.mean,
                posterior_median: runs.aggregate.average.median,
                interval90,
                covered: interval90.0 <= truth && truth <= interval90.1,
                acceptance_rate: mean(
                    &runs
                        .trials
                        .iter()
                        .map(|t| t.acceptance_rate)
                        .collect::<Vec<_>>(),
                ),
            })
        }
    };
    Ok(ReplicateResult {
        replicate: r,
        sample_size: forest.len(),
        warnings: sample.warnings.clone(),
        size,
        traits,
    })
}

/// Run every replicate of `scenario` in parallel and summarize coverage and
/// bias against the known truth.
pub fn recovery_experiment(scenario: &Scenario) -> Result<RecoveryReport> {
    if scenario.replicates == 0 {
        return Err(Error::Invalid("at least one replicate is required".into()));
    }
    let replicates = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| run_replicate(scenario, r))
        .collect::<Result<Vec<_>>>()?;

    let sizes: Vec<&SizeRecovery> = replicates.iter().filter_map(|r| r.size.as_ref()).collect();
    let (covered, coverage, mean_of_means, relative_bias) = if sizes.is_empty() {
        (None, None, None, None)
    } else {
        let c = sizes.iter().filter(|s| s.covered).count();
        let m = mean(&sizes.iter().map(|s| s.posterior_mean).collect::<Vec<_>>());
        let truth = scenario.population_size as f64;
        (
            Some(c),
            Some(c as f64 / sizes.len() as f64),
            Some(m),
            Some((m - truth) / truth),
        )
    };

    let mut trait_bias = Vec::new();
    if let Some(first) = replicates.first() {
        for (k, t) in first.traits.iter().enumerate() {
            let col: Vec<&TraitRecovery> = replicates.iter().map(|r| &r.traits[k]).collect();
            let avg = |f: fn(&TraitRecovery) -> f64| mean(&col.iter().map(|x| f(x)).collect::<Vec<_>>());
            trait_bias.push(TraitBias {
                trait_name: t.trait_name.clone(),
                category: t.category.clone(),
                mean_truth: avg(|x| x.truth),
                mean_estimate: avg(|x| x.estimate),
                mean_bias: avg(|x| x.bias),
            });
        }
    }

    Ok(RecoveryReport {
        name: scenario.name.clone(),
        true_n: scenario.population_size,
        replicates,
        covered,
        coverage,
        mean_of_means,
        relative_bias,
        trait_bias,
    })
}

/// Default upper prior bound for a scenario point estimate.
pub fn default_hard_max(point: f64) -> u64 {
    (DEFAULT_HARD_MAX_FACTOR * point).ceil() as u64
}
