//! Metropolis-Hastings over population size.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::degree::DegreeModel;
use super::likelihood::{PopulationLikelihood, SuccessiveSamplingLikelihood};
use super::prior::FittedPrior;
use super::summary::Summary;
use crate::rds_model::RecruitmentForest;
use crate::seed::rng_from_seed;
use crate::stats::sample_sd;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub thin: usize,
    /// Standard deviation of the Gaussian step on log N.
    pub proposal_scale: f64,
    /// Standard deviation of the log-normal step on the degree mean.
    pub degree_proposal_scale: f64,
    /// Population-size steps between degree-mean updates.
    pub degree_update_every: usize,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            burn_in: 1000,
            samples: 5000,
            thin: 1,
            proposal_scale: 0.15,
            degree_proposal_scale: 0.05,
            degree_update_every: 10,
            mc_draws: 100,
            seed: 0,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::Invalid(format!(
                "need at least 1000 retained samples, got {}",
                self.samples
            )));
        }
        if self.thin == 0 || !(self.proposal_scale > 0.0) || !(self.degree_proposal_scale > 0.0) {
            return Err(Error::Invalid(
                "thin and proposal scales must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    #[serde(skip)]
    pub samples: Vec<u64>,
    #[serde(flatten)]
    pub summary: Summary,
    /// Acceptance rate of population-size proposals.
    pub acceptance_rate: f64,
    /// Acceptance rate of degree-mean proposals, when they were made.
    pub degree_acceptance_rate: Option<f64>,
    /// Posterior mean of the degree-mean parameter.
    pub mean_degree: Option<f64>,
    pub trial_seed: u64,
    pub warnings: Vec<String>,
}

impl PosteriorSummary {
    /// Equal-tailed 90% credible interval.
    pub fn interval90(&self) -> (f64, f64) {
        (
            self.summary.quantile(0.05).unwrap(),
            self.summary.quantile(0.95).unwrap(),
        )
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Log probability that the rounded log-normal step from `from` lands on `to`.
fn ln_proposal(from: u64, to: u64, scale: f64) -> f64 {
    let centre = (from as f64).ln();
    let lo = ((to as f64 - 0.5).max(f64::MIN_POSITIVE).ln() - centre) / scale;
    let hi = ((to as f64 + 0.5).ln() - centre) / scale;
    let p = if lo > 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    };
    p.max(f64::MIN_POSITIVE).ln()
}

/// SS-PSE posterior for a recruitment forest, using its degrees in sample order.
pub fn run_mcmc(
    forest: &RecruitmentForest,
    prior: &FittedPrior,
    model: &DegreeModel,
    cfg: &McmcConfig,
) -> Result<PosteriorSummary> {
    let likelihood = SuccessiveSamplingLikelihood::new(&forest.degrees(), cfg.mc_draws)?;
    run_mcmc_with(&likelihood, prior, model, cfg)
}

/// Random-walk Metropolis-Hastings on N with periodic degree-mean updates.
///
/// N moves by a rounded Gaussian step on log N with the exact Hastings
/// correction for the rounding. Every `degree_update_every` steps the degree
/// mean takes a log-normal step under a flat prior on `(1, cap]`. Monte Carlo
/// likelihood values are carried with the state (pseudo-marginal).
pub fn run_mcmc_with<L: PopulationLikelihood>(
    likelihood: &L,
    prior: &FittedPrior,
    model: &DegreeModel,
    cfg: &McmcConfig,
) -> Result<PosteriorSummary> {
    cfg.validate()?;
    let n = likelihood.sample_size() as u64;
    let (lo, hi) = (prior.spec.hard_min.max(n), prior.spec.hard_max);
    if hi < lo {
        return Err(Error::Invalid(format!(
            "prior upper bound {hi} is below the sample size {n}"
        )));
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut pop = (prior.quantile(0.5).round() as u64).clamp(lo, hi);
    let mut current_model = model.clone();
    let update_degree = likelihood.depends_on_degree_model() && model.mean_parameter().is_some();
    let cap = model.cap as f64;

    let mut ll = likelihood.log_likelihood(pop, &current_model, rng.random());
    let mut lp = prior.ln_mass(pop);
    if !(ll + lp).is_finite() {
        return Err(Error::Chain(format!(
            "target density is not finite at the starting point N = {pop}"
        )));
    }

    let total_steps = cfg.burn_in + cfg.samples * cfg.thin;
    let mut samples = Vec::with_capacity(cfg.samples);
    let mut degree_trace = Vec::with_capacity(cfg.samples);
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let (mut deg_accepted, mut deg_proposed) = (0usize, 0usize);

    for step in 0..total_steps {
        let z: f64 = rng.sample(StandardNormal);
        let proposal = ((pop as f64).ln() + cfg.proposal_scale * z).exp().round();
        let like_seed: u64 = rng.random();
        let u: f64 = rng.random();
        proposed += 1;
        if proposal >= lo as f64 && proposal <= hi as f64 {
            let cand = proposal as u64;
            if cand == pop {
                accepted += 1;
            } else {
                let cand_lp = prior.ln_mass(cand);
                let cand_ll = likelihood.log_likelihood(cand, &current_model, like_seed);
                let log_ratio = cand_lp + cand_ll - lp - ll
                    + ln_proposal(cand, pop, cfg.proposal_scale)
                    - ln_proposal(pop, cand, cfg.proposal_scale);
                if u.ln() < log_ratio {
                    pop = cand;
                    ll = cand_ll;
                    lp = cand_lp;
                    accepted += 1;
                }
            }
        }

        if update_degree && (step + 1) % cfg.degree_update_every == 0 {
            let mean = current_model.mean_parameter().unwrap();
            let z: f64 = rng.sample(StandardNormal);
            let cand_mean = mean * (cfg.degree_proposal_scale * z).exp();
            let like_seed: u64 = rng.random();
            let u: f64 = rng.random();
            deg_proposed += 1;
            if cand_mean > 1.0 && cand_mean <= cap {
                let cand_model = current_model.with_mean(cand_mean)?;
                let cand_ll = likelihood.log_likelihood(pop, &cand_model, like_seed);
                // log-normal proposal: q(old|new)/q(new|old) = new/old
                let log_ratio = cand_ll - ll + (cand_mean / mean).ln();
                if u.ln() < log_ratio {
                    current_model = cand_model;
                    ll = cand_ll;
                    deg_accepted += 1;
                }
            }
        }

        if step >= cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thin) {
            samples.push(pop);
            if let Some(m) = current_model.mean_parameter() {
                degree_trace.push(m);
            }
        }
    }

    if accepted == 0 {
        return Err(Error::Chain("every proposal was rejected".into()));
    }
    let acceptance_rate = accepted as f64 / proposed as f64;
    let mut warnings = Vec::new();
    if !(0.05..=0.95).contains(&acceptance_rate) {
        let msg = format!("acceptance rate {acceptance_rate:.3} is outside (0.05, 0.95)");
        warn!("{msg}");
        warnings.push(msg);
    }
    let as_f64: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
    Ok(PosteriorSummary {
        summary: Summary::from_samples(&as_f64),
        samples,
        acceptance_rate,
        degree_acceptance_rate: (deg_proposed > 0)
            .then(|| deg_accepted as f64 / deg_proposed as f64),
        mean_degree: (update_degree && !degree_trace.is_empty())
            .then(|| degree_trace.iter().sum::<f64>() / degree_trace.len() as f64),
        trial_seed: cfg.seed,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub trials: usize,
    /// Per-statistic average over trials; `average.mean` is the mean of means.
    pub average: Summary,
    /// Standard error of each statistic across trials; absent for one trial.
    pub standard_error: Option<Summary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiTrial {
    pub trials: Vec<PosteriorSummary>,
    pub aggregate: TrialAggregate,
}

impl MultiTrial {
    /// Retained samples of every trial, in trial order.
    pub fn pooled_samples(&self) -> Vec<u64> {
        self.trials.iter().flat_map(|t| t.samples.iter().copied()).collect()
    }
}

/// Average summaries over trials. Order-independent up to the fixed trial
/// order of `trials`.
pub fn aggregate_trials(trials: &[PosteriorSummary]) -> TrialAggregate {
    let k = trials.len();
    let stat = |f: &dyn Fn(&Summary) -> f64| -> Vec<f64> {
        trials.iter().map(|t| f(&t.summary)).collect()
    };
    let first = &trials[0].summary;
    let combine = |reduce: &dyn Fn(&[f64]) -> f64| Summary {
        mean: reduce(&stat(&|s| s.mean)),
        median: reduce(&stat(&|s| s.median)),
        mode: reduce(&stat(&|s| s.mode)),
        quantiles: first
            .quantiles
            .iter()
            .enumerate()
            .map(|(i, &(level, _))| (level, reduce(&stat(&|s| s.quantiles[i].1))))
            .collect(),
    };
    let average = combine(&|xs| xs.iter().sum::<f64>() / xs.len() as f64);
    let standard_error =
        (k >= 2).then(|| combine(&|xs| sample_sd(xs) / (xs.len() as f64).sqrt()));
    TrialAggregate {
        trials: k,
        average,
        standard_error,
    }
}

/// Independent chains with seeds `base_seed + 1 ..= base_seed + trials`, run
/// in parallel and aggregated in trial order.
pub fn multi_trial<L: PopulationLikelihood>(
    likelihood: &L,
    prior: &FittedPrior,
    model: &DegreeModel,
    cfg: &McmcConfig,
    trials: usize,
    base_seed: u64,
) -> Result<MultiTrial> {
    let seeds: Vec<u64> = (1..=trials as u64).map(|i| base_seed.wrapping_add(i)).collect();
    multi_trial_with_seeds(likelihood, prior, model, cfg, &seeds)
}

pub fn multi_trial_with_seeds<L: PopulationLikelihood>(
    likelihood: &L,
    prior: &FittedPrior,
    model: &DegreeModel,
    cfg: &McmcConfig,
    seeds: &[u64],
) -> Result<MultiTrial> {
    if seeds.is_empty() {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let trials = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = McmcConfig {
                seed,
                ..cfg.clone()
            };
            run_mcmc_with(likelihood, prior, model, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate_trials(&trials);
    Ok(MultiTrial { trials, aggregate })
}
