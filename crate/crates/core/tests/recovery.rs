//! Simulation oracles: estimators run on synthetic populations with known
//! truth.

use std::time::Instant;

use hpe_core::netsim::{
    generate_population, recovery_experiment, successive_sampling_draw, RdsConfig, SamplingMode,
    Scenario, ScenarioPrior, TraitConfig,
};
use hpe_core::rds_model::{read_dataset, ParseOptions};
use hpe_core::seed::{rng_from_seed, sub_seed};
use hpe_core::ss_estimator::{bootstrap_trait, rds2_weights, BootstrapConfig};
use hpe_core::sspse::{fit_degree_model, DegreeModel, McmcConfig, PriorForm};
use rand::Rng;

fn recovery_scenario() -> Scenario {
    Scenario {
        name: Some("recovery".into()),
        population_size: 1000,
        degree: DegreeModel::geometric(7.0, 200).unwrap(),
        traits: vec![],
        sampling: RdsConfig {
            n_target: 300,
            n_seeds: 300,
            max_coupons: 0,
            coupon_return_prob: 1.0,
            mode: SamplingMode::SuccessiveSampling,
            seed: 0,
        },
        prior: Some(ScenarioPrior {
            form: PriorForm::Interval50 {
                lower: 500.0,
                upper: 5000.0,
            },
            hard_max: None,
        }),
        replicates: 10,
        trials: 1,
        mcmc: McmcConfig::default(),
        weight_draws: 1000,
        seed: 2024,
    }
}

#[test]
fn posterior_interval_covers_true_size() {
    let start = Instant::now();
    let report = recovery_experiment(&recovery_scenario()).unwrap();
    for r in &report.replicates {
        let s = r.size.as_ref().unwrap();
        eprintln!(
            "replicate {}: mean {:.0} median {:.0} 90% ({:.0}, {:.0}) acc {:.2}",
            r.replicate, s.posterior_mean, s.posterior_median, s.interval90.0, s.interval90.1, s.acceptance_rate
        );
    }
    let covered = report.covered.unwrap();
    let mean_of_means = report.mean_of_means.unwrap();
    eprintln!("covered {covered}/10, mean of means {mean_of_means:.1}, {:?}", start.elapsed());
    assert!(covered >= 8, "only {covered} of 10 intervals cover the truth");
    for r in &report.replicates {
        let s = r.size.as_ref().unwrap();
        assert!(s.interval90.0 >= 300.0 && s.interval90.1 <= 27_500.0);
        assert!(s.acceptance_rate > 0.05 && s.acceptance_rate < 0.95);
    }
}

#[test]
fn trait_shares_are_unbiased_under_gile_weights() {
    let scenario = Scenario {
        traits: vec![TraitConfig::new("hiv", &[("neg", 0.7), ("pos", 0.3)])],
        sampling: RdsConfig {
            n_target: 300,
            n_seeds: 10,
            max_coupons: 3,
            coupon_return_prob: 1.0,
            mode: SamplingMode::CouponChain,
            seed: 0,
        },
        prior: None,
        replicates: 100,
        seed: 77,
        ..recovery_scenario()
    };
    let report = recovery_experiment(&scenario).unwrap();
    let pos = report
        .trait_bias
        .iter()
        .find(|t| t.category == "pos")
        .unwrap();
    eprintln!("{pos:?}");
    assert!((pos.mean_estimate - 30.0).abs() < 5.0);
    assert!(pos.mean_bias.abs() < 2.0);
}

#[test]
fn census_share_is_exact() {
    let scenario = Scenario {
        population_size: 200,
        traits: vec![TraitConfig::new("hiv", &[("neg", 0.7), ("pos", 0.3)])],
        sampling: RdsConfig {
            n_target: 200,
            n_seeds: 5,
            max_coupons: 3,
            coupon_return_prob: 1.0,
            mode: SamplingMode::CouponChain,
            seed: 0,
        },
        prior: None,
        replicates: 3,
        ..recovery_scenario()
    };
    let report = recovery_experiment(&scenario).unwrap();
    for r in &report.replicates {
        for t in &r.traits {
            assert!((t.estimate - t.truth).abs() < 1e-9, "{t:?}");
        }
    }
}

#[test]
fn weighted_degree_mean_recovers_population_mean() {
    let model = DegreeModel::geometric(7.0, 200).unwrap();
    let fits: Vec<f64> = (0..50)
        .map(|r| {
            let pop = generate_population(10_000, &model, &[], sub_seed(5, r)).unwrap();
            let s = successive_sampling_draw(&pop, 300, sub_seed(6, r)).unwrap();
            fit_degree_model(&s.forest, &rds2_weights(&s.forest))
                .unwrap()
                .mean_parameter()
                .unwrap()
        })
        .collect();
    let avg = fits.iter().sum::<f64>() / fits.len() as f64;
    eprintln!("average fitted mean {avg}");
    assert!((avg - 7.0).abs() < 0.7);
}

/// Simple random sample of `n` unlinked respondents with equal degrees and a
/// Bernoulli(p) trait.
fn srs_csv(n: usize, p: f64, seed: u64) -> String {
    let mut rng = rng_from_seed(seed);
    let mut csv = String::from("id,recruiter_id,degree,order,status\n");
    for i in 0..n {
        let v = if rng.random::<f64>() < p { "yes" } else { "no" };
        csv.push_str(&format!("r{i},,4,,{v}\n"));
    }
    csv
}

#[test]
fn bootstrap_intervals_are_calibrated_under_srs() {
    let replicates = 200;
    let mut covered = 0;
    let mut deffs = Vec::new();
    for r in 0..replicates {
        let csv = srs_csv(300, 0.3, sub_seed(99, r));
        let forest = read_dataset(csv.as_bytes(), None, &ParseOptions::default()).unwrap();
        let w = rds2_weights(&forest);
        let b = bootstrap_trait(
            &forest,
            &w,
            "status",
            &BootstrapConfig {
                replicates: 200,
                seed: sub_seed(100, r),
            },
        )
        .unwrap();
        let yes = b.estimates.iter().find(|e| e.category == "yes").unwrap();
        let (lo, hi) = yes.ci95.unwrap();
        if lo <= 30.0 && 30.0 <= hi {
            covered += 1;
        }
        deffs.push(yes.design_effect.unwrap());
    }
    let coverage = covered as f64 / replicates as f64;
    let mean_deff = deffs.iter().sum::<f64>() / deffs.len() as f64;
    eprintln!("coverage {coverage}, mean design effect {mean_deff}");
    assert!((0.85..=0.99).contains(&coverage));
    assert!(mean_deff > 0.8 && mean_deff < 1.25);
}
