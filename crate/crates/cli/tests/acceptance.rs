//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hpe_core::netsim::{recovery_experiment, Scenario};
use hpe_core::prior_pipeline::{ci95_to_ci50, normal_ci50_ratio, IntervalEstimate, PriorReport};
use hpe_core::rds_model::{read_dataset, ParseOptions};
use hpe_core::seed::{rng_from_seed, sub_seed};
use hpe_core::ss_estimator::{
    bootstrap_trait, gile_ss_weights, rds2_weights, ss_inclusion_probabilities, BootstrapConfig,
    GileSsConfig,
};
use hpe_core::sspse::{
    fit_prior, multi_trial, posterior_table, sequence_log_likelihood, DegreeModel, FlatLikelihood,
    McmcConfig, PriorForm, PriorSpec, TableRow,
};

const BIN: &str = env!("CARGO_BIN_EXE_hpe");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: Vec<String>, summary: String) -> Outcome {
    Outcome {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            summary
        } else {
            format!("{summary}; {}", failures.join("; "))
        },
    }
}

fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol + 1e-9
}

fn hpe(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("HPE_SEED")
        .output()
        .expect("failed to launch hpe")
}

fn run_ok(args: &[&str], cwd: &Path) -> Result<std::process::Output, String> {
    let out = hpe(args, cwd);
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "`hpe {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

// ---------------------------------------------------------------- 1

fn table_one() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    // (field, point, half, point tolerance, half tolerance) per county
    type Want = (&'static str, f64, Option<f64>, f64, f64);
    let cook: [Want; 8] = [
        ("p_lm_given_ssh", 8.58, None, 0.01, 0.0),
        ("n_lm_ssh", 1205.0, None, 1.0, 0.0),
        ("p_domes_part", 19.19, Some(6.84), 0.01, 0.01),
        ("p_ssh_given_lmsm", 9.60, Some(3.42), 0.01, 0.01),
        ("prior_n_lmsm", 12552.0, Some(6946.0), 1.0, 1.0),
        ("p_msm_given_lm", 2.71, Some(1.50), 0.01, 0.01),
        ("n_lmsm_hiv_pos", 1770.0, Some(860.0), 1.0, 1.0),
        ("n_lmsm_hiv_unk", 2146.0, Some(640.0), 1.0, 1.0),
    ];
    let sf: [Want; 8] = [
        ("p_lm_given_ssh", 8.47, None, 0.01, 0.0),
        ("n_lm_ssh", 885.0, None, 1.0, 0.0),
        ("p_domes_part", 18.29, Some(6.56), 0.01, 0.01),
        ("p_ssh_given_lmsm", 9.15, Some(3.28), 0.01, 0.01),
        ("prior_n_lmsm", 9672.0, Some(5405.0), 1.0, 1.0),
        ("p_msm_given_lm", 17.83, Some(9.96), 0.01, 0.01),
        ("n_lmsm_hiv_pos", 3347.0, Some(948.0), 1.0, 1.0),
        ("n_lmsm_hiv_unk", 977.0, Some(657.0), 1.0, 10.0),
    ];
    let mut checked = 0;
    for (county, wants) in [("cook", cook), ("sf", sf)] {
        let out = format!("out-{county}");
        let start = Instant::now();
        if let Err(e) = run_ok(&["prior", "--county", county, "--out-dir", &out], dir.path()) {
            failures.push(e);
            continue;
        }
        slowest = slowest.max(start.elapsed());
        let text = fs::read_to_string(dir.path().join(&out).join("prior_report.json")).unwrap();
        let report: PriorReport = serde_json::from_str(&text).unwrap();
        let fields: BTreeMap<&str, &IntervalEstimate> = [
            ("p_lm_given_ssh", &report.p_lm_given_ssh),
            ("n_lm_ssh", &report.n_lm_ssh),
            ("p_domes_part", &report.p_domes_part),
            ("p_ssh_given_lmsm", &report.p_ssh_given_lmsm),
            ("prior_n_lmsm", &report.prior_n_lmsm),
            ("p_msm_given_lm", &report.p_msm_given_lm),
            ("n_lmsm_hiv_pos", &report.n_lmsm_hiv_pos),
            ("n_lmsm_hiv_unk", &report.n_lmsm_hiv_unk),
        ]
        .into_iter()
        .collect();
        for (name, point, half, tp, th) in wants {
            let v = fields[name];
            checked += 1;
            let half_ok = match (v.half95, half) {
                (Some(a), Some(b)) => close(a, b, th),
                (None, None) => true,
                _ => false,
            };
            if !close(v.point, point, tp) || !half_ok {
                failures.push(format!("{county} {name} = {v} (want {point} ±{half:?})"));
            }
        }
    }
    if slowest >= Duration::from_secs(1) {
        failures.push(format!("slowest run {slowest:?} (limit 1 s)"));
    }
    outcome(failures, format!("{checked} values checked, slowest run {slowest:.2?}"))
}

// ---------------------------------------------------------------- 2

fn table_three() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    struct County {
        name: &'static str,
        prior: TableRow,
        posterior: TableRow,
        rates: [f64; 2],
        relative: TableRow,
        pos: TableRow,
        unk: TableRow,
    }
    let counties = [
        County {
            name: "cook",
            prior: [12878.0, 10708.0, 7772.0, 7660.0, 15598.0, 22654.0, 4458.0, 34801.0],
            posterior: [10071.5, 8545.3, 6904.6, 6013.0, 12335.4, 17607.9, 2583.9, 27020.4],
            rates: [14.1, 17.1],
            relative: [-21.79, -20.20, -11.16, -21.50, -20.92, -22.27, -42.04, -22.36],
            pos: [1420.08, 1204.89, 973.55, 847.83, 1739.29, 2482.71, 364.33, 3809.88],
            unk: [1722.23, 1461.25, 1180.69, 1028.22, 2109.35, 3010.95, 441.85, 4620.49],
        },
        County {
            name: "sf",
            prior: [9061.0, 7722.0, 5810.0, 5642.0, 10958.0, 15475.0, 3382.0, 22986.0],
            posterior: [8469.8, 7393.5, 5925.8, 5300.2, 10416.5, 14516.3, 2448.5, 21020.1],
            rates: [34.6, 10.1],
            relative: [-6.52, -4.25, 1.99, -6.06, -4.94, -6.20, -27.60, -8.55],
            pos: [2930.55, 2558.15, 2050.33, 1833.87, 3604.11, 5022.64, 847.18, 7272.95],
            unk: [855.45, 746.74, 598.51, 535.32, 1052.07, 1466.15, 247.30, 2123.03],
        },
    ];
    let mut checked = 0;
    for c in &counties {
        let t = match posterior_table(
            c.prior,
            c.posterior,
            &[("hiv_pos".into(), c.rates[0]), ("hiv_unk".into(), c.rates[1])],
        ) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{}: {e}", c.name));
                continue;
            }
        };
        for (label, got, want) in [
            ("relative change", &t.relative_change, &c.relative),
            ("hiv_pos", &t.subpopulations[0].values, &c.pos),
            ("hiv_unk", &t.subpopulations[1].values, &c.unk),
        ] {
            for (g, w) in got.iter().zip(want) {
                checked += 1;
                if !close(*g, *w, 0.01) {
                    failures.push(format!("{} {label}: {g:.2} vs {w:.2}", c.name));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("took {elapsed:?} (limit 1 s)"));
    }
    outcome(failures, format!("{checked} cells checked in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 3a

/// Inclusion probabilities of an `n`-draw PPS-without-replacement sample by
/// walking every ordered draw sequence.
fn enumerate_inclusion(sizes: &[f64], n: usize) -> Vec<f64> {
    fn walk(sizes: &[f64], taken: &mut Vec<bool>, left: usize, prob: f64, acc: &mut [f64]) {
        if left == 0 {
            for (i, &t) in taken.iter().enumerate() {
                if t {
                    acc[i] += prob;
                }
            }
            return;
        }
        let rest: f64 = (0..sizes.len()).filter(|&i| !taken[i]).map(|i| sizes[i]).sum();
        for i in 0..sizes.len() {
            if !taken[i] {
                taken[i] = true;
                walk(sizes, taken, left - 1, prob * sizes[i] / rest, acc);
                taken[i] = false;
            }
        }
    }
    let mut acc = vec![0.0; sizes.len()];
    walk(sizes, &mut vec![false; sizes.len()], n, 1.0, &mut acc);
    acc
}

fn gile_oracle() -> Outcome {
    let start = Instant::now();
    let exact = enumerate_inclusion(&[1.0, 1.0, 2.0, 2.0, 3.0, 5.0, 5.0], 4);
    let exact_class = [exact[0], exact[2], exact[4], exact[5]];
    let est = ss_inclusion_probabilities(&[1.0, 2.0, 3.0, 5.0], &[2, 2, 1, 2], 4, 20_000, &mut rng_from_seed(31));
    let worst = est
        .iter()
        .zip(exact_class)
        .map(|(e, x)| (e - x).abs())
        .fold(0.0, f64::max);
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if worst > 0.01 {
        failures.push(format!("max error {worst:.4} > 0.01"));
    }
    if elapsed >= Duration::from_secs(10) {
        failures.push(format!("took {elapsed:?} (limit 10 s)"));
    }
    outcome(failures, format!("max |error| {worst:.4} in {elapsed:.2?}"))
}

// ---------------------------------------------------------------- 3b

fn with_replacement_limit() -> Outcome {
    let degrees = [1, 3, 7, 2, 12, 5, 5, 9, 20, 4, 2, 6, 15, 3, 8, 1, 11, 4, 30, 6];
    let mut csv = String::from("id,recruiter_id,degree,order\n");
    for (i, d) in degrees.iter().enumerate() {
        csv.push_str(&format!("r{i},,{d},\n"));
    }
    let forest = read_dataset(csv.as_bytes(), None, &ParseOptions::default()).unwrap();
    let gile = match gile_ss_weights(&forest, &GileSsConfig::new(1_000_000_000, 3)) {
        Ok(w) => w,
        Err(e) => return outcome(vec![e.to_string()], String::new()),
    };
    let rds2 = rds2_weights(&forest);
    let worst = gile
        .weights
        .iter()
        .zip(&rds2.weights)
        .map(|(g, r)| ((g - r) / r).abs())
        .fold(0.0, f64::max);
    let failures = if worst < 0.02 {
        vec![]
    } else {
        vec![format!("max relative gap {worst:.4} >= 0.02")]
    };
    outcome(failures, format!("max relative gap {:.3}%", 100.0 * worst))
}

// ---------------------------------------------------------------- 3c

fn likelihood_oracle() -> Outcome {
    // degrees uniform on {1, 5}; sequence (5, 1) observed from N = 3
    let model = DegreeModel::from_pmf(vec![0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
    let exact = (0.5f64 * (5.0 / 7.0 * 0.5) + 0.5 * (5.0 / 11.0 * (1.0 / 6.0))).ln();
    let mut hits = 0;
    let mut failures = Vec::new();
    for seed in 0..20 {
        match sequence_log_likelihood(&[5, 1], 3, &model, 1000, seed) {
            Ok(e) if (e.log_likelihood - exact).abs() <= 3.0 * e.log_se => hits += 1,
            Ok(_) => {}
            Err(e) => failures.push(e.to_string()),
        }
    }
    if hits < 19 {
        failures.push(format!("only {hits}/20 within 3 SE"));
    }
    outcome(failures, format!("{hits}/20 seeds within 3 MC standard errors of the exact value"))
}

// ---------------------------------------------------------------- 3d

fn flat_likelihood_identity() -> Outcome {
    let prior = fit_prior(&PriorSpec {
        form: PriorForm::Interval50 {
            lower: 10162.0,
            upper: 14942.0,
        },
        hard_min: 323,
        hard_max: 129_099,
    })
    .unwrap();
    let model = DegreeModel::geometric(6.0, 60).unwrap();
    let cfg = McmcConfig {
        burn_in: 2000,
        samples: 40_000,
        proposal_scale: 0.5,
        ..McmcConfig::default()
    };
    let runs = match multi_trial(&FlatLikelihood { n: 323 }, &prior, &model, &cfg, 16, 100) {
        Ok(r) => r,
        Err(e) => return outcome(vec![e.to_string()], String::new()),
    };
    let post = &runs.aggregate.average;
    let p = &prior.summary;
    let mut stats = vec![("mean", post.mean, p.mean), ("median", post.median, p.median), ("mode", post.mode, p.mode)];
    for level in [0.025, 0.25, 0.75, 0.9, 0.975] {
        stats.push(("quantile", post.quantile(level).unwrap(), p.quantile(level).unwrap()));
    }
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (name, a, b) in stats {
        let rel = ((a - b) / b).abs();
        worst = worst.max(rel);
        if rel >= 0.02 {
            failures.push(format!("{name}: {a:.1} vs prior {b:.1}"));
        }
    }
    outcome(failures, format!("max relative gap {:.2}% over 8 statistics", 100.0 * worst))
}

// ---------------------------------------------------------------- 3e

fn recovery() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/recovery.toml");
    let scenario = Scenario::load(&path).unwrap();
    assert_eq!(
        (scenario.population_size, scenario.sampling.n_target, scenario.replicates),
        (1000, 300, 10)
    );
    assert_eq!(scenario.degree.mean_parameter(), Some(7.0));
    let start = Instant::now();
    let report = match recovery_experiment(&scenario) {
        Ok(r) => r,
        Err(e) => return outcome(vec![e.to_string()], String::new()),
    };
    let elapsed = start.elapsed();
    let covered = report.covered.unwrap_or(0);
    let mom = report.mean_of_means.unwrap_or(f64::NAN);
    let bias = (mom - 1000.0) / 1000.0;
    let mut failures = Vec::new();
    if covered < 8 {
        failures.push(format!("coverage {covered}/10 < 8"));
    }
    if !(bias.abs() <= 0.25) {
        failures.push(format!("mean of means {mom:.0} is {:+.0}% from 1000 (limit 25%)", 100.0 * bias));
    }
    if elapsed >= Duration::from_secs(300) {
        failures.push(format!("took {elapsed:?} (limit 5 min)"));
    }
    outcome(
        failures,
        format!("90% intervals cover N in {covered}/10, mean of means {mom:.0}, {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------- 3f

fn bootstrap_calibration() -> Outcome {
    let uniform = |seed: u64, i: u64| (sub_seed(seed, i) >> 11) as f64 / (1u64 << 53) as f64;
    let replicates = 200;
    let mut covered = 0;
    for r in 0..replicates {
        let mut csv = String::from("id,recruiter_id,degree,order,status\n");
        for i in 0..300 {
            let v = if uniform(sub_seed(501, r), i) < 0.3 { "yes" } else { "no" };
            csv.push_str(&format!("r{i},,4,,{v}\n"));
        }
        let forest = read_dataset(csv.as_bytes(), None, &ParseOptions::default()).unwrap();
        let boot = bootstrap_trait(
            &forest,
            &rds2_weights(&forest),
            "status",
            &BootstrapConfig {
                replicates: 500,
                seed: sub_seed(502, r),
            },
        )
        .unwrap();
        let yes = boot.estimates.iter().find(|e| e.category == "yes").unwrap();
        let (lo, hi) = yes.ci95.unwrap();
        if lo <= 30.0 && 30.0 <= hi {
            covered += 1;
        }
    }
    let coverage = covered as f64 / replicates as f64;
    let failures = if (0.85..=0.99).contains(&coverage) {
        vec![]
    } else {
        vec![format!("coverage {coverage:.3} outside [0.85, 0.99]")]
    };
    outcome(failures, format!("95% CI coverage {:.1}% over {replicates} SRS replicates", 100.0 * coverage))
}

// ---------------------------------------------------------------- 4

const SMALL_SCENARIO: &str = r#"
population_size = 800
replicates = 2
seed = 11

[degree]
family = "geometric"
mean = 6.0
cap = 120

[[traits]]
name = "hiv"
prevalence = { neg = 0.7, pos = 0.2, unknown = 0.1 }

[sampling]
n_target = 150
n_seeds = 8

[prior]
form = "median"
value = 1200.0

[mcmc]
burn_in = 200
samples = 1000
"#;

/// Every file in `dir` except run manifests, by name.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".manifest.json"))
        .map(|p: PathBuf| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(root.join("small.toml"), SMALL_SCENARIO).unwrap();
    let mut failures = Vec::new();
    // the dataset used by the other subcommands
    if let Err(e) = run_ok(&["simulate", "small.toml", "--seed", "7", "--out-dir", "data"], root) {
        return outcome(vec![e], String::new());
    }
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("ingest", vec!["ingest", "data/sample.csv"]),
        ("estimate rds2", vec!["estimate", "data/sample.csv", "--trait", "hiv", "--bootstrap", "300"]),
        (
            "estimate giless",
            vec!["estimate", "data/sample.csv", "--trait", "hiv", "--weights", "giless", "--N", "800", "--bootstrap", "300"],
        ),
        ("prior", vec!["prior", "--county", "cook"]),
        (
            "pse",
            vec![
                "pse", "data/sample.csv", "--prior-median", "1200", "--hiv-pos", "20", "--burn-in", "200",
                "--samples", "1000", "--trials", "3",
            ],
        ),
        ("simulate", vec!["simulate", "small.toml"]),
    ];
    let mut compared = 0;
    for (k, (label, args)) in commands.iter().enumerate() {
        let mut runs = Vec::new();
        for (variant, extra) in [("a", vec![]), ("b", vec![]), ("serial", vec!["--threads", "1"])] {
            let out = format!("run{k}-{variant}");
            let mut full: Vec<&str> = args.clone();
            full.extend(["--seed", "7", "--out-dir", &out]);
            full.extend(extra);
            match run_ok(&full, root) {
                Ok(o) => runs.push((outputs(&root.join(&out)), o.stdout)),
                Err(e) => failures.push(e),
            }
        }
        if runs.len() == 3 {
            let (first, stdout) = &runs[0];
            for (other, other_stdout) in &runs[1..] {
                compared += first.len();
                if first != other || stdout != other_stdout {
                    failures.push(format!("{label}: outputs differ between runs"));
                }
            }
            if first.is_empty() {
                failures.push(format!("{label}: wrote nothing"));
            }
        }
    }
    // report: verifies and re-runs from the manifest alone
    for manifest in ["run1-a/estimate.manifest.json", "run4-a/pse.manifest.json"] {
        if let Err(e) = run_ok(&["report", manifest, "--rerun"], root) {
            failures.push(e);
        }
    }
    outcome(
        failures,
        format!("{} subcommands x 3 runs (incl. --threads 1), {compared} file comparisons, 2 manifest re-runs", commands.len()),
    )
}

// ---------------------------------------------------------------- 5

fn ci_width_rule() -> Outcome {
    let ratio = normal_ci50_ratio();
    let (lo, hi) = ci95_to_ci50(12552.0, 6946.0).unwrap();
    let implied = (hi - lo) / (2.0 * 6946.0);
    let mut failures = Vec::new();
    if format!("{ratio:.4}") != "0.3441" {
        failures.push(format!("ratio {ratio:.6} does not round to 0.3441"));
    }
    if format!("{implied:.4}") != "0.3441" {
        failures.push(format!("interval width ratio {implied:.6}"));
    }
    outcome(failures, format!("z(0.75)/z(0.975) = {ratio:.6}; cook 50% interval ({lo:.0}, {hi:.0})"))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("1", "county prior chain reproduces the published census-bridge table", table_one),
        ("2", "posterior table arithmetic reproduces relative changes and subpopulation rows", table_three),
        ("3a", "successive-sampling inclusion probabilities match exhaustive enumeration", gile_oracle),
        ("3b", "successive-sampling weights reduce to RDS-II for a huge population", with_replacement_limit),
        ("3c", "order likelihood matches enumeration at N <= 3", likelihood_oracle),
        ("3d", "flat likelihood returns the prior", flat_likelihood_identity),
        ("3e", "posterior recovers a known population size", recovery),
        ("3f", "bootstrap 95% intervals are calibrated under SRS", bootstrap_calibration),
        ("4", "identical inputs and seed give byte-identical outputs", determinism),
        ("5", "95% to 50% interval width ratio", ci_width_rule),
    ];
    let mut failed = Vec::new();
    for (id, title, check) in criteria {
        let o = check();
        println!("{} {id:<3} {title}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", criteria.len());
    } else {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
