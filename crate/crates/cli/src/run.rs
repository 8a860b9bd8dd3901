use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hpe_core::netsim::{recovery_experiment, Scenario};
use hpe_core::prior_pipeline::{build_prior_report, CountyInputs, PriorReport};
use hpe_core::rds_model::{parse_dataset, DegreeImputation, ParseOptions, RecruitmentForest, TraitSchema};
use hpe_core::seed::sub_seed;
use hpe_core::ss_estimator::{
    bootstrap_trait, gile_ss_weights, rds2_weights, write_estimates_csv, BootstrapConfig,
    GileSsConfig, InclusionWeights,
};
use hpe_core::sspse::{
    density_grid, fit_degree_model, fit_prior, multi_trial, posterior_table, table_row,
    write_density_csv, FlatLikelihood, McmcConfig, PriorForm, PriorSpec,
    SuccessiveSamplingLikelihood,
};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    Cli, Command, DatasetArgs, EstimateArgs, Format, Imputation, IngestArgs, PriorArgs, PseArgs,
    ReportArgs, SimulateArgs, Weights,
};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_file, FileRecord, RunManifest};

/// Seed used when neither `--seed` nor `HPE_SEED` is given.
const DEFAULT_SEED: u64 = 0;

struct Context<'a> {
    seed: Option<u64>,
    config: Option<&'a Path>,
    out_dir: &'a Path,
    format: Format,
    quiet: bool,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

/// What a subcommand read and wrote.
struct Outcome {
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    csv: String,
    json: String,
}

/// Run a parsed command line; `argv` is recorded in the manifest.
pub fn run(cli: &Cli, argv: &[String]) -> CliResult<()> {
    run_inner(cli, argv, false)
}

fn run_inner(cli: &Cli, argv: &[String], quiet: bool) -> CliResult<()> {
    let start = Instant::now();
    let ctx = Context {
        seed: cli.seed,
        config: cli.config.as_deref(),
        out_dir: &cli.out_dir,
        format: cli.format,
        quiet,
    };
    if let Command::Report(args) = &cli.command {
        return report(&ctx, args);
    }
    fs::create_dir_all(ctx.out_dir).map_err(|e| CliError::io(ctx.out_dir, e))?;
    let (name, outcome) = match &cli.command {
        Command::Ingest(a) => ("ingest", ingest(&ctx, a)?),
        Command::Estimate(a) => ("estimate", estimate(&ctx, a)?),
        Command::Prior(a) => ("prior", prior(&ctx, a)?),
        Command::Pse(a) => ("pse", pse(&ctx, a)?),
        Command::Simulate(a) => ("simulate", simulate(&ctx, a)?),
        Command::Report(_) => unreachable!(),
    };
    if !ctx.quiet {
        match ctx.format {
            Format::Csv => print!("{}", outcome.csv),
            Format::Json => print!("{}", outcome.json),
        }
    }
    let manifest = RunManifest {
        subcommand: name.to_string(),
        argv: argv.to_vec(),
        cwd: std::env::current_dir().map_err(|e| CliError::io(".", e))?,
        inputs: outcome
            .inputs
            .iter()
            .map(|p| FileRecord::of(p))
            .collect::<CliResult<_>>()?,
        config: ctx.config.map(Path::to_path_buf),
        seed: outcome.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outcome
            .outputs
            .iter()
            .map(|p| FileRecord::of(p))
            .collect::<CliResult<_>>()?,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    let path = manifest.write(ctx.out_dir)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> hpe_core::Result<()>) -> CliResult<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Invalid(e.to_string()))
}

/// Write the CSV and JSON forms of a result, returning their paths.
fn emit(ctx: &Context, stem: &str, csv: &str, json: &str) -> CliResult<Vec<PathBuf>> {
    let csv_path = ctx.out_dir.join(format!("{stem}.csv"));
    let json_path = ctx.out_dir.join(format!("{stem}.json"));
    write_file(&csv_path, csv)?;
    write_file(&json_path, json)?;
    Ok(vec![csv_path, json_path])
}

struct Loaded {
    forest: RecruitmentForest,
    inputs: Vec<PathBuf>,
}

fn load_dataset(ctx: &Context, args: &DatasetArgs) -> CliResult<Loaded> {
    let mut inputs = vec![args.dataset.clone()];
    let schema_path = args.schema.as_deref().or(ctx.config);
    let schema = match schema_path {
        Some(p) => {
            inputs.push(p.to_path_buf());
            Some(TraitSchema::load(p)?)
        }
        None => None,
    };
    let opts = ParseOptions {
        impute_degree: args.impute_degree.map(|Imputation::Median| DegreeImputation::Median),
        max_coupons: args.max_coupons,
    };
    let mut forest = parse_dataset(&args.dataset, schema.as_ref(), &opts)?;
    if let Some(subset) = &args.subset {
        let (t, v) = subset
            .split_once('=')
            .ok_or_else(|| CliError::Invalid(format!("--subset expects TRAIT=VALUE, got `{subset}`")))?;
        forest = forest.subset_by_trait(t.trim(), v.trim())?;
    }
    if forest.is_empty() {
        return Err(CliError::Invalid("dataset has no respondents".into()));
    }
    Ok(Loaded { forest, inputs })
}

fn ingest(ctx: &Context, args: &IngestArgs) -> CliResult<Outcome> {
    let Loaded { forest, inputs } = load_dataset(ctx, &args.data)?;
    let csv = csv_string(|buf| forest.write_csv(buf))?;
    let mut degrees = forest.degrees();
    degrees.sort_unstable();
    let waves = forest.waves();
    let summary = json!({
        "respondents": forest.len(),
        "seeds": forest.seeds().len(),
        "max_wave": waves.iter().max(),
        "seed_tree_sizes": forest.seed_tree_sizes(),
        "degree": {
            "min": degrees.first(),
            "median": degrees[degrees.len() / 2],
            "max": degrees.last(),
            "mean": degrees.iter().map(|&d| d as f64).sum::<f64>() / degrees.len() as f64,
        },
        "max_coupons": forest.max_coupons(),
        "schema": forest.schema(),
        "warnings": forest.warnings(),
    });
    let json = to_json(&summary)?;
    let data_path = ctx.out_dir.join("dataset.csv");
    let json_path = ctx.out_dir.join("ingest.json");
    write_file(&data_path, &csv)?;
    write_file(&json_path, &json)?;
    Ok(Outcome {
        seed: ctx.seed(),
        inputs,
        outputs: vec![data_path, json_path],
        csv,
        json,
    })
}

fn load_prior_report(path: &Path) -> CliResult<PriorReport> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Invalid(format!("{}: not a prior report: {e}", path.display()))
    })
}

fn estimate(ctx: &Context, args: &EstimateArgs) -> CliResult<Outcome> {
    let Loaded { forest, mut inputs } = load_dataset(ctx, &args.data)?;
    let seed = ctx.seed();
    let weights: InclusionWeights = match args.weights {
        Weights::Rds2 => rds2_weights(&forest),
        Weights::Giless => {
            let assumed_n = match (args.population_size, &args.prior_report) {
                (Some(n), _) => n,
                (None, Some(p)) => {
                    inputs.push(p.clone());
                    load_prior_report(p)?.prior_n_lmsm.point.round() as u64
                }
                (None, None) => 10 * forest.len() as u64,
            };
            let cfg = GileSsConfig {
                sim_draws: args.sim_draws,
                ..GileSsConfig::new(assumed_n, sub_seed(seed, 0))
            };
            gile_ss_weights(&forest, &cfg)?
        }
    };
    let mut traits = Vec::new();
    let mut estimates = Vec::new();
    for (k, t) in args.traits.iter().enumerate() {
        let boot = bootstrap_trait(
            &forest,
            &weights,
            t,
            &BootstrapConfig {
                replicates: args.bootstrap,
                seed: sub_seed(seed, k as u64 + 1),
            },
        )?;
        for w in &boot.warnings {
            log::warn!("{t}: {w}");
        }
        estimates.extend(boot.estimates.iter().cloned());
        traits.push(boot);
    }
    let csv = csv_string(|buf| write_estimates_csv(&estimates, buf))?;
    let json = to_json(&json!({
        "method": weights.method,
        "assumed_n": weights.assumed_n,
        "weights_converged": weights.converged,
        "weight_iterations": weights.iterations,
        "bootstrap_replicates": args.bootstrap,
        "sample_size": forest.len(),
        "traits": traits,
        "warnings": forest.warnings(),
    }))?;
    let outputs = emit(ctx, "estimates", &csv, &json)?;
    Ok(Outcome {
        seed,
        inputs,
        outputs,
        csv,
        json,
    })
}

fn prior(ctx: &Context, args: &PriorArgs) -> CliResult<Outcome> {
    let mut inputs = Vec::new();
    let county = match (args.county.as_deref(), ctx.config) {
        (Some("cook"), _) => CountyInputs::cook(),
        (Some("sf" | "san-francisco"), _) => CountyInputs::san_francisco(),
        (Some(path), _) => {
            inputs.push(PathBuf::from(path));
            CountyInputs::load(path)?
        }
        (None, Some(path)) => {
            inputs.push(path.to_path_buf());
            CountyInputs::load(path)?
        }
        (None, None) => {
            return Err(CliError::Invalid(
                "no county given: use --county cook|sf|PATH or --config PATH".into(),
            ))
        }
    };
    let report = build_prior_report(&county)?;
    let csv = csv_string(|buf| report.write_csv(buf))?;
    let json = to_json(&report)?;
    let outputs = emit(ctx, "prior_report", &csv, &json)?;
    Ok(Outcome {
        seed: ctx.seed(),
        inputs,
        outputs,
        csv,
        json,
    })
}

fn pse(ctx: &Context, args: &PseArgs) -> CliResult<Outcome> {
    let Loaded { forest, mut inputs } = load_dataset(ctx, &args.data)?;
    let seed = ctx.seed();
    let n = forest.len();

    let mut report = None;
    let form = if let Some(v) = args.prior_mean {
        PriorForm::Mean { value: v }
    } else if let Some(v) = args.prior_median {
        PriorForm::Median { value: v }
    } else if let Some(v) = args.prior_mode {
        PriorForm::Mode { value: v }
    } else if let Some(iv) = &args.prior_interval50 {
        PriorForm::Interval50 {
            lower: iv[0],
            upper: iv[1],
        }
    } else if let Some(p) = &args.prior_report {
        inputs.push(p.clone());
        let r = load_prior_report(p)?;
        let (lower, upper) = r.prior_interval50()?;
        report = Some(r);
        PriorForm::Interval50 { lower, upper }
    } else {
        return Err(CliError::Invalid(
            "a prior is required: --prior-mean, --prior-median, --prior-mode, \
             --prior-interval50 or --prior-report"
                .into(),
        ));
    };
    let mut spec = PriorSpec::with_default_max(form, n as u64);
    if let Some(max) = args.hard_max {
        spec.hard_max = max;
    }
    let prior = fit_prior(&spec)?;
    let model = fit_degree_model(&forest, &rds2_weights(&forest))?;
    let cfg = McmcConfig {
        burn_in: args.burn_in,
        samples: args.samples,
        thin: args.thin,
        proposal_scale: args.proposal_scale,
        mc_draws: args.mc_draws,
        seed,
        ..McmcConfig::default()
    };
    let runs = if args.flat_likelihood {
        multi_trial(&FlatLikelihood { n }, &prior, &model, &cfg, args.trials, seed)?
    } else {
        let lik = SuccessiveSamplingLikelihood::new(&forest.degrees(), args.mc_draws)?;
        multi_trial(&lik, &prior, &model, &cfg, args.trials, seed)?
    };
    for t in &runs.trials {
        for w in &t.warnings {
            log::warn!("trial {}: {w}", t.trial_seed);
        }
    }

    let pick = |flag: Option<f64>, f: fn(&PriorReport) -> f64| flag.or(report.as_ref().map(f));
    let mut prevalences = Vec::new();
    if let Some(p) = pick(args.hiv_pos, |r| r.inputs.p_hiv_pos.point) {
        prevalences.push(("hiv_pos".to_string(), p));
    }
    if let Some(p) = pick(args.hiv_unk, |r| r.inputs.p_hiv_unk.point) {
        prevalences.push(("hiv_unk".to_string(), p));
    }
    let table = posterior_table(
        table_row(&prior.summary),
        table_row(&runs.aggregate.average),
        &prevalences,
    )?;
    let grid = density_grid(&prior, &runs.pooled_samples(), args.grid_points);

    let csv = csv_string(|buf| table.write_csv(buf))?;
    let json = to_json(&json!({
        "sample_size": n,
        "prior": prior,
        "degree_model": model,
        "mcmc": cfg,
        "trials": runs.trials,
        "aggregate": runs.aggregate,
        "table": table,
        "flat_likelihood": args.flat_likelihood,
    }))?;
    let table_path = ctx.out_dir.join("pse_table.csv");
    let json_path = ctx.out_dir.join("pse.json");
    let density_path = ctx.out_dir.join("density.csv");
    write_file(&table_path, &csv)?;
    write_file(&json_path, &json)?;
    write_file(&density_path, &csv_string(|buf| write_density_csv(&grid, buf))?)?;
    Ok(Outcome {
        seed,
        inputs,
        outputs: vec![table_path, json_path, density_path],
        csv,
        json,
    })
}

fn simulate(ctx: &Context, args: &SimulateArgs) -> CliResult<Outcome> {
    let path = args
        .scenario
        .as_deref()
        .or(ctx.config)
        .ok_or_else(|| CliError::Invalid("no scenario given: pass a path or --config".into()))?;
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = ctx.seed {
        scenario.seed = seed;
    }
    let pop = scenario.population(0)?;
    let sample = scenario.sample(&pop, 0)?;
    let sample_csv = csv_string(|buf| sample.forest.write_csv(buf))?;
    let recovery = recovery_experiment(&scenario)?;

    let mut csv = String::from("replicate,sample_size,posterior_mean,interval90_lo,interval90_hi,covered\n");
    for r in &recovery.replicates {
        match &r.size {
            Some(s) => csv.push_str(&format!(
                "{},{},{:.2},{:.2},{:.2},{}\n",
                r.replicate, r.sample_size, s.posterior_mean, s.interval90.0, s.interval90.1, s.covered
            )),
            None => csv.push_str(&format!("{},{},,,,\n", r.replicate, r.sample_size)),
        }
    }
    let json = to_json(&recovery)?;
    let sample_path = ctx.out_dir.join("sample.csv");
    let json_path = ctx.out_dir.join("recovery.json");
    write_file(&sample_path, &sample_csv)?;
    write_file(&json_path, &json)?;
    Ok(Outcome {
        seed: scenario.seed,
        inputs: vec![path.to_path_buf()],
        outputs: vec![sample_path, json_path],
        csv,
        json,
    })
}

#[derive(Debug, Serialize)]
struct Check {
    path: PathBuf,
    expected: String,
    actual: Option<String>,
    ok: bool,
}

fn check(path: PathBuf, expected: &str, actual: Option<String>) -> Check {
    let ok = actual.as_deref() == Some(expected);
    Check {
        path,
        expected: expected.to_string(),
        actual,
        ok,
    }
}

fn report(ctx: &Context, args: &ReportArgs) -> CliResult<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest.cwd.join(p)
        }
    };
    let on_disk: Vec<Check> = manifest
        .outputs
        .iter()
        .map(|o| check(o.path.clone(), &o.sha256, sha256_file(&resolve(&o.path)).ok()))
        .collect();

    let rerun = if args.rerun {
        Some(rerun_manifest(&manifest)?)
    } else {
        None
    };

    if !ctx.quiet {
        match ctx.format {
            Format::Json => print!(
                "{}",
                to_json(&json!({
                    "manifest": manifest,
                    "outputs": on_disk,
                    "rerun": rerun,
                }))?
            ),
            Format::Csv => {
                println!("check,path,expected_sha256,actual_sha256,ok");
                let rows = on_disk
                    .iter()
                    .map(|c| ("recorded", c))
                    .chain(rerun.iter().flatten().map(|c| ("rerun", c)));
                for (kind, c) in rows {
                    println!(
                        "{kind},{},{},{},{}",
                        c.path.display(),
                        c.expected,
                        c.actual.as_deref().unwrap_or(""),
                        c.ok
                    );
                }
            }
        }
    }
    if let Some(bad) = rerun.iter().flatten().find(|c| !c.ok) {
        return Err(CliError::Mismatch(format!(
            "re-run of `{}` produced different {}",
            manifest.subcommand,
            bad.path.display()
        )));
    }
    if let Some(bad) = on_disk.iter().find(|c| !c.ok) {
        log::warn!("{} changed since the run", bad.path.display());
    }
    Ok(())
}

/// Drop `flags` (with their values, in either `--flag v` or `--flag=v` form).
fn without_flags(argv: &[String], flags: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if arg == "--" {
            out.push(arg.clone());
            out.extend(iter.cloned());
            break;
        }
        if flags.contains(&arg.as_str()) {
            iter.next();
        } else if !flags.iter().any(|f| arg.starts_with(&format!("{f}="))) {
            out.push(arg.clone());
        }
    }
    out
}

/// Re-run the recorded command into a scratch directory with the recorded seed.
fn rerun_manifest(manifest: &RunManifest) -> CliResult<Vec<Check>> {
    use clap::Parser;

    let scratch = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
    let mut argv = vec!["hpe".to_string()];
    argv.extend(without_flags(&manifest.argv, &["--out-dir", "--seed"]));
    argv.extend([
        "--out-dir".to_string(),
        scratch.path().display().to_string(),
        "--seed".to_string(),
        manifest.seed.to_string(),
    ]);
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::Invalid(format!("recorded command no longer parses: {e}")))?;
    let here = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
    std::env::set_current_dir(&manifest.cwd).map_err(|e| CliError::io(&manifest.cwd, e))?;
    let result = run_inner(&cli, &manifest.argv, true);
    std::env::set_current_dir(&here).map_err(|e| CliError::io(&here, e))?;
    result?;

    manifest
        .outputs
        .iter()
        .map(|o| {
            let name = o
                .path
                .file_name()
                .ok_or_else(|| CliError::Invalid(format!("bad output path {}", o.path.display())))?;
            let fresh = scratch.path().join(name);
            Ok(check(o.path.clone(), &o.sha256, sha256_file(&fresh).ok()))
        })
        .collect()
}
