use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Estimate the size of hidden populations from respondent-driven samples.
#[derive(Debug, Parser)]
#[command(name = "hpe", version, propagate_version = true)]
pub struct Cli {
    /// Master seed for every stochastic step [default: 0, or the scenario's seed for `simulate`]
    #[arg(long, global = true, env = "HPE_SEED")]
    pub seed: Option<u64>,

    /// Configuration file for the subcommand: trait schema (ingest, estimate,
    /// pse), county inputs (prior) or scenario (simulate)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Directory receiving all outputs and the run manifest
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Format of the table echoed to standard output (both are always written to disk)
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Worker threads; results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset and write its normalized form with a structural summary
    Ingest(IngestArgs),
    /// Weighted trait proportions with bootstrap intervals
    Estimate(EstimateArgs),
    /// Census-bridged prior population size for a county
    Prior(PriorArgs),
    /// Posterior population size by successive-sampling population size estimation
    Pse(PseArgs),
    /// Synthetic sample and recovery experiment from a scenario file
    Simulate(SimulateArgs),
    /// Summarize a run manifest, verify its outputs and optionally re-run it
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Imputation {
    Median,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// RDS dataset: id,recruiter_id,degree,order,<traits...>
    pub dataset: PathBuf,

    /// Trait schema (TOML); inferred from the data when absent
    #[arg(long, value_name = "PATH")]
    pub schema: Option<PathBuf>,

    /// Fill missing degrees instead of rejecting the row
    #[arg(long, value_enum)]
    pub impute_degree: Option<Imputation>,

    /// Coupons per respondent; excess recruits produce warnings
    #[arg(long, default_value_t = 3)]
    pub max_coupons: usize,

    /// Analyse only respondents with TRAIT=VALUE (cross-boundary links become seeds)
    #[arg(long, value_name = "TRAIT=VALUE")]
    pub subset: Option<String>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Weights {
    Rds2,
    Giless,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,

    /// Trait to estimate (repeatable)
    #[arg(long = "trait", value_name = "NAME", required = true)]
    pub traits: Vec<String>,

    /// Inclusion weights
    #[arg(long, value_enum, default_value_t = Weights::Rds2)]
    pub weights: Weights,

    /// Population size assumed by the successive-sampling weights
    /// [default: the prior point from --prior-report, else 10 x n]
    #[arg(long = "population-size", visible_alias = "N", value_name = "N")]
    pub population_size: Option<u64>,

    /// Prior report (JSON from `hpe prior`) supplying the assumed population size
    #[arg(long, value_name = "PATH")]
    pub prior_report: Option<PathBuf>,

    /// Bootstrap replicates (at least 200)
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,

    /// Simulated samples per successive-sampling weight iteration (at least 1000)
    #[arg(long, default_value_t = 1000)]
    pub sim_draws: usize,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Bundled county (`cook`, `sf`) or a county input file (TOML or JSON)
    #[arg(long, value_name = "COUNTY|PATH")]
    pub county: Option<String>,
}

#[derive(Debug, Args)]
pub struct PseArgs {
    #[command(flatten)]
    pub data: DatasetArgs,

    /// Prior mean of the population size
    #[arg(long, value_name = "N", group = "prior")]
    pub prior_mean: Option<f64>,

    /// Prior median of the population size
    #[arg(long, value_name = "N", group = "prior")]
    pub prior_median: Option<f64>,

    /// Prior mode of the population size
    #[arg(long, value_name = "N", group = "prior")]
    pub prior_mode: Option<f64>,

    /// Central 50% prior interval
    #[arg(long, num_args = 2, value_names = ["LOWER", "UPPER"], group = "prior")]
    pub prior_interval50: Option<Vec<f64>>,

    /// Prior report (JSON from `hpe prior`): its 95% interval becomes the 50% prior
    /// interval and its prevalences the default subpopulation rates
    #[arg(long, value_name = "PATH", group = "prior")]
    pub prior_report: Option<PathBuf>,

    /// Upper bound of the prior support [default: 10 x the prior point]
    #[arg(long, value_name = "N")]
    pub hard_max: Option<u64>,

    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,

    /// Retained samples per chain (at least 1000)
    #[arg(long, default_value_t = 5000)]
    pub samples: usize,

    #[arg(long, default_value_t = 1)]
    pub thin: usize,

    /// Standard deviation of the random-walk step on log N
    #[arg(long, default_value_t = 0.15)]
    pub proposal_scale: f64,

    /// Monte Carlo draws per likelihood evaluation (at least 100)
    #[arg(long, default_value_t = 100)]
    pub mc_draws: usize,

    /// Independent chains, seeded seed+1 ..= seed+trials
    #[arg(long, default_value_t = 10)]
    pub trials: usize,

    /// HIV-positive prevalence (percent) for the subpopulation rows
    #[arg(long, value_name = "PCT")]
    pub hiv_pos: Option<f64>,

    /// HIV-status-unknown prevalence (percent) for the subpopulation rows
    #[arg(long, value_name = "PCT")]
    pub hiv_unk: Option<f64>,

    /// Points in the density grid
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,

    /// Replace the likelihood by a constant (diagnostic)
    #[arg(long, hide = true)]
    pub flat_likelihood: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (TOML or JSON); falls back to --config
    pub scenario: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Manifest written by an earlier run
    pub manifest: PathBuf,

    /// Re-run the recorded command into a scratch directory and compare outputs byte for byte
    #[arg(long)]
    pub rerun: bool,
}
