//! Successive-sampling population size estimation (SS-PSE).

mod degree;
mod likelihood;
mod mcmc;
mod prior;
mod report;
mod summary;

pub use degree::{fit_degree_model, DegreeFamily, DegreeModel, DegreeSampler};
pub use likelihood::{
    ln_falling_factorial, sequence_log_likelihood, FlatLikelihood, LikelihoodEstimate,
    OrderedDegrees, PopulationLikelihood, SuccessiveSamplingLikelihood, MIN_MC_DRAWS,
};
pub use mcmc::{
    aggregate_trials, multi_trial, multi_trial_with_seeds, run_mcmc, run_mcmc_with, McmcConfig,
    MultiTrial, PosteriorSummary, TrialAggregate,
};
pub use prior::{
    fit_prior, FittedPrior, PriorForm, PriorSpec, DEFAULT_HARD_MAX_FACTOR, DEFAULT_PRIOR_CV,
};
pub use report::{
    density_grid, posterior_table, relative_change, table_row, write_density_csv, LabelledRow,
    PosteriorTable, TableRow, TABLE_COLUMNS,
};
pub use summary::{Summary, QUANTILE_LEVELS};
