use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown trait `{0}`")]
    UnknownTrait(String),

    #[error("trait `{trait_name}` has unknown label `{label}` (line {line})")]
    UnknownLabel {
        trait_name: String,
        label: String,
        line: usize,
    },

    #[error("duplicate respondent id `{0}`")]
    DuplicateId(String),

    #[error("respondent `{id}` names recruiter `{recruiter}` which is not in the dataset")]
    DanglingRecruiter { id: String, recruiter: String },

    #[error("cycle detected in recruitment links involving `{0}`")]
    Cycle(String),

    #[error("unknown respondent id `{0}`")]
    UnknownId(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("MCMC chain failed: {0}")]
    Chain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Estimation(_) | Error::NonConvergence(_) | Error::Chain(_)
        )
    }
}
