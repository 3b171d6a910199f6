use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum AcsError {
    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine (factorization, normalization) failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Population generation could not place a network of the given size.
    #[error("population generation failed: cannot place network of size {size} ({reason})")]
    Generation { size: usize, reason: String },

    /// No available sampling weight remained before the requested draws were completed.
    #[error("sampling exhausted after {completed} of {requested} draws")]
    SamplingExhausted { completed: usize, requested: usize },

    /// Every stage-1 attempt produced only empty networks.
    #[error("stage-1 retry budget of {retries} exhausted: every sample held only empty networks")]
    StageOneExhausted { retries: usize },

    /// Resampling to hit a requested number of nonempty networks gave up.
    #[error("could not draw a sample with {target} nonempty networks in {retries} attempts")]
    ConditioningExhausted { target: usize, retries: usize },

    /// The MCMC chain reached a state it cannot continue from.
    #[error("chain error: {0}")]
    Chain(String),

    /// An estimator was applied to a sample drawn under a design it does not support.
    #[error("design mismatch: {0}")]
    DesignMismatch(String),

    /// A diagnostic is undefined for the given input.
    #[error("undefined diagnostic: {0}")]
    UndefinedDiagnostic(String),

    /// Malformed input file.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// No replication of an experiment completed.
    #[error("all {failed} replications failed")]
    ReplicationsExhausted { failed: usize },

    /// Invalid experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = AcsError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(AcsError::Domain(msg.into()))
}
