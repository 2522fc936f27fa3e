use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no offset supplied for instrument `{0}`")]
    MissingOffset(String),

    #[error("covariance matrix is not positive definite after nugget escalation")]
    DegenerateCovariance,

    #[error("task generation exhausted after {attempts} rejected draws (seed {seed})")]
    GenerationExhausted { seed: u64, attempts: u32 },

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("invalid truth: {0}")]
    InvalidTruth(String),

    #[error("submission rejected: {0}")]
    RejectedSubmission(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no multi-start converged")]
    FitFailure,

    #[error("aggregation failed: {0}")]
    Aggregation(String),

    #[error("episode `{0}` already exists")]
    EpisodeConflict(String),

    #[error("unknown episode `{0}`")]
    EpisodeNotFound(String),

    #[error("unknown task `{0}`")]
    TaskNotFound(String),

    #[error("episode is no longer running ({0})")]
    TerminalState(String),

    #[error("submission attempt cap of {0} reached")]
    AttemptCap(usize),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid usage report: {0}")]
    InvalidUsage(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::MissingOffset(_) => "missing_offset",
            Error::DegenerateCovariance => "degenerate_covariance",
            Error::GenerationExhausted { .. } => "generation_exhausted",
            Error::Ingestion(_) => "ingestion",
            Error::InvalidTruth(_) => "invalid_truth",
            Error::RejectedSubmission(_) => "rejected_submission",
            Error::InsufficientData(_) => "insufficient_data",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::FitFailure => "fit_failure",
            Error::Aggregation(_) => "aggregation",
            Error::EpisodeConflict(_) => "conflict",
            Error::EpisodeNotFound(_) => "not_found",
            Error::TaskNotFound(_) => "task_not_found",
            Error::TerminalState(_) => "terminal_state",
            Error::AttemptCap(_) => "attempt_cap",
            Error::BudgetExceeded(_) => "budget_exceeded",
            Error::InvalidUsage(_) => "invalid_usage",
            Error::Protocol(_) => "protocol",
            Error::Json(_) => "malformed_json",
            Error::Io(_) => "io",
        }
    }
}
