use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("trajectory does not chain at step {step}: next_state != following state")]
    BrokenChain { step: usize },

    #[error("trajectory has {actual} transitions, horizon is {horizon}")]
    IncompleteTrajectory { actual: usize, horizon: usize },

    #[error("illegal initial state: {0}")]
    IllegalState(String),

    #[error("episode finished: step {step} >= horizon {horizon}")]
    EpisodeOver { step: usize, horizon: usize },

    #[error("environment has not been reset")]
    NotReset,

    #[error("empty replay buffer")]
    EmptyBuffer,

    #[error("matching infeasible: {candidates} candidates for {targets} targets; warm up with target-task rollouts first")]
    Infeasible { targets: usize, candidates: usize },

    #[error("particle sets differ in size: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("degenerate polyline: {0}")]
    DegeneratePolyline(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite loss during training: {0}")]
    Diverged(String),

    #[error("unknown environment {0:?}; expected desk-reach, desk-push or desk-push-wall")]
    UnknownEnv(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
