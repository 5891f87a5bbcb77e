use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate component id `{0}`")]
    DuplicateComponent(String),

    #[error("duplicate action id `{0}`")]
    DuplicateAction(String),

    #[error("timestep mismatch: expected {expected}, got {actual}")]
    TimestepMismatch { expected: u64, actual: u64 },

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("expert action `{0}` is not among its candidates")]
    ExpertNotInCandidates(String),

    #[error("invalid ranking case: {0}")]
    InvalidRanking(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        last_good: Box<crate::policy::PolicyParams>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
