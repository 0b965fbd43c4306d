use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected a scalar expression, got shape {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("non-finite value produced by `{op}` at tape node {node}")]
    NonFinite { node: usize, op: &'static str },

    #[error("variable (node {node}) is not a parameter registered on this tape")]
    UnknownParameter { node: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rollout diverged at t = {t} (scenario {scenario}): {source}")]
    Diverged {
        t: usize,
        scenario: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite gradient at outer iteration {iteration}, epoch {epoch}")]
    NonFiniteGradient { iteration: usize, epoch: usize },

    #[error("admm iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective requires ADMM state (copies, multipliers, penalty)")]
    MissingAdmmState,

    #[error("comparison needs at least one baseline report")]
    EmptyBaseline,

    #[error("missing reports: {0}")]
    MissingReports(String),

    #[error("self-check failed: {0}")]
    SelfTest(String),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { context, expected, got }
    }
}
