use thiserror::Error;

/// Errors produced by the model, solvers and experiment plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel `{name}`: {reason}")]
    InvalidKernel { name: String, reason: String },

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("observation {obs} is impossible under the current belief after action {action}")]
    ImpossibleObservation { action: u8, obs: u8 },

    #[error("stationary law undefined for kernel with p01 = {p01}, p11 = {p11}")]
    DegenerateKernel { p01: f64, p11: f64 },

    #[error("horizon {horizon} exceeds the exact-solver cap of {cap}")]
    HorizonCap { horizon: u32, cap: u32 },

    #[error("{0} is a leaf node")]
    LeafNode(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
