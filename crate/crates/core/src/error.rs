use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate interval: t1 - t0 = {0}")]
    DegenerateInterval(f64),
    #[error("simulation horizon {0} exceeded before the stopping time")]
    HorizonExceeded(f64),
    #[error("insufficient samples for {what}: have {have}, need {need}")]
    InsufficientSamples {
        what: &'static str,
        have: usize,
        need: usize,
    },
    #[error("resource limit: {0}")]
    ResourceLimit(String),
    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
