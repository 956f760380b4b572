//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the localization engine and its supporting tools.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),

    #[error("malformed MAC address {input:?}: {reason}")]
    MacParse { input: String, reason: String },

    #[error("registry validation failed: {0}")]
    RegistryInvalid(String),

    #[error("scan validation failed: {0}")]
    ScanInvalid(String),

    #[error("no visible access points in profile")]
    NoVisibleAps,

    #[error("MAC {0} is not in the access-point registry")]
    UnregisteredMac(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training aborted: loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("rank {rank} has only {count} samples (need at least {min})")]
    TooFewRankSamples {
        rank: &'static str,
        count: usize,
        min: usize,
    },

    #[error("rank model invalid: {0}")]
    RankModelInvalid(String),

    #[error("quality regression failed: {0}")]
    QualityFit(String),

    #[error("fix window invalid: {0}")]
    FixWindowInvalid(String),

    #[error("simulation config invalid: {0}")]
    SimConfigInvalid(String),

    #[error("training-data synthesis failed: {0}")]
    SynthFailed(String),

    #[error("file schema error: {0}")]
    Schema(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
