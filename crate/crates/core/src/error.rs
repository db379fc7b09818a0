use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("round {got} recorded after round {last}")]
    OutOfOrderRound { last: u32, got: u32 },

    #[error("node {node} attributed to more than one influencer in round {round}")]
    OverlappingAttribution { round: u32, node: u64 },

    #[error("arm {0} is not part of the current selection")]
    UnknownArm(usize),

    #[error("unknown context id {0}")]
    UnknownContext(u32),

    #[error("operation requires a synthetic environment")]
    NotSynthetic,

    #[error("confidence width needs at least one recorded play")]
    EmptyHistory,

    #[error("no samples to fit")]
    EmptySamples,

    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
