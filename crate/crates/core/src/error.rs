//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by samplers, schedules, laws, metrics, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step index {index} past end of explicit schedule (length {len})")]
    ScheduleIndex { index: usize, len: usize },

    #[error("time {t} beyond the explicit schedule horizon {horizon}")]
    ScheduleHorizon { t: f64, horizon: f64 },

    #[error("schedule increases at step {index}; a non-increasing sequence is required here")]
    IncreasingSchedule { index: usize },

    #[error("unstable step at index {index}: eta * a = {value} >= 2")]
    UnstableStep { index: usize, value: f64 },

    #[error("potential has no finite-sum structure; batch gradients are unsupported")]
    UnsupportedBatch,

    #[error("{}", divergence_msg(*chain, *step))]
    Divergence { chain: Option<usize>, step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn divergence_msg(chain: Option<usize>, step: usize) -> String {
    match chain {
        Some(c) => format!("chain {c} diverged at step {step}: non-finite state"),
        None => format!("chain diverged at step {step}: non-finite state"),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
