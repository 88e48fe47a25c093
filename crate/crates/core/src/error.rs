use thiserror::Error;

use crate::sim::Time;

/// Errors raised while building or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("event scheduled at t={event} before the current clock t={clock}")]
    BackInTime { event: Time, clock: Time },

    #[error("deadlock at t={clock}: event queue exhausted with {completed}/{created} tasks completed")]
    Deadlock {
        clock: Time,
        created: usize,
        completed: usize,
    },

    #[error("model violation: {0}")]
    Model(String),

    #[error("processor {id} out of range (p = {p})")]
    ProcessorOutOfRange { id: usize, p: usize },

    #[error("no victim available: platform has a single processor")]
    NoVictim,

    #[error("malformed application file: {0}")]
    Application(String),

    #[error("cyclic task dependencies involving task {0}")]
    Cycle(u64),

    #[error("trace time regression on processor {processor}: {time} < {last}")]
    TraceRegression {
        processor: usize,
        time: Time,
        last: Time,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
