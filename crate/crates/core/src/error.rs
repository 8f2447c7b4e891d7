use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueueError {
    #[error("event time {time} is before the current clock {clock}")]
    PastTime { time: f64, clock: f64 },
    #[error("event queue is empty")]
    EmptyQueue,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("operation {index} of node {node} has no matching peer operation")]
    UnmatchedOp { node: usize, index: usize },
    #[error("frequency {0} GHz is not in the profile")]
    UnknownFrequency(f64),
    #[error("wait of {t_wait} s is shorter than the sleep/wake transitions ({min} s)")]
    WaitTooShort { t_wait: f64, min: f64 },
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        ScenarioError::Parse { line, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        ScenarioError::Validation(msg.into())
    }
}
