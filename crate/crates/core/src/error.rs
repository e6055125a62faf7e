use thiserror::Error;

/// Errors raised by the simulators and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("agent {agent} has no neighbors and no source link")]
    IsolatedAgent { agent: usize },
    #[error("flock start needs at least {required} neighbors per agent, found {found}")]
    InsufficientNeighbors { required: usize, found: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("transfer speed is unbounded: all delays are equal")]
    InfiniteSpeed,
}
