use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least 3 correspondences, got {got}")]
    TooFewCorrespondences { got: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("dense graph layout is capped at {max} nodes, got {got}; downsample the input first")]
    TooManyNodes { got: usize, max: usize },

    #[error("brute-force clique enumeration is capped at {max} nodes, got {got}")]
    BruteForceTooLarge { got: usize, max: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("invalid rotation matrix: {reason}")]
    InvalidRotation { reason: String },

    #[error("degenerate point configuration: {reason}")]
    DegenerateConfiguration { reason: String },

    #[error("no usable hypothesis: {reason}")]
    NoHypothesis { reason: String },

    #[error("node index {index} out of range for a graph of {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("empty input: {what}")]
    EmptyInput { what: &'static str },

    #[error("length mismatch: {what} has {got} items, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

impl Error {
    pub fn invalid_param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
