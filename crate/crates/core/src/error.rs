use thiserror::Error;

/// Errors raised by the library.
///
/// Verification failures are not errors: they are reported as outcomes in
/// the respective report types.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{what} exceeded its budget of {limit}")]
    Budget { what: String, limit: u64 },

    #[error("generator images do not generate: {unreached} of {order} elements unreached")]
    NotGenerating { unreached: usize, order: usize },

    #[error("arithmetic overflow while {0}")]
    Overflow(String),

    #[error("injectivity radius of the {side} quotient at level {level} is {achieved}, need {needed}")]
    InsufficientRadius {
        side: Side,
        level: usize,
        needed: u32,
        achieved: u32,
    },

    #[error("lifted image of {point} escapes the target ball of radius {radius}")]
    ImageEscapes { point: String, radius: u32 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which side of a coarse map an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Source => f.write_str("source"),
            Side::Target => f.write_str("target"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
