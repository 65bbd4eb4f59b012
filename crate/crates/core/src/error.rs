use std::path::PathBuf;

/// Errors raised by the library and the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// One of the four correlator sample sets is empty, so 1/a or 1/b is undefined.
    #[error("degenerate correlator window at t = {start_s:.6} s (a0={a0}, b0={b0}, a1={a1}, b1={b1})")]
    DegenerateWindow {
        start_s: f64,
        a0: usize,
        b0: usize,
        a1: usize,
        b1: usize,
    },

    #[error("index {index} out of range (valid: {valid_from}..{valid_to})")]
    OutOfRange {
        index: usize,
        valid_from: usize,
        valid_to: usize,
    },

    #[error("insufficient H0 windows: {got} (need at least {need})")]
    InsufficientWindows { got: usize, need: usize },

    #[error("cannot read scenario {path}: {source}")]
    ScenarioRead {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot parse scenario: {0}")]
    ScenarioParse(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
