use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("noise scale must be positive for likelihood evaluation, got {0}")]
    NonPositiveSigma(f64),

    #[error("observed reward is not finite: {0}")]
    NonFiniteReward(f64),

    #[error("posterior has no finite log-weight")]
    DegeneratePosterior,

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no excluded parameters: the pseudo-truth set is the whole space")]
    NoExcludedParameters,

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("cannot write output to {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the user's configuration rather than a failure at run time.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidConfig(_)
                | Error::NonPositiveSigma(_)
                | Error::Json(_)
                | Error::Input { .. }
                | Error::TooLarge(_)
        )
    }
}
