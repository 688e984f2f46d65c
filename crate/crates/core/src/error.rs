use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("undefined virtual value at v = {0}")]
    UndefinedVirtualValue(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("greedy undefined for non-matroid environments")]
    GreedyUndefined,

    #[error("invalid auction: {0}")]
    InvalidAuction(String),

    #[error("bidder(s) {0:?} fail the monotone hazard rate condition")]
    NotMhr(Vec<usize>),

    /// An enumeration or sampling guard was exceeded.
    #[error("guard exceeded: {0}")]
    Guard(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{}: row {row}: {message}", file.display())]
    Data {
        file: PathBuf,
        row: usize,
        message: String,
    },

    #[error("no samples")]
    NoSamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed user input (configs, parameters, data files).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidDistribution(_)
                | Error::InvalidParameter(_)
                | Error::InvalidEnvironment(_)
                | Error::InvalidAuction(_)
                | Error::NotMhr(_)
                | Error::Config { .. }
                | Error::Data { .. }
                | Error::NoSamples
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
