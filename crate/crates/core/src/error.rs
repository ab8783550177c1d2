use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A specification or configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data could not be parsed. `row` is 1-based and counts the header.
    #[error("ingestion error at row {row}, column `{column}`: {message}")]
    Ingest {
        row: usize,
        column: String,
        message: String,
    },

    #[error("ingestion error: {0}")]
    Io(String),

    #[error("the environment does not expose P(y=1|x,s)")]
    ConditionalUnavailable,

    #[error("record {index} has propensity {propensity}; the collecting policy must be exploring")]
    ZeroPropensity { index: usize, propensity: f64 },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("group s={0} is absent from the sample")]
    GroupAbsent(u8),

    #[error("numerical failure at iteration {iteration}: {message}")]
    NonFinite { iteration: usize, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
