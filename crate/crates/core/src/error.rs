//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by traffic summarization, allocation, simulation, and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("all stations report zero idle time; idle-time probabilities are undefined")]
    DegenerateTraffic,
    #[error("station {station} has zero packet count")]
    ZeroPacketCount { station: usize },
    #[error("station {station} has zero probability")]
    ZeroProbability { station: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{budget} channels cannot give each of {cells} cells at least one")]
    InfeasibleMinimum { budget: u32, cells: usize },
    #[error("series needs {required} channels but the budget is {budget}")]
    SeriesExceedsBudget { required: u64, budget: u32 },
    #[error("budget {budget} is not a multiple of the coefficient gcd {gcd}")]
    NoFeasibleL { budget: u32, gcd: u64 },
    #[error("no series with start >= 1 and step >= 0 exists for this budget")]
    NoAdmissibleSeries,
    #[error("no integer ratio >= 2 fits within the channel bounds")]
    CaseInapplicable,
    #[error("unknown strategy token `{0}`")]
    UnknownStrategy(String),
    #[error("strategy `{0}` requires channel bounds")]
    MissingBounds(&'static str),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature out of range: {0}")]
    EncodingError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable name, printed by the CLI on standard error.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyTrace => "EmptyTrace",
            Error::DegenerateTraffic => "DegenerateTraffic",
            Error::ZeroPacketCount { .. } => "ZeroPacketCount",
            Error::ZeroProbability { .. } => "ZeroProbability",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InfeasibleMinimum { .. } => "InfeasibleMinimum",
            Error::SeriesExceedsBudget { .. } => "SeriesExceedsBudget",
            Error::NoFeasibleL { .. } => "NoFeasibleL",
            Error::NoAdmissibleSeries => "NoAdmissibleSeries",
            Error::CaseInapplicable => "CaseInapplicable",
            Error::UnknownStrategy(_) => "UnknownStrategy",
            Error::MissingBounds(_) => "MissingBounds",
            Error::EmptyDataset => "EmptyDataset",
            Error::EncodingError(_) => "EncodingError",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
