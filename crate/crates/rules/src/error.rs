use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = RuleError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("entries not strictly ascending by date: {previous} followed by {next}")]
    UnsortedInput { previous: NaiveDate, next: NaiveDate },

    #[error("no reference row covers {0}")]
    ReferenceMiss(String),

    #[error("invalid input: {0}")]
    Domain(String),

    #[error("invalid window: start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },

    #[error("invalid reference table: {0}")]
    InvalidTable(String),
}
