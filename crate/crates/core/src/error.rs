use chrono::NaiveDate;
use nephro_rules::RuleError;
use thiserror::Error;

use crate::{DoctorId, PatientId, RecordId};

pub type Result<T, E = DiaryError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DiaryError {
    #[error("unknown patient {0}")]
    UnknownPatient(PatientId),

    #[error("unknown doctor {0}")]
    UnknownDoctor(DoctorId),

    #[error("unknown record {0}")]
    UnknownRecord(RecordId),

    #[error("doctor is not linked to this patient")]
    NotLinked,

    #[error("not permitted: {0}")]
    Forbidden(&'static str),

    #[error("date {date} is in the future (today is {today})")]
    FutureDate { date: NaiveDate, today: NaiveDate },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("image of {size} bytes exceeds the {cap} byte limit")]
    ImageTooLarge { size: usize, cap: usize },

    #[error(transparent)]
    Rule(#[from] RuleError),

    #[error("storage failure: {0}")]
    Storage(String),
}

impl DiaryError {
    pub(crate) fn storage(e: impl std::fmt::Display) -> Self {
        DiaryError::Storage(e.to_string())
    }
}
