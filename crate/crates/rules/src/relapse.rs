//! Relapse detection over a patient's dipstick diary.
//!
//! A relapse is three consecutive diary entries graded 3+ or heavier. Entries
//! are consecutive by diary order, not by calendar adjacency: a gap of any
//! length between two heavy entries does not break a run. Only the trailing
//! run matters for the current state, so one non-heavy entry closes an
//! episode and a later run of three opens a new one.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Result, RuleError, UrineProteinGrade};

/// Number of consecutive heavy entries that constitutes a relapse.
pub const RELAPSE_RUN: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelapseStatus {
    NoRelapse,
    Suspected,
    Relapse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelapseState {
    pub status: RelapseStatus,
    /// Date of the first entry of the qualifying run; set only for `Relapse`.
    pub onset_date: Option<NaiveDate>,
    /// Length of the trailing run of heavy entries.
    pub suspect_count: u32,
}

impl RelapseState {
    pub const NONE: RelapseState = RelapseState {
        status: RelapseStatus::NoRelapse,
        onset_date: None,
        suspect_count: 0,
    };

    fn from_run(run_len: u32, run_start: Option<NaiveDate>) -> Self {
        let status = match run_len {
            0 => RelapseStatus::NoRelapse,
            n if n < RELAPSE_RUN => RelapseStatus::Suspected,
            _ => RelapseStatus::Relapse,
        };
        RelapseState {
            status,
            onset_date: if status == RelapseStatus::Relapse { run_start } else { None },
            suspect_count: run_len,
        }
    }

    pub fn is_relapse(&self) -> bool {
        self.status == RelapseStatus::Relapse
    }
}

impl Default for RelapseState {
    fn default() -> Self {
        RelapseState::NONE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryFlag {
    pub heavy: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelapseScan {
    pub flags: Vec<EntryFlag>,
    pub state: RelapseState,
}

/// Incremental form of [`relapse_scan`]; feeding entries one at a time gives
/// the same state as scanning the whole list.
#[derive(Debug, Clone, Default)]
pub struct RelapseScanner {
    last_date: Option<NaiveDate>,
    run_len: u32,
    run_start: Option<NaiveDate>,
}

impl RelapseScanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, date: NaiveDate, grade: UrineProteinGrade) -> Result<EntryFlag> {
        if let Some(previous) = self.last_date {
            if date <= previous {
                return Err(RuleError::UnsortedInput { previous, next: date });
            }
        }
        self.last_date = Some(date);
        let heavy = grade.is_heavy();
        if heavy {
            if self.run_len == 0 {
                self.run_start = Some(date);
            }
            self.run_len += 1;
        } else {
            self.run_len = 0;
            self.run_start = None;
        }
        Ok(EntryFlag { heavy })
    }

    pub fn state(&self) -> RelapseState {
        RelapseState::from_run(self.run_len, self.run_start)
    }
}

/// Flags every entry and derives the relapse state of the sequence.
///
/// Entries must be strictly ascending by date; callers collapse same-day
/// duplicates (keeping the latest) before scanning.
pub fn relapse_scan(entries: &[(NaiveDate, UrineProteinGrade)]) -> Result<RelapseScan> {
    let mut scanner = RelapseScanner::new();
    let flags = entries
        .iter()
        .map(|&(date, grade)| scanner.push(date, grade))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelapseScan { flags, state: scanner.state() })
}
