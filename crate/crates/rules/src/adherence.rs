//! Medication adherence over a date window.
//!
//! A dose event covers one calendar day of one prescription; a `taken` event
//! counts as all of that day's scheduled doses.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Result, RuleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoseSchedule {
    pub start: NaiveDate,
    /// Last day of the prescription, inclusive. Open-ended when `None`.
    pub end: Option<NaiveDate>,
    pub doses_per_day: u32,
}

impl DoseSchedule {
    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        date >= self.start && self.end.is_none_or(|end| date <= end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoseRecord {
    pub date: NaiveDate,
    pub taken: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdherenceWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub expected_doses: u32,
    pub taken_doses: u32,
    pub rate: f64,
}

impl AdherenceWindow {
    fn new(start: NaiveDate, end: NaiveDate, expected_doses: u32, taken_doses: u32) -> Self {
        let taken_doses = taken_doses.min(expected_doses);
        let rate = if expected_doses == 0 { 1.0 } else { taken_doses as f64 / expected_doses as f64 };
        AdherenceWindow { start, end, expected_doses, taken_doses, rate }
    }

    /// Sums several prescriptions over the same window.
    pub fn combine(windows: &[AdherenceWindow], start: NaiveDate, end: NaiveDate) -> AdherenceWindow {
        let expected = windows.iter().map(|w| w.expected_doses).sum();
        let taken = windows.iter().map(|w| w.taken_doses).sum();
        AdherenceWindow::new(start, end, expected, taken)
    }
}

/// Expected and taken doses of one prescription within `[start, end]`.
///
/// Events outside the window or outside the prescription's validity are
/// ignored. For repeated events on one date the last one wins.
pub fn adherence_rate(
    schedule: &DoseSchedule,
    events: &[DoseRecord],
    start: NaiveDate,
    end: NaiveDate,
) -> Result<AdherenceWindow> {
    if start > end {
        return Err(RuleError::InvalidWindow { start, end });
    }
    let from = start.max(schedule.start);
    let to = schedule.end.map_or(end, |e| e.min(end));
    if from > to {
        return Ok(AdherenceWindow::new(start, end, 0, 0));
    }
    let active_days = (to - from).num_days() as u32 + 1;
    let expected = active_days * schedule.doses_per_day;

    let mut taken_days = BTreeSet::new();
    for event in events.iter().filter(|e| e.date >= from && e.date <= to) {
        if event.taken {
            taken_days.insert(event.date);
        } else {
            taken_days.remove(&event.date);
        }
    }
    let taken = taken_days.len() as u32 * schedule.doses_per_day;
    Ok(AdherenceWindow::new(start, end, expected, taken))
}
