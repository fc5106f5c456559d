//! Merged, date-ordered view of everything recorded for a patient.

use chrono::{DateTime, NaiveDate, Utc};
use nephro_rules::{classify_urine_protein, SeverityColor};
use serde::{Deserialize, Serialize};

use crate::assess::{assess_all, ClinicalReference, MeasurementAssessment};
use crate::model::{AdviceMessage, ClinicalMeasurement, DiaryEntry, DoseEvent, PatientRecord, Role, TestOrder};
use crate::notify::NotificationEvent;
use crate::{DiaryError, Result};

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(DiaryError::Validation(format!("range start {start} is after end {end}")));
        }
        Ok(DateRange { start, end })
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TimelineItem {
    Entry {
        #[serde(flatten)]
        entry: DiaryEntry,
        color: SeverityColor,
    },
    Measurement {
        #[serde(flatten)]
        measurement: ClinicalMeasurement,
        assessment: MeasurementAssessment,
    },
    Dose {
        #[serde(flatten)]
        dose: DoseEvent,
        medicine_name: String,
    },
    Advice(AdviceMessage),
    Test(TestOrder),
    Notification(NotificationEvent),
}

impl TimelineItem {
    pub fn date(&self) -> NaiveDate {
        match self {
            TimelineItem::Entry { entry, .. } => entry.date,
            TimelineItem::Measurement { measurement, .. } => measurement.date,
            TimelineItem::Dose { dose, .. } => dose.date,
            TimelineItem::Advice(a) => a.timestamp.date_naive(),
            TimelineItem::Test(t) => t.timestamp.date_naive(),
            TimelineItem::Notification(n) => n.created_at.date_naive(),
        }
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        match self {
            TimelineItem::Entry { entry, .. } => entry.created_at,
            TimelineItem::Measurement { measurement, .. } => measurement.created_at,
            TimelineItem::Dose { dose, .. } => dose.recorded_at,
            TimelineItem::Advice(a) => a.timestamp,
            TimelineItem::Test(t) => t.timestamp,
            TimelineItem::Notification(n) => n.created_at,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            TimelineItem::Entry { entry, .. } => entry.id.as_str(),
            TimelineItem::Measurement { measurement, .. } => measurement.id.as_str(),
            TimelineItem::Dose { dose, .. } => dose.id.as_str(),
            TimelineItem::Advice(a) => a.id.as_str(),
            TimelineItem::Test(t) => t.id.as_str(),
            TimelineItem::Notification(n) => n.id.as_str(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            TimelineItem::Entry { .. } => 0,
            TimelineItem::Measurement { .. } => 1,
            TimelineItem::Dose { .. } => 2,
            TimelineItem::Advice(_) => 3,
            TimelineItem::Test(_) => 4,
            TimelineItem::Notification(_) => 5,
        }
    }

    /// Total order: date, then creation time; ties broken by item type and id
    /// so repeated calls return the same sequence.
    pub fn sort_key(&self) -> (NaiveDate, DateTime<Utc>, u8, String) {
        (self.date(), self.created_at(), self.rank(), self.id().to_owned())
    }
}

/// Builds the timeline. Notifications are limited to those addressed to
/// `viewer`; `None` includes all of them.
pub fn build_timeline(
    record: &PatientRecord,
    reference: &ClinicalReference,
    range: Option<DateRange>,
    viewer: Option<Role>,
) -> Vec<TimelineItem> {
    let mut items = Vec::new();
    for entry in record.entries.values() {
        items.push(TimelineItem::Entry { entry: entry.clone(), color: classify_urine_protein(entry.grade) });
    }
    for (measurement, assessment) in assess_all(record, reference) {
        items.push(TimelineItem::Measurement { measurement, assessment });
    }
    for dose in record.doses.values() {
        let medicine_name =
            record.prescription(&dose.prescription_id).map(|p| p.medicine_name.clone()).unwrap_or_default();
        items.push(TimelineItem::Dose { dose: dose.clone(), medicine_name });
    }
    items.extend(record.advice.iter().cloned().map(TimelineItem::Advice));
    items.extend(record.tests.iter().cloned().map(TimelineItem::Test));
    items.extend(
        record
            .notifications
            .iter()
            .filter(|n| viewer.is_none_or(|role| n.recipient_role.includes(role)))
            .cloned()
            .map(TimelineItem::Notification),
    );
    if let Some(range) = range {
        items.retain(|item| range.contains(item.date()));
    }
    items.sort_by_cached_key(TimelineItem::sort_key);
    items
}
