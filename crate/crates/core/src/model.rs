//! Persisted domain records.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use nephro_rules::{compute_bmi, Bmi, DoseSchedule, Sex, UrineProteinGrade};
use serde::{Deserialize, Serialize};

use crate::blob::BlobRef;
use crate::clock::iso_seconds;
use crate::notify::NotificationEvent;
use crate::{DoctorId, PatientId, RecordId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Patient,
    Doctor,
}

/// Who is performing an operation. `System` is the operator (CLI export,
/// maintenance) and bypasses per-patient access checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Actor {
    Patient(PatientId),
    Doctor(DoctorId),
    System,
}

impl Actor {
    pub fn role(&self) -> Option<Role> {
        match self {
            Actor::Patient(_) => Some(Role::Patient),
            Actor::Doctor(_) => Some(Role::Doctor),
            Actor::System => None,
        }
    }
}

/// Disease category assigned by the treating doctor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
pub enum OnsetCategory {
    #[serde(rename = "SSNS")]
    Ssns,
    #[serde(rename = "SRNS_IR")]
    SrnsIr,
    #[serde(rename = "SRNS_LR")]
    SrnsLr,
    #[default]
    Unassigned,
}

impl OnsetCategory {
    pub const ALL: [OnsetCategory; 4] =
        [OnsetCategory::Ssns, OnsetCategory::SrnsIr, OnsetCategory::SrnsLr, OnsetCategory::Unassigned];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub id: PatientId,
    pub name: String,
    pub date_of_birth: NaiveDate,
    pub sex: Sex,
    pub onset_category: OnsetCategory,
    pub doctor_id: Option<DoctorId>,
    pub verified: bool,
    pub history_notes: String,
    pub contact: String,
}

impl PatientProfile {
    /// Completed months of age on `date`.
    pub fn age_months_on(&self, date: NaiveDate) -> Option<u32> {
        use chrono::Datelike;
        if date < self.date_of_birth {
            return None;
        }
        let dob = self.date_of_birth;
        let mut months = (date.year() - dob.year()) * 12 + date.month() as i32 - dob.month() as i32;
        if date.day() < dob.day() {
            months -= 1;
        }
        u32::try_from(months).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoctorProfile {
    pub id: DoctorId,
    pub name: String,
    pub center: String,
    pub contact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiaryEntry {
    pub id: RecordId,
    pub patient_id: PatientId,
    pub date: NaiveDate,
    pub grade: UrineProteinGrade,
    pub symptoms: String,
    pub author_role: Role,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

/// Doctor-entered vitals and anthropometry. BMI is never stored; it is
/// derived from height and weight on every read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalMeasurement {
    pub id: RecordId,
    pub patient_id: PatientId,
    pub date: NaiveDate,
    pub systolic: Option<i32>,
    pub diastolic: Option<i32>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub comments: String,
    pub author_role: Role,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

impl ClinicalMeasurement {
    pub fn bmi(&self) -> Option<Bmi> {
        compute_bmi(self.weight_kg?, self.height_cm?).ok()
    }

    pub fn blood_pressure(&self) -> Option<(i32, i32)> {
        Some((self.systolic?, self.diastolic?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedicineCategory {
    Steroid,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    pub id: RecordId,
    pub patient_id: PatientId,
    pub medicine_name: String,
    pub category: MedicineCategory,
    pub dose_amount: f64,
    pub dose_unit: String,
    pub frequency: u32,
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
    pub prescribed_by: DoctorId,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
}

impl Prescription {
    pub fn schedule(&self) -> DoseSchedule {
        DoseSchedule { start: self.start, end: self.end, doses_per_day: self.frequency }
    }

    pub fn is_active_on(&self, date: NaiveDate) -> bool {
        self.schedule().is_active_on(date)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseEvent {
    pub id: RecordId,
    pub prescription_id: RecordId,
    pub date: NaiveDate,
    pub taken: bool,
    #[serde(with = "iso_seconds")]
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportUpload {
    pub id: RecordId,
    pub patient_id: PatientId,
    #[serde(with = "iso_seconds")]
    pub timestamp: DateTime<Utc>,
    pub blob: BlobRef,
    pub description: String,
    pub author_role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceMessage {
    pub id: RecordId,
    pub patient_id: PatientId,
    #[serde(with = "iso_seconds")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub author_role: Role,
    /// Client-supplied key; resubmitting the same key returns the stored message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOrder {
    pub id: RecordId,
    pub patient_id: PatientId,
    #[serde(with = "iso_seconds")]
    pub timestamp: DateTime<Utc>,
    pub tests: Vec<String>,
    pub comments: String,
}

/// Everything stored for one patient. This is the unit of atomic writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub profile: PatientProfile,
    /// One entry per calendar date; a later write for the same date replaces it.
    pub entries: BTreeMap<NaiveDate, DiaryEntry>,
    pub measurements: Vec<ClinicalMeasurement>,
    pub prescriptions: Vec<Prescription>,
    /// Keyed by (prescription, date); later writes replace.
    #[serde(with = "dose_key")]
    pub doses: BTreeMap<(RecordId, NaiveDate), DoseEvent>,
    pub reports: Vec<ReportUpload>,
    pub advice: Vec<AdviceMessage>,
    pub tests: Vec<TestOrder>,
    pub notifications: Vec<NotificationEvent>,
}

impl PatientRecord {
    pub fn new(profile: PatientProfile) -> Self {
        PatientRecord {
            profile,
            entries: BTreeMap::new(),
            measurements: Vec::new(),
            prescriptions: Vec::new(),
            doses: BTreeMap::new(),
            reports: Vec::new(),
            advice: Vec::new(),
            tests: Vec::new(),
            notifications: Vec::new(),
        }
    }

    pub fn prescription(&self, id: &RecordId) -> Option<&Prescription> {
        self.prescriptions.iter().find(|p| &p.id == id)
    }

    /// Entry dates and grades in ascending date order, ready for relapse scanning.
    pub fn grade_history(&self) -> Vec<(NaiveDate, UrineProteinGrade)> {
        self.entries.values().map(|e| (e.date, e.grade)).collect()
    }
}

mod dose_key {
    // JSON object keys must be strings, so the dose map is stored as a list.
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<(RecordId, NaiveDate), DoseEvent>, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BTreeMap<(RecordId, NaiveDate), DoseEvent>, D::Error> {
        let events = Vec::<DoseEvent>::deserialize(de)?;
        Ok(events.into_iter().map(|e| ((e.prescription_id.clone(), e.date), e)).collect())
    }
}
