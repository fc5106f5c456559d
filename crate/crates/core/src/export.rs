//! Spreadsheet export of a patient's diary.
//!
//! One CSV row per calendar day that has a dipstick entry, measurement, dose
//! tick, advice message or test order. The output is RFC 4180: UTF-8, CRLF
//! line endings, fields quoted only when they contain a comma, quote or line
//! break. Identical state always produces identical bytes.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use nephro_rules::compute_bmi;
use nephro_rules::rounding::round_half_up_1dp;
use serde::{Deserialize, Serialize};

use crate::model::{PatientRecord, Role};
use crate::{DiaryError, Result};

pub const HEADER: [&str; 11] = [
    "date",
    "urine_protein",
    "symptoms",
    "systolic",
    "diastolic",
    "height_cm",
    "weight_kg",
    "bmi",
    "medicines_taken",
    "medicines_due",
    "notes",
];

pub const CONTENT_TYPE: &str = "text/csv; charset=utf-8";

/// One exported day, already rendered to cell text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRow {
    pub date: String,
    pub urine_protein: String,
    pub symptoms: String,
    pub systolic: String,
    pub diastolic: String,
    pub height_cm: String,
    pub weight_kg: String,
    pub bmi: String,
    pub medicines_taken: String,
    pub medicines_due: String,
    pub notes: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExportDocument {
    pub rows: Vec<ExportRow>,
}

impl ExportDocument {
    pub fn from_record(record: &PatientRecord) -> Self {
        ExportDocument { rows: export_rows(record) }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(parse_err)?;
        if header.iter().ne(HEADER) {
            return Err(DiaryError::Validation(format!("unexpected export header {:?}", header)));
        }
        let rows = reader.deserialize().collect::<std::result::Result<Vec<ExportRow>, _>>().map_err(parse_err)?;
        Ok(ExportDocument { rows })
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        writer.write_record(HEADER).expect("write to Vec");
        for row in &self.rows {
            writer.write_record(row.cells()).expect("write to Vec");
        }
        let bytes = writer.into_inner().expect("flush to Vec");
        String::from_utf8(bytes).expect("cells are UTF-8")
    }
}

impl ExportRow {
    fn cells(&self) -> [&str; 11] {
        [
            &self.date,
            &self.urine_protein,
            &self.symptoms,
            &self.systolic,
            &self.diastolic,
            &self.height_cm,
            &self.weight_kg,
            &self.bmi,
            &self.medicines_taken,
            &self.medicines_due,
            &self.notes,
        ]
    }
}

fn parse_err(e: csv::Error) -> DiaryError {
    DiaryError::Validation(format!("malformed export: {e}"))
}

pub fn export_csv(record: &PatientRecord) -> String {
    ExportDocument::from_record(record).to_csv()
}

type NoteKey = (u8, chrono::DateTime<chrono::Utc>, String);

#[derive(Default)]
struct Day {
    row: ExportRow,
    systolic: Option<(chrono::DateTime<chrono::Utc>, i32, i32)>,
    height: Option<(chrono::DateTime<chrono::Utc>, f64)>,
    weight: Option<(chrono::DateTime<chrono::Utc>, f64)>,
    // (sort key, note text)
    notes: Vec<(NoteKey, String)>,
    taken: u32,
}

pub fn export_rows(record: &PatientRecord) -> Vec<ExportRow> {
    let mut days: BTreeMap<NaiveDate, Day> = BTreeMap::new();

    for entry in record.entries.values() {
        let day = days.entry(entry.date).or_default();
        day.row.urine_protein = entry.grade.label().to_owned();
        day.row.symptoms = entry.symptoms.clone();
    }

    for m in &record.measurements {
        let day = days.entry(m.date).or_default();
        let at = m.created_at;
        if let Some((s, d)) = m.blood_pressure() {
            if day.systolic.is_none_or(|(t, _, _)| t <= at) {
                day.systolic = Some((at, s, d));
            }
        }
        if let Some(h) = m.height_cm {
            if day.height.is_none_or(|(t, _)| t <= at) {
                day.height = Some((at, h));
            }
        }
        if let Some(w) = m.weight_kg {
            if day.weight.is_none_or(|(t, _)| t <= at) {
                day.weight = Some((at, w));
            }
        }
        if !m.comments.is_empty() {
            day.notes.push(((0, at, m.id.to_string()), format!("Comment: {}", m.comments)));
        }
    }

    for dose in record.doses.values() {
        let day = days.entry(dose.date).or_default();
        if dose.taken {
            if let Some(p) = record.prescription(&dose.prescription_id) {
                if p.is_active_on(dose.date) {
                    day.taken += p.frequency;
                }
            }
        }
    }

    for a in &record.advice {
        let day = days.entry(a.timestamp.date_naive()).or_default();
        let label = match a.author_role {
            Role::Doctor => "Advice",
            Role::Patient => "Complaint",
        };
        day.notes.push(((1, a.timestamp, a.id.to_string()), format!("{label}: {}", a.text)));
    }

    for t in &record.tests {
        let day = days.entry(t.timestamp.date_naive()).or_default();
        let mut text = format!("Tests: {}", t.tests.join(", "));
        if !t.comments.is_empty() {
            text.push_str(&format!(" ({})", t.comments));
        }
        day.notes.push(((2, t.timestamp, t.id.to_string()), text));
    }

    days.into_iter()
        .map(|(date, mut day)| {
            let mut row = std::mem::take(&mut day.row);
            row.date = date.to_string();
            if let Some((_, s, d)) = day.systolic {
                row.systolic = s.to_string();
                row.diastolic = d.to_string();
            }
            let height = day.height.map(|(_, h)| h);
            let weight = day.weight.map(|(_, w)| w);
            row.height_cm = height.map(round_half_up_1dp).unwrap_or_default();
            row.weight_kg = weight.map(round_half_up_1dp).unwrap_or_default();
            if let (Some(h), Some(w)) = (height, weight) {
                row.bmi = compute_bmi(w, h).map(|b| b.display()).unwrap_or_default();
            }
            let due: u32 = record.prescriptions.iter().filter(|p| p.is_active_on(date)).map(|p| p.frequency).sum();
            if due > 0 || day.taken > 0 {
                row.medicines_taken = day.taken.to_string();
                row.medicines_due = due.to_string();
            }
            day.notes.sort();
            row.notes = day.notes.into_iter().map(|(_, text)| text).collect::<Vec<_>>().join("; ");
            row
        })
        .collect()
}
