//! Glue between stored records and the pure rules: per-measurement
//! assessments, the latest state of each channel, and the doctor overview.

use std::collections::BTreeMap;
use std::path::Path;

use nephro_rules::{
    assess_growth, batch, bp_color, classify_bp, classify_urine_protein, relapse_scan, BpReading, BpReferenceTable,
    BpStage, GrowthAssessment, GrowthMetric, GrowthReferenceTable, LatestAssessment, RelapseState, SeverityColor,
    BP_REFERENCE_FILE, GROWTH_REFERENCE_FILE,
};
use serde::{Deserialize, Serialize};

use crate::model::{ClinicalMeasurement, OnsetCategory, PatientProfile, PatientRecord};
use crate::Result;

/// The loaded BP and growth reference tables.
#[derive(Debug, Clone)]
pub struct ClinicalReference {
    pub bp: BpReferenceTable,
    pub growth: GrowthReferenceTable,
}

impl ClinicalReference {
    pub fn load(bp_path: impl AsRef<Path>, growth_path: impl AsRef<Path>) -> Result<Self> {
        Ok(ClinicalReference {
            bp: BpReferenceTable::from_path(bp_path)?,
            growth: GrowthReferenceTable::from_path(growth_path)?,
        })
    }

    /// The tables that ship with the rules crate sources.
    pub fn bundled() -> Result<Self> {
        let dir = nephro_rules::bundled_data_dir();
        Self::load(dir.join(BP_REFERENCE_FILE), dir.join(GROWTH_REFERENCE_FILE))
    }
}

/// Derived view of one measurement. Nothing here is persisted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAssessment {
    pub bmi: Option<f64>,
    pub bmi_display: Option<String>,
    pub bp_stage: Option<BpStage>,
    pub bp_color: Option<SeverityColor>,
    pub growth: BTreeMap<GrowthMetric, GrowthAssessment>,
    /// Channels that could not be assessed and why.
    pub unassessed: Vec<String>,
}

/// Assesses `m` for `profile`. `known_height_cm` is used for the BP
/// percentile lookup when `m` itself carries no height.
pub fn assess_measurement(
    profile: &PatientProfile,
    m: &ClinicalMeasurement,
    known_height_cm: Option<f64>,
    reference: &ClinicalReference,
) -> MeasurementAssessment {
    let mut out = MeasurementAssessment::default();
    let bmi = m.bmi();
    out.bmi = bmi.map(|b| b.value());
    out.bmi_display = bmi.map(|b| b.display());

    let Some(age_months) = profile.age_months_on(m.date) else {
        out.unassessed.push(format!("measurement date {} precedes date of birth", m.date));
        return out;
    };

    if let Some((systolic, diastolic)) = m.blood_pressure() {
        // Height only selects a percentile row, which adolescents do not use.
        let height = m.height_cm.or(known_height_cm).or((age_months >= 13 * 12).then_some(1.0));
        let stage = match height {
            Some(h) => BpReading::new(systolic, diastolic, age_months, profile.sex, h)
                .and_then(|r| classify_bp(&r, &reference.bp))
                .map_err(|e| e.to_string()),
            None => Err("no height on record for the BP percentile lookup".to_owned()),
        };
        match stage {
            Ok(stage) => {
                out.bp_stage = Some(stage);
                out.bp_color = Some(bp_color(stage));
            }
            Err(e) => out.unassessed.push(format!("bp: {e}")),
        }
    }

    let values = [
        (GrowthMetric::Height, m.height_cm),
        (GrowthMetric::Weight, m.weight_kg),
        (GrowthMetric::Bmi, out.bmi),
    ];
    for (metric, value) in values {
        let Some(value) = value else { continue };
        match assess_growth(value, profile.sex, age_months, metric, &reference.growth) {
            Ok(a) => {
                out.growth.insert(metric, a);
            }
            Err(e) => out.unassessed.push(format!("{metric}: {e}")),
        }
    }
    out
}

/// Measurements in (date, created_at) order, each with its assessment.
pub fn assess_all(record: &PatientRecord, reference: &ClinicalReference) -> Vec<(ClinicalMeasurement, MeasurementAssessment)> {
    let mut sorted: Vec<&ClinicalMeasurement> = record.measurements.iter().collect();
    sorted.sort_by_key(|m| (m.date, m.created_at));
    let mut known_height = None;
    sorted
        .into_iter()
        .map(|m| {
            let a = assess_measurement(&record.profile, m, known_height, reference);
            known_height = m.height_cm.or(known_height);
            (m.clone(), a)
        })
        .collect()
}

/// Current clinical picture of one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientStatus {
    pub latest: LatestAssessment,
    pub relapse: RelapseState,
    pub critical: bool,
}

/// Latest color of each channel: the last entry's urine color, the last
/// staged BP and, per growth metric, the last assessed band.
pub fn latest_assessment(record: &PatientRecord, reference: &ClinicalReference) -> LatestAssessment {
    let urine_color = record.entries.values().next_back().map(|e| classify_urine_protein(e.grade));
    let mut bp_stage = None;
    let mut growth = BTreeMap::new();
    for (_, a) in assess_all(record, reference) {
        bp_stage = a.bp_stage.or(bp_stage);
        for (metric, g) in a.growth {
            growth.insert(metric, g.band);
        }
    }
    LatestAssessment { urine_color, bp_stage, growth_bands: growth.into_values().collect() }
}

pub fn relapse_state(record: &PatientRecord) -> RelapseState {
    // entries are keyed by date, so the history is strictly ascending
    relapse_scan(&record.grade_history()).map(|s| s.state).unwrap_or_default()
}

pub fn patient_status(record: &PatientRecord, reference: &ClinicalReference) -> PatientStatus {
    let latest = latest_assessment(record, reference);
    let relapse = relapse_state(record);
    let critical = nephro_rules::patient_criticality(&latest, &relapse);
    PatientStatus { latest, relapse, critical }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    #[serde(rename = "SSNS")]
    pub ssns: usize,
    #[serde(rename = "SRNS_IR")]
    pub srns_ir: usize,
    #[serde(rename = "SRNS_LR")]
    pub srns_lr: usize,
    #[serde(rename = "Unassigned")]
    pub unassigned: usize,
}

impl CategoryCounts {
    fn add(&mut self, category: OnsetCategory) {
        match category {
            OnsetCategory::Ssns => self.ssns += 1,
            OnsetCategory::SrnsIr => self.srns_ir += 1,
            OnsetCategory::SrnsLr => self.srns_lr += 1,
            OnsetCategory::Unassigned => self.unassigned += 1,
        }
    }

    pub fn sum(&self) -> usize {
        self.ssns + self.srns_ir + self.srns_lr + self.unassigned
    }
}

/// Category breakdown and critical count over a doctor's patients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overview {
    pub category_counts: CategoryCounts,
    pub critical_count: usize,
    pub total: usize,
}

pub fn overview(records: &[PatientRecord], reference: &ClinicalReference) -> Overview {
    let inputs: Vec<(LatestAssessment, RelapseState)> =
        batch::map(records, |r| (latest_assessment(r, reference), relapse_state(r)));
    let critical_count = batch::criticality_all(&inputs).into_iter().filter(|c| *c).count();
    let mut category_counts = CategoryCounts::default();
    for r in records {
        category_counts.add(r.profile.onset_category);
    }
    Overview { category_counts, critical_count, total: records.len() }
}
