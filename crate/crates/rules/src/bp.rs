//! Pediatric blood-pressure staging against a percentile reference table.
//!
//! Children under 13 are staged against the table row for their sex, age in
//! whole years and height band. From 13 on, fixed adolescent cutoffs apply.
//! Each channel (systolic, diastolic) is staged independently and the reading
//! takes the more severe of the two.
//!
//! Reference file schema (UTF-8, header mandatory):
//!
//! ```text
//! sex,age_years,height_band,sbp_p90,sbp_p95,dbp_p90,dbp_p95
//! ```
//!
//! `height_band` is a half-open height interval in cm written `lo-hi`. Two
//! special bands carry the adolescent cutoffs for `age_years = 13`:
//! `adolescent` holds the Elevated (p90 columns) and Stage 1 (p95 columns)
//! cutoffs, `adolescent_stage2` holds the Stage 2 cutoffs in both columns.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Result, RuleError, SeverityColor, Sex};

pub const BP_HEADER: [&str; 7] = ["sex", "age_years", "height_band", "sbp_p90", "sbp_p95", "dbp_p90", "dbp_p95"];

/// Age, in whole years, from which the fixed adolescent cutoffs apply.
pub const ADOLESCENT_AGE_YEARS: u32 = 13;
/// Added to the p95 threshold to obtain the Stage 2 threshold for children.
pub const STAGE2_MARGIN_MMHG: i32 = 12;
pub const MAX_AGE_MONTHS: u32 = 216;

const ADOLESCENT_BAND: &str = "adolescent";
const ADOLESCENT_STAGE2_BAND: &str = "adolescent_stage2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpStage {
    Normal,
    Elevated,
    Stage1,
    Stage2,
}

impl BpStage {
    pub const ALL: [BpStage; 4] = [BpStage::Normal, BpStage::Elevated, BpStage::Stage1, BpStage::Stage2];
}

/// Elevated BP stays green; its stage is still reported alongside the color.
pub fn bp_color(stage: BpStage) -> SeverityColor {
    match stage {
        BpStage::Normal | BpStage::Elevated => SeverityColor::Green,
        BpStage::Stage1 => SeverityColor::Yellow,
        BpStage::Stage2 => SeverityColor::Red,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpReading {
    pub systolic: i32,
    pub diastolic: i32,
    pub age_months: u32,
    pub sex: Sex,
    pub height_cm: f64,
}

impl BpReading {
    pub fn new(systolic: i32, diastolic: i32, age_months: u32, sex: Sex, height_cm: f64) -> Result<Self> {
        if !(systolic > diastolic && diastolic > 0) {
            return Err(RuleError::Domain(format!(
                "blood pressure {systolic}/{diastolic} must satisfy systolic > diastolic > 0"
            )));
        }
        if age_months == 0 || age_months > MAX_AGE_MONTHS {
            return Err(RuleError::Domain(format!("age {age_months} months outside 1..={MAX_AGE_MONTHS}")));
        }
        if !(height_cm.is_finite() && height_cm > 0.0) {
            return Err(RuleError::Domain(format!("height {height_cm} cm must be positive")));
        }
        Ok(BpReading { systolic, diastolic, age_months, sex, height_cm })
    }

    pub fn age_years(&self) -> u32 {
        self.age_months / 12
    }
}

/// Per-channel cutoffs, in mmHg. A value at or above a cutoff reaches that stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCutoffs {
    pub elevated: i32,
    pub stage1: i32,
    pub stage2: i32,
}

impl ChannelCutoffs {
    pub fn stage(&self, value: i32) -> BpStage {
        if value >= self.stage2 {
            BpStage::Stage2
        } else if value >= self.stage1 {
            BpStage::Stage1
        } else if value >= self.elevated {
            BpStage::Elevated
        } else {
            BpStage::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PercentileThresholds {
    pub sbp_p90: i32,
    pub sbp_p95: i32,
    pub dbp_p90: i32,
    pub dbp_p95: i32,
}

#[derive(Debug, Clone, PartialEq)]
struct PercentileRow {
    sex: Sex,
    age_years: u32,
    height_lo: f64,
    height_hi: f64,
    thresholds: PercentileThresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdolescentCutoffs {
    pub systolic: ChannelCutoffs,
    pub diastolic: ChannelCutoffs,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    sex: String,
    age_years: u32,
    height_band: String,
    sbp_p90: i32,
    sbp_p95: i32,
    dbp_p90: i32,
    dbp_p95: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpReferenceTable {
    rows: Vec<PercentileRow>,
    adolescent: BTreeMap<Sex, AdolescentCutoffs>,
}

impl BpReferenceTable {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| RuleError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_reader(text.as_bytes())
    }

    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers().map_err(table_err)?.clone();
        if headers.iter().ne(BP_HEADER) {
            return Err(RuleError::InvalidTable(format!(
                "expected header {:?}, found {:?}",
                BP_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut rows = Vec::new();
        // per sex: (adolescent thresholds, adolescent stage 2)
        type Fixed = (Option<(i32, i32, i32, i32)>, Option<(i32, i32)>);
        let mut partial: BTreeMap<Sex, Fixed> = BTreeMap::new();
        for (line, record) in csv.deserialize::<RawRow>().enumerate() {
            let raw = record.map_err(table_err)?;
            let sex: Sex = raw.sex.parse().map_err(|_| RuleError::InvalidTable(format!("row {}: bad sex {:?}", line + 2, raw.sex)))?;
            match raw.height_band.as_str() {
                ADOLESCENT_BAND => {
                    partial.entry(sex).or_default().0 = Some((raw.sbp_p90, raw.sbp_p95, raw.dbp_p90, raw.dbp_p95));
                }
                ADOLESCENT_STAGE2_BAND => {
                    partial.entry(sex).or_default().1 = Some((raw.sbp_p95, raw.dbp_p95));
                }
                band => {
                    let (lo, hi) = parse_band(band).ok_or_else(|| {
                        RuleError::InvalidTable(format!("row {}: bad height band {band:?}", line + 2))
                    })?;
                    if !(raw.sbp_p90 < raw.sbp_p95 && raw.dbp_p90 < raw.dbp_p95) {
                        return Err(RuleError::InvalidTable(format!("row {}: p90 must be below p95", line + 2)));
                    }
                    if raw.age_years >= ADOLESCENT_AGE_YEARS || raw.age_years == 0 {
                        return Err(RuleError::InvalidTable(format!(
                            "row {}: percentile rows cover ages 1-12, got {}",
                            line + 2,
                            raw.age_years
                        )));
                    }
                    rows.push(PercentileRow {
                        sex,
                        age_years: raw.age_years,
                        height_lo: lo,
                        height_hi: hi,
                        thresholds: PercentileThresholds {
                            sbp_p90: raw.sbp_p90,
                            sbp_p95: raw.sbp_p95,
                            dbp_p90: raw.dbp_p90,
                            dbp_p95: raw.dbp_p95,
                        },
                    });
                }
            }
        }

        let mut adolescent = BTreeMap::new();
        for sex in [Sex::F, Sex::M] {
            let Some((Some((se, s1, de, d1)), Some((s2, d2)))) = partial.get(&sex).copied() else {
                return Err(RuleError::InvalidTable(format!("missing adolescent cutoffs for {sex}")));
            };
            let cutoffs = AdolescentCutoffs {
                systolic: ChannelCutoffs { elevated: se, stage1: s1, stage2: s2 },
                diastolic: ChannelCutoffs { elevated: de, stage1: d1, stage2: d2 },
            };
            for c in [cutoffs.systolic, cutoffs.diastolic] {
                if !(c.elevated <= c.stage1 && c.stage1 < c.stage2) {
                    return Err(RuleError::InvalidTable(format!("adolescent cutoffs for {sex} not increasing")));
                }
            }
            adolescent.insert(sex, cutoffs);
        }

        rows.sort_by(|a, b| {
            (a.sex, a.age_years).cmp(&(b.sex, b.age_years)).then(a.height_lo.total_cmp(&b.height_lo))
        });
        for sex in [Sex::F, Sex::M] {
            for age in 1..ADOLESCENT_AGE_YEARS {
                let bands: Vec<_> = rows.iter().filter(|r| r.sex == sex && r.age_years == age).collect();
                if bands.is_empty() {
                    return Err(RuleError::InvalidTable(format!("no rows for {sex} age {age}")));
                }
                if bands.windows(2).any(|w| w[0].height_hi > w[1].height_lo) {
                    return Err(RuleError::InvalidTable(format!("overlapping height bands for {sex} age {age}")));
                }
            }
        }

        Ok(BpReferenceTable { rows, adolescent })
    }

    pub fn adolescent_cutoffs(&self, sex: Sex) -> AdolescentCutoffs {
        self.adolescent[&sex]
    }

    pub fn percentile_row(&self, sex: Sex, age_years: u32, height_cm: f64) -> Option<PercentileThresholds> {
        self.rows
            .iter()
            .find(|r| r.sex == sex && r.age_years == age_years && r.height_lo <= height_cm && height_cm < r.height_hi)
            .map(|r| r.thresholds)
    }

    /// Cutoffs for both channels that apply to `reading`.
    pub fn cutoffs_for(&self, reading: &BpReading) -> Result<(ChannelCutoffs, ChannelCutoffs)> {
        let static_cutoffs = self.adolescent_cutoffs(reading.sex);
        if reading.age_years() >= ADOLESCENT_AGE_YEARS {
            return Ok((static_cutoffs.systolic, static_cutoffs.diastolic));
        }
        let row = self
            .percentile_row(reading.sex, reading.age_years(), reading.height_cm)
            .ok_or_else(|| {
                RuleError::ReferenceMiss(format!(
                    "BP sex={} age_years={} height={}cm",
                    reading.sex,
                    reading.age_years(),
                    reading.height_cm
                ))
            })?;
        let systolic = ChannelCutoffs {
            elevated: row.sbp_p90,
            stage1: row.sbp_p95,
            stage2: (row.sbp_p95 + STAGE2_MARGIN_MMHG).min(static_cutoffs.systolic.stage2),
        };
        let diastolic = ChannelCutoffs {
            elevated: row.dbp_p90,
            stage1: row.dbp_p95,
            stage2: (row.dbp_p95 + STAGE2_MARGIN_MMHG).min(static_cutoffs.diastolic.stage2),
        };
        Ok((systolic, diastolic))
    }
}

fn parse_band(band: &str) -> Option<(f64, f64)> {
    let (lo, hi) = band.split_once('-')?;
    let lo: f64 = lo.trim().parse().ok()?;
    let hi: f64 = hi.trim().parse().ok()?;
    (lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi).then_some((lo, hi))
}

fn table_err(e: csv::Error) -> RuleError {
    RuleError::InvalidTable(e.to_string())
}

pub fn classify_bp(reading: &BpReading, table: &BpReferenceTable) -> Result<BpStage> {
    let (systolic, diastolic) = table.cutoffs_for(reading)?;
    Ok(systolic.stage(reading.systolic).max(diastolic.stage(reading.diastolic)))
}
