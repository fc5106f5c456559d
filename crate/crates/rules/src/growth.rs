//! Growth z-scores against median/SD reference norms, and BMI.
//!
//! Reference file schema (UTF-8, header mandatory):
//!
//! ```text
//! sex,age_months,metric,median,sd
//! ```
//!
//! `metric` is one of `height` (cm), `weight` (kg) or `bmi` (kg/m²). Lookups
//! use the row nearest in age within six months, preferring the younger row
//! on a tie. No interpolation between rows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::rounding::round_half_up_1dp;
use crate::{Result, RuleError, SeverityColor, Sex};

pub const GROWTH_HEADER: [&str; 5] = ["sex", "age_months", "metric", "median", "sd"];
pub const MAX_AGE_DISTANCE_MONTHS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthMetric {
    Height,
    Weight,
    Bmi,
}

impl GrowthMetric {
    pub const ALL: [GrowthMetric; 3] = [GrowthMetric::Height, GrowthMetric::Weight, GrowthMetric::Bmi];

    pub fn as_str(self) -> &'static str {
        match self {
            GrowthMetric::Height => "height",
            GrowthMetric::Weight => "weight",
            GrowthMetric::Bmi => "bmi",
        }
    }
}

impl fmt::Display for GrowthMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GrowthMetric {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self> {
        GrowthMetric::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| RuleError::Domain(format!("unknown growth metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthAssessment {
    pub z: f64,
    pub band: SeverityColor,
}

impl GrowthAssessment {
    pub fn from_z(z: f64) -> Self {
        let magnitude = z.abs();
        let band = if magnitude >= 2.0 {
            SeverityColor::Red
        } else if magnitude >= 1.0 {
            SeverityColor::Yellow
        } else {
            SeverityColor::Green
        };
        GrowthAssessment { z, band }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthNorm {
    pub age_months: u32,
    pub median: f64,
    pub sd: f64,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    sex: String,
    age_months: u32,
    metric: String,
    median: f64,
    sd: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GrowthReferenceTable {
    series: BTreeMap<(Sex, GrowthMetric), Vec<GrowthNorm>>,
}

impl GrowthReferenceTable {
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
        let headers = csv.headers().map_err(|e| RuleError::InvalidTable(e.to_string()))?.clone();
        if headers.iter().ne(GROWTH_HEADER) {
            return Err(RuleError::InvalidTable(format!(
                "expected header {:?}, found {:?}",
                GROWTH_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut series: BTreeMap<(Sex, GrowthMetric), Vec<GrowthNorm>> = BTreeMap::new();
        for (i, record) in csv.deserialize::<RawRow>().enumerate() {
            let line = i + 2;
            let raw = record.map_err(|e| RuleError::InvalidTable(e.to_string()))?;
            let bad = |what: &str| RuleError::InvalidTable(format!("row {line}: {what}"));
            let sex: Sex = raw.sex.parse().map_err(|_| bad("bad sex"))?;
            let metric: GrowthMetric = raw.metric.parse().map_err(|_| bad("bad metric"))?;
            if !(raw.sd.is_finite() && raw.sd > 0.0) {
                return Err(bad("sd must be positive"));
            }
            if !(raw.median.is_finite() && raw.median > 0.0) {
                return Err(bad("median must be positive"));
            }
            let rows = series.entry((sex, metric)).or_default();
            if rows.last().is_some_and(|prev| prev.age_months >= raw.age_months) {
                return Err(bad("ages must be strictly increasing per (sex, metric)"));
            }
            rows.push(GrowthNorm { age_months: raw.age_months, median: raw.median, sd: raw.sd });
        }
        Ok(GrowthReferenceTable { series })
    }

    /// Nearest row within six months of `age_months`; ties go to the younger row.
    pub fn norm(&self, sex: Sex, age_months: u32, metric: GrowthMetric) -> Result<GrowthNorm> {
        let miss = || RuleError::ReferenceMiss(format!("growth sex={sex} age_months={age_months} metric={metric}"));
        let rows = self.series.get(&(sex, metric)).ok_or_else(miss)?;
        rows.iter()
            .map(|row| (row.age_months.abs_diff(age_months), row))
            .filter(|(distance, _)| *distance <= MAX_AGE_DISTANCE_MONTHS)
            // rows ascend by age, so min_by_key keeps the first (younger) on ties
            .min_by_key(|(distance, _)| *distance)
            .map(|(_, row)| *row)
            .ok_or_else(miss)
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}

pub fn assess_growth(
    value: f64,
    sex: Sex,
    age_months: u32,
    metric: GrowthMetric,
    table: &GrowthReferenceTable,
) -> Result<GrowthAssessment> {
    if !(value.is_finite() && value > 0.0) {
        return Err(RuleError::Domain(format!("{metric} value {value} must be positive")));
    }
    let norm = table.norm(sex, age_months, metric)?;
    Ok(GrowthAssessment::from_z((value - norm.median) / norm.sd))
}

/// Body-mass index in kg/m². Keeps the exact value for z-scoring; use
/// [`Bmi::display`] for the one-decimal rendering.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bmi(pub f64);

impl Bmi {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn display(self) -> String {
        round_half_up_1dp(self.0)
    }
}

pub fn compute_bmi(weight_kg: f64, height_cm: f64) -> Result<Bmi> {
    if !(weight_kg.is_finite() && weight_kg > 0.0 && height_cm.is_finite() && height_cm > 0.0) {
        return Err(RuleError::Domain(format!(
            "BMI needs positive weight and height, got {weight_kg} kg and {height_cm} cm"
        )));
    }
    let metres = height_cm / 100.0;
    Ok(Bmi(weight_kg / (metres * metres)))
}
