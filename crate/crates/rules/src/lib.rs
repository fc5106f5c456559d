//! Clinical classification rules for pediatric nephrotic-syndrome monitoring.
//!
//! Everything in this crate is pure: no I/O beyond parsing reference tables
//! handed in by the caller, and no clock access. Dates are always parameters.
//!
//! The main entry points:
//!
//! - [`classify_urine_protein`] and [`relapse_scan`] for dipstick diaries
//! - [`classify_bp`] / [`bp_color`] against a [`BpReferenceTable`]
//! - [`assess_growth`] / [`compute_bmi`] against a [`GrowthReferenceTable`]
//! - [`patient_criticality`] to fold the latest channel colors into one flag
//! - [`adherence_rate`] for medication intake over a date window
//!
//! The [`batch`] module evaluates the same rules over many inputs at once,
//! in parallel when the `parallel` feature is enabled.

pub mod adherence;
pub mod batch;
pub mod bp;
pub mod criticality;
mod error;
pub mod growth;
pub mod relapse;
pub mod rounding;
mod severity;
mod urine;

pub use adherence::{adherence_rate, AdherenceWindow, DoseRecord, DoseSchedule};
pub use bp::{bp_color, classify_bp, BpReading, BpReferenceTable, BpStage};
pub use criticality::{patient_criticality, LatestAssessment};
pub use error::{Result, RuleError};
pub use growth::{
    assess_growth, compute_bmi, Bmi, GrowthAssessment, GrowthMetric, GrowthReferenceTable,
};
pub use relapse::{relapse_scan, EntryFlag, RelapseScan, RelapseScanner, RelapseState, RelapseStatus};
pub use severity::SeverityColor;
pub use urine::{classify_urine_protein, UrineProteinGrade};

use serde::{Deserialize, Serialize};

/// Biological sex as recorded in reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::F => "F",
            Sex::M => "M",
        }
    }
}

impl std::str::FromStr for Sex {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "F" | "f" => Ok(Sex::F),
            "M" | "m" => Ok(Sex::M),
            other => Err(RuleError::Domain(format!("unknown sex {other:?}"))),
        }
    }
}

impl std::fmt::Display for Sex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const BP_REFERENCE_FILE: &str = "bp_reference_v1.csv";
pub const GROWTH_REFERENCE_FILE: &str = "growth_reference_v1.csv";

/// Directory holding the reference tables shipped with this crate's sources.
/// Deployments normally point their config at their own copies instead.
pub fn bundled_data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}
