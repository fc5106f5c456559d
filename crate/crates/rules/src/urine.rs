use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{RuleError, SeverityColor};

/// Semi-quantitative dipstick urine protein reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UrineProteinGrade {
    #[serde(rename = "negative")]
    Negative,
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "1+")]
    OnePlus,
    #[serde(rename = "2+")]
    TwoPlus,
    #[serde(rename = "3+")]
    ThreePlus,
    #[serde(rename = "4+")]
    FourPlus,
}

impl UrineProteinGrade {
    pub const ALL: [UrineProteinGrade; 6] = [
        UrineProteinGrade::Negative,
        UrineProteinGrade::Trace,
        UrineProteinGrade::OnePlus,
        UrineProteinGrade::TwoPlus,
        UrineProteinGrade::ThreePlus,
        UrineProteinGrade::FourPlus,
    ];

    /// Approximate protein concentration of the positive grades, in mg/dL.
    pub fn nominal_mg_dl(self) -> Option<u32> {
        match self {
            UrineProteinGrade::Negative | UrineProteinGrade::Trace => None,
            UrineProteinGrade::OnePlus => Some(30),
            UrineProteinGrade::TwoPlus => Some(100),
            UrineProteinGrade::ThreePlus => Some(300),
            UrineProteinGrade::FourPlus => Some(2000),
        }
    }

    /// 3+ and 4+ readings count toward a relapse run.
    pub fn is_heavy(self) -> bool {
        self >= UrineProteinGrade::ThreePlus
    }

    pub fn label(self) -> &'static str {
        match self {
            UrineProteinGrade::Negative => "negative",
            UrineProteinGrade::Trace => "trace",
            UrineProteinGrade::OnePlus => "1+",
            UrineProteinGrade::TwoPlus => "2+",
            UrineProteinGrade::ThreePlus => "3+",
            UrineProteinGrade::FourPlus => "4+",
        }
    }
}

impl fmt::Display for UrineProteinGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for UrineProteinGrade {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UrineProteinGrade::ALL
            .into_iter()
            .find(|g| g.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| RuleError::Domain(format!("unknown urine protein grade {s:?}")))
    }
}

pub fn classify_urine_protein(grade: UrineProteinGrade) -> SeverityColor {
    match grade {
        UrineProteinGrade::Negative | UrineProteinGrade::Trace => SeverityColor::Green,
        UrineProteinGrade::OnePlus | UrineProteinGrade::TwoPlus => SeverityColor::Yellow,
        UrineProteinGrade::ThreePlus | UrineProteinGrade::FourPlus => SeverityColor::Red,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_follow_grade_bands() {
        assert_eq!(classify_urine_protein(UrineProteinGrade::ThreePlus), SeverityColor::Red);
        assert_eq!(classify_urine_protein(UrineProteinGrade::OnePlus), SeverityColor::Yellow);
        assert_eq!(classify_urine_protein(UrineProteinGrade::Negative), SeverityColor::Green);
    }

    #[test]
    fn color_is_monotone_in_grade() {
        for a in UrineProteinGrade::ALL {
            for b in UrineProteinGrade::ALL {
                if a <= b {
                    assert!(classify_urine_protein(a) <= classify_urine_protein(b), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn nominal_concentration_only_for_positive_grades() {
        let expected = [None, None, Some(30), Some(100), Some(300), Some(2000)];
        for (g, want) in UrineProteinGrade::ALL.into_iter().zip(expected) {
            assert_eq!(g.nominal_mg_dl(), want);
            assert_eq!(want.is_some(), g >= UrineProteinGrade::OnePlus);
        }
    }

    #[test]
    fn labels_round_trip() {
        for g in UrineProteinGrade::ALL {
            assert_eq!(g.label().parse::<UrineProteinGrade>().unwrap(), g);
        }
        assert_eq!("NEGATIVE".parse::<UrineProteinGrade>().unwrap(), UrineProteinGrade::Negative);
        assert!("5+".parse::<UrineProteinGrade>().is_err());
    }
}
