use serde::{Deserialize, Serialize};

use crate::{BpStage, RelapseState, SeverityColor};

/// Most recent assessment of each channel. `None` / empty means the channel
/// has no data yet.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatestAssessment {
    pub urine_color: Option<SeverityColor>,
    pub bp_stage: Option<BpStage>,
    pub growth_bands: Vec<SeverityColor>,
}

impl LatestAssessment {
    fn any_red(&self) -> bool {
        self.urine_color == Some(SeverityColor::Red)
            || self.bp_stage.map(crate::bp_color) == Some(SeverityColor::Red)
            || self.growth_bands.contains(&SeverityColor::Red)
    }
}

/// A patient is critical while in relapse, at Stage 2 hypertension, or with
/// any red channel.
pub fn patient_criticality(latest: &LatestAssessment, relapse: &RelapseState) -> bool {
    relapse.is_relapse() || latest.bp_stage == Some(BpStage::Stage2) || latest.any_red()
}
