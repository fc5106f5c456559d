use serde::{Deserialize, Serialize};

/// Display color of a data point. Ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeverityColor {
    Green,
    Yellow,
    Red,
}

impl SeverityColor {
    pub const ALL: [SeverityColor; 3] = [SeverityColor::Green, SeverityColor::Yellow, SeverityColor::Red];

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityColor::Green => "green",
            SeverityColor::Yellow => "yellow",
            SeverityColor::Red => "red",
        }
    }
}
