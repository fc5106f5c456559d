//! Alert events: what triggers them, who receives them, and how they are
//! delivered.
//!
//! Every event carries an idempotency key derived from the patient, the kind
//! and the record that caused it. The in-app feed inserts on that key, so
//! dispatching the same event twice never duplicates a feed item, and
//! external sinks receive the key so they can do the same.

mod dispatch;
mod sinks;
mod triggers;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::iso_seconds;
use crate::model::Role;
use crate::{PatientId, RecordId};

pub use dispatch::{DeliveryReport, Dispatcher, Feed, FeedOutcome, RetryPolicy, SinkOutcome, SinkResult};
pub use sinks::{FeedSink, LogFileSink, NotificationSink, SinkError, WebhookSink};
pub use triggers::{
    advice_event, evaluate_entry_triggers, evaluate_measurement_triggers, medicine_event, test_order_event,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    HeavyProteinuria,
    RelapseDetected,
    BpStage1,
    BpStage2,
    GrowthRed,
    DoctorAdvice,
    TestOrdered,
    MedicineUpdated,
}

impl NotificationKind {
    pub const ALL: [NotificationKind; 8] = [
        NotificationKind::HeavyProteinuria,
        NotificationKind::RelapseDetected,
        NotificationKind::BpStage1,
        NotificationKind::BpStage2,
        NotificationKind::GrowthRed,
        NotificationKind::DoctorAdvice,
        NotificationKind::TestOrdered,
        NotificationKind::MedicineUpdated,
    ];

    /// Clinical alerts go to both sides; doctor-initiated messages go to the patient.
    pub fn recipient(self) -> RecipientRole {
        match self {
            NotificationKind::HeavyProteinuria
            | NotificationKind::RelapseDetected
            | NotificationKind::BpStage1
            | NotificationKind::BpStage2
            | NotificationKind::GrowthRed => RecipientRole::Both,
            NotificationKind::DoctorAdvice | NotificationKind::TestOrdered | NotificationKind::MedicineUpdated => {
                RecipientRole::Patient
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NotificationKind::HeavyProteinuria => "heavy_proteinuria",
            NotificationKind::RelapseDetected => "relapse_detected",
            NotificationKind::BpStage1 => "bp_stage1",
            NotificationKind::BpStage2 => "bp_stage2",
            NotificationKind::GrowthRed => "growth_red",
            NotificationKind::DoctorAdvice => "doctor_advice",
            NotificationKind::TestOrdered => "test_ordered",
            NotificationKind::MedicineUpdated => "medicine_updated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipientRole {
    Patient,
    Doctor,
    Both,
}

impl RecipientRole {
    pub fn includes(self, role: Role) -> bool {
        matches!(
            (self, role),
            (RecipientRole::Both, _) | (RecipientRole::Patient, Role::Patient) | (RecipientRole::Doctor, Role::Doctor)
        )
    }
}

/// A triggered alert. Serializes to the webhook wire shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub id: RecordId,
    pub kind: NotificationKind,
    pub recipient_role: RecipientRole,
    pub patient_id: PatientId,
    pub body: String,
    #[serde(with = "iso_seconds")]
    pub created_at: DateTime<Utc>,
    pub idempotency_key: String,
}

impl NotificationEvent {
    pub fn new(
        patient_id: &PatientId,
        kind: NotificationKind,
        source: &str,
        body: impl Into<String>,
        created_at: DateTime<Utc>,
    ) -> Self {
        NotificationEvent {
            id: RecordId::generate(),
            kind,
            recipient_role: kind.recipient(),
            patient_id: patient_id.clone(),
            body: body.into(),
            created_at,
            idempotency_key: idempotency_key(patient_id, kind, source),
        }
    }
}

/// SHA-256 over `patient_id|kind|source`, lowercase hex.
pub fn idempotency_key(patient_id: &PatientId, kind: NotificationKind, source: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(patient_id.as_str().as_bytes());
    hasher.update(b"|");
    hasher.update(kind.as_str().as_bytes());
    hasher.update(b"|");
    hasher.update(source.as_bytes());
    hex::encode(hasher.finalize())
}
