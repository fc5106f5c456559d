use chrono::{DateTime, Utc};
use nephro_rules::{relapse_scan, BpStage, RelapseState, SeverityColor, UrineProteinGrade};

use super::{NotificationEvent, NotificationKind};
use crate::assess::MeasurementAssessment;
use crate::model::{AdviceMessage, ClinicalMeasurement, DiaryEntry, Prescription, TestOrder};
use crate::PatientId;

/// Alerts raised by a new dipstick entry.
///
/// `history` is the patient's full entry sequence including `entry`;
/// `relapse_before` is the state before `entry` was written. A relapse alert
/// fires only on the transition into relapse, so an ongoing episode adds
/// heavy-proteinuria alerts but no further relapse alerts.
pub fn evaluate_entry_triggers(
    entry: &DiaryEntry,
    history: &[(chrono::NaiveDate, UrineProteinGrade)],
    relapse_before: &RelapseState,
) -> Vec<NotificationEvent> {
    let mut events = Vec::new();
    if entry.grade.is_heavy() {
        events.push(NotificationEvent::new(
            &entry.patient_id,
            NotificationKind::HeavyProteinuria,
            entry.id.as_str(),
            format!("Urine protein {} recorded on {}", entry.grade, entry.date),
            entry.created_at,
        ));
    }
    let after = relapse_scan(history).map(|s| s.state).unwrap_or_default();
    if after.is_relapse() && !relapse_before.is_relapse() {
        let onset = after.onset_date.map(|d| d.to_string()).unwrap_or_default();
        events.push(NotificationEvent::new(
            &entry.patient_id,
            NotificationKind::RelapseDetected,
            entry.id.as_str(),
            format!("Possible relapse: urine protein 3+ or higher on {} consecutive entries since {onset}", after.suspect_count),
            entry.created_at,
        ));
    }
    events
}

/// Alerts raised by a new clinical measurement, ordered by kind.
pub fn evaluate_measurement_triggers(m: &ClinicalMeasurement, assessment: &MeasurementAssessment) -> Vec<NotificationEvent> {
    let mut events = Vec::new();
    let bp_text = m.blood_pressure().map(|(s, d)| format!("{s}/{d} mmHg")).unwrap_or_default();
    match assessment.bp_stage {
        Some(BpStage::Stage1) => events.push(NotificationEvent::new(
            &m.patient_id,
            NotificationKind::BpStage1,
            m.id.as_str(),
            format!("Stage 1 hypertension: BP {bp_text} on {}", m.date),
            m.created_at,
        )),
        Some(BpStage::Stage2) => events.push(NotificationEvent::new(
            &m.patient_id,
            NotificationKind::BpStage2,
            m.id.as_str(),
            format!("Stage 2 hypertension: BP {bp_text} on {}", m.date),
            m.created_at,
        )),
        _ => {}
    }
    let red: Vec<String> = assessment
        .growth
        .iter()
        .filter(|(_, a)| a.band == SeverityColor::Red)
        .map(|(metric, a)| format!("{metric} z={:.2}", a.z))
        .collect();
    if !red.is_empty() {
        events.push(NotificationEvent::new(
            &m.patient_id,
            NotificationKind::GrowthRed,
            m.id.as_str(),
            format!("Growth outside 2 SD on {}: {}", m.date, red.join(", ")),
            m.created_at,
        ));
    }
    events.sort_by_key(|e| e.kind);
    events
}

/// A doctor's message to the patient. `source` is the advice record id or a
/// client-supplied key, so resubmitting the same key yields the same event.
pub fn advice_event(patient_id: &PatientId, source: &str, body: &str, at: DateTime<Utc>) -> NotificationEvent {
    NotificationEvent::new(patient_id, NotificationKind::DoctorAdvice, source, body, at)
}

pub fn test_order_event(order: &TestOrder) -> NotificationEvent {
    let mut body = format!("Tests advised: {}", order.tests.join(", "));
    if !order.comments.is_empty() {
        body.push_str(&format!(" ({})", order.comments));
    }
    NotificationEvent::new(&order.patient_id, NotificationKind::TestOrdered, order.id.as_str(), body, order.timestamp)
}

/// `revision` distinguishes successive updates of one prescription.
pub fn medicine_event(p: &Prescription, revision: &str, at: DateTime<Utc>) -> NotificationEvent {
    let end = p.end.map(|e| format!(" until {e}")).unwrap_or_default();
    NotificationEvent::new(
        &p.patient_id,
        NotificationKind::MedicineUpdated,
        &format!("{}:{revision}", p.id),
        format!("{}: {} {} x{}/day from {}{end}", p.medicine_name, p.dose_amount, p.dose_unit, p.frequency, p.start),
        at,
    )
}

impl From<&AdviceMessage> for NotificationEvent {
    fn from(a: &AdviceMessage) -> Self {
        advice_event(&a.patient_id, a.id.as_str(), &a.text, a.timestamp)
    }
}
