use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use chrono::NaiveDate;
use nephro_rules::{
    adherence_rate, classify_urine_protein, AdherenceWindow, DoseRecord, RelapseState, SeverityColor, Sex,
    UrineProteinGrade,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assess::{self, ClinicalReference, MeasurementAssessment, Overview, PatientStatus};
use crate::blob::BlobStore;
use crate::clock::Clock;
use crate::export;
use crate::model::{
    Actor, AdviceMessage, ClinicalMeasurement, DiaryEntry, DoctorProfile, DoseEvent, MedicineCategory,
    OnsetCategory, PatientProfile, PatientRecord, Prescription, ReportUpload, Role, TestOrder,
};
use crate::notify::{self, evaluate_entry_triggers, evaluate_measurement_triggers, Feed, NotificationEvent};
use crate::repo::Repository;
use crate::timeline::{build_timeline, DateRange, TimelineItem};
use crate::{DiaryError, DoctorId, PatientId, RecordId, Result};

type Shared<T> = Arc<RwLock<T>>;

/// The diary store. Cheap to share behind an `Arc`; all methods take `&self`.
///
/// Writes to one patient are serialized by that patient's lock and become
/// visible only after the repository has persisted them. Reads never block
/// on other patients.
pub struct Diary {
    repo: Arc<dyn Repository>,
    clock: Arc<dyn Clock>,
    reference: Arc<ClinicalReference>,
    blobs: BlobStore,
    patients: RwLock<BTreeMap<PatientId, Shared<PatientRecord>>>,
    doctors: RwLock<BTreeMap<DoctorId, DoctorProfile>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct NewPatient {
    pub name: String,
    pub date_of_birth: Option<NaiveDate>,
    pub sex: Option<Sex>,
    #[serde(default)]
    pub doctor_id: Option<DoctorId>,
    #[serde(default)]
    pub contact: String,
    #[serde(default)]
    pub history_notes: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct NewDoctor {
    pub name: String,
    #[serde(default)]
    pub center: String,
    #[serde(default)]
    pub contact: String,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct NewMeasurement {
    pub date: NaiveDate,
    pub systolic: Option<i32>,
    pub diastolic: Option<i32>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    #[serde(default)]
    pub comments: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct NewPrescription {
    pub medicine_name: String,
    pub category: MedicineCategory,
    pub dose_amount: f64,
    pub dose_unit: String,
    pub frequency: u32,
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
}

/// Fields a doctor may change on an existing prescription. The category is
/// fixed at creation.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct PrescriptionUpdate {
    pub medicine_name: Option<String>,
    pub dose_amount: Option<f64>,
    pub dose_unit: Option<String>,
    pub frequency: Option<u32>,
    pub start: Option<NaiveDate>,
    /// `Some(None)` clears the end date.
    #[serde(default, with = "double_option")]
    pub end: Option<Option<NaiveDate>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct DetailsUpdate {
    pub name: Option<String>,
    pub contact: Option<String>,
    pub history_notes: Option<String>,
    pub onset_category: Option<OnsetCategory>,
}

mod double_option {
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, T: Deserialize<'de>, D: Deserializer<'de>>(de: D) -> Result<Option<Option<T>>, D::Error> {
        Option::<T>::deserialize(de).map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordedEntry {
    pub entry: DiaryEntry,
    pub color: SeverityColor,
    pub relapse: RelapseState,
    /// Events this write added to the feed.
    pub events: Vec<NotificationEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordedMeasurement {
    pub measurement: ClinicalMeasurement,
    pub assessment: MeasurementAssessment,
    pub events: Vec<NotificationEvent>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RecordCounts {
    pub entries: usize,
    pub measurements: usize,
    pub prescriptions: usize,
    pub doses: usize,
    pub reports: usize,
    pub advice: usize,
    pub tests: usize,
    pub notifications: usize,
}

impl RecordCounts {
    fn of(r: &PatientRecord) -> Self {
        RecordCounts {
            entries: r.entries.len(),
            measurements: r.measurements.len(),
            prescriptions: r.prescriptions.len(),
            doses: r.doses.len(),
            reports: r.reports.len(),
            advice: r.advice.len(),
            tests: r.tests.len(),
            notifications: r.notifications.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatientSummary {
    pub profile: PatientProfile,
    pub status: PatientStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdherenceReport {
    pub overall: AdherenceWindow,
    pub prescriptions: Vec<PrescriptionAdherence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrescriptionAdherence {
    pub prescription_id: RecordId,
    pub medicine_name: String,
    pub window: AdherenceWindow,
}

/// Who may touch a patient's data in a given operation.
#[derive(Debug, Clone, Copy)]
enum Allow {
    PatientOrDoctor,
    DoctorOnly,
    PatientOnly,
}

impl Diary {
    pub fn open(
        repo: Arc<dyn Repository>,
        clock: Arc<dyn Clock>,
        reference: Arc<ClinicalReference>,
        blobs: BlobStore,
    ) -> Result<Self> {
        let snapshot = repo.load()?;
        let patients = snapshot
            .patients
            .into_iter()
            .map(|r| (r.profile.id.clone(), Arc::new(RwLock::new(r))))
            .collect();
        let doctors = snapshot.doctors.into_iter().map(|d| (d.id.clone(), d)).collect();
        Ok(Diary {
            repo,
            clock,
            reference,
            blobs,
            patients: RwLock::new(patients),
            doctors: RwLock::new(doctors),
        })
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn reference(&self) -> &ClinicalReference {
        &self.reference
    }

    pub fn blobs(&self) -> &BlobStore {
        &self.blobs
    }

    // ---- registration ----

    pub fn create_doctor(&self, new: NewDoctor) -> Result<DoctorProfile> {
        let name = non_empty("name", &new.name)?;
        let doctor = DoctorProfile { id: DoctorId::generate(), name, center: new.center, contact: new.contact };
        self.repo.save_doctor(&doctor)?;
        self.doctors.write().unwrap().insert(doctor.id.clone(), doctor.clone());
        Ok(doctor)
    }

    pub fn create_patient(&self, new: NewPatient) -> Result<PatientProfile> {
        let name = non_empty("name", &new.name)?;
        let date_of_birth = new.date_of_birth.ok_or_else(|| DiaryError::Validation("date_of_birth is required".into()))?;
        let sex = new.sex.ok_or_else(|| DiaryError::Validation("sex is required".into()))?;
        let today = self.clock.today();
        if date_of_birth > today {
            return Err(DiaryError::FutureDate { date: date_of_birth, today });
        }
        if let Some(d) = &new.doctor_id {
            self.doctor(d)?;
        }
        let profile = PatientProfile {
            id: PatientId::generate(),
            name,
            date_of_birth,
            sex,
            onset_category: OnsetCategory::Unassigned,
            doctor_id: new.doctor_id,
            verified: false,
            history_notes: new.history_notes,
            contact: new.contact,
        };
        let record = PatientRecord::new(profile.clone());
        self.repo.save_patient(&record)?;
        self.patients.write().unwrap().insert(profile.id.clone(), Arc::new(RwLock::new(record)));
        Ok(profile)
    }

    pub fn doctor(&self, id: &DoctorId) -> Result<DoctorProfile> {
        self.doctors.read().unwrap().get(id).cloned().ok_or_else(|| DiaryError::UnknownDoctor(id.clone()))
    }

    pub fn doctor_exists(&self, id: &DoctorId) -> bool {
        self.doctors.read().unwrap().contains_key(id)
    }

    pub fn patient_exists(&self, id: &PatientId) -> bool {
        self.patients.read().unwrap().contains_key(id)
    }

    pub fn patient_ids(&self) -> Vec<PatientId> {
        self.patients.read().unwrap().keys().cloned().collect()
    }

    // ---- access control ----

    fn shared(&self, id: &PatientId) -> Result<Shared<PatientRecord>> {
        self.patients.read().unwrap().get(id).cloned().ok_or_else(|| DiaryError::UnknownPatient(id.clone()))
    }

    fn authorize(actor: &Actor, profile: &PatientProfile, allow: Allow) -> Result<()> {
        match actor {
            Actor::System => Ok(()),
            Actor::Patient(id) if *id != profile.id => {
                Err(DiaryError::Forbidden("patients may only access their own records"))
            }
            Actor::Patient(_) => match allow {
                Allow::DoctorOnly => Err(DiaryError::Forbidden("only the treating doctor may do this")),
                _ => Ok(()),
            },
            Actor::Doctor(id) if profile.doctor_id.as_ref() != Some(id) => Err(DiaryError::NotLinked),
            Actor::Doctor(_) => match allow {
                Allow::PatientOnly => Err(DiaryError::Forbidden("only the patient may do this")),
                _ => Ok(()),
            },
        }
    }

    fn read<T>(&self, actor: &Actor, id: &PatientId, f: impl FnOnce(&PatientRecord) -> Result<T>) -> Result<T> {
        let shared = self.shared(id)?;
        let record = shared.read().unwrap();
        Self::authorize(actor, &record.profile, Allow::PatientOrDoctor)?;
        f(&record)
    }

    /// Applies `f` to a copy of the record, persists it, then publishes it.
    /// If `f` or the save fails the stored state is untouched.
    fn write<T>(
        &self,
        actor: &Actor,
        id: &PatientId,
        allow: Allow,
        f: impl FnOnce(&mut PatientRecord) -> Result<T>,
    ) -> Result<T> {
        let shared = self.shared(id)?;
        let mut guard = shared.write().unwrap();
        Self::authorize(actor, &guard.profile, allow)?;
        let mut next = guard.clone();
        let out = f(&mut next)?;
        if next != *guard {
            self.repo.save_patient(&next)?;
            *guard = next;
        }
        Ok(out)
    }

    fn not_future(&self, date: NaiveDate) -> Result<()> {
        let today = self.clock.today();
        if date > today {
            return Err(DiaryError::FutureDate { date, today });
        }
        Ok(())
    }

    // ---- patient writes ----

    pub fn record_entry(
        &self,
        actor: &Actor,
        patient: &PatientId,
        date: NaiveDate,
        grade: UrineProteinGrade,
        symptoms: &str,
    ) -> Result<RecordedEntry> {
        self.not_future(date)?;
        let now = self.clock.now();
        self.write(actor, patient, Allow::PatientOrDoctor, |record| {
            let relapse_before = assess::relapse_state(record);
            let entry = DiaryEntry {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                date,
                grade,
                symptoms: symptoms.trim().to_owned(),
                author_role: actor.role().unwrap_or(Role::Patient),
                created_at: now,
            };
            // a second entry for the same day replaces the first
            record.entries.insert(date, entry.clone());
            let history = record.grade_history();
            let events = insert_events(record, evaluate_entry_triggers(&entry, &history, &relapse_before));
            Ok(RecordedEntry {
                color: classify_urine_protein(grade),
                relapse: assess::relapse_state(record),
                entry,
                events,
            })
        })
    }

    pub fn record_measurement(&self, actor: &Actor, patient: &PatientId, new: NewMeasurement) -> Result<RecordedMeasurement> {
        validate_measurement(&new)?;
        self.not_future(new.date)?;
        let now = self.clock.now();
        let reference = self.reference.clone();
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            if new.date < record.profile.date_of_birth {
                return Err(DiaryError::Validation("measurement predates date of birth".into()));
            }
            let measurement = ClinicalMeasurement {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                date: new.date,
                systolic: new.systolic,
                diastolic: new.diastolic,
                height_cm: new.height_cm,
                weight_kg: new.weight_kg,
                comments: new.comments.trim().to_owned(),
                author_role: Role::Doctor,
                created_at: now,
            };
            record.measurements.push(measurement.clone());
            let assessment = assess::assess_all(record, &reference)
                .into_iter()
                .find(|(m, _)| m.id == measurement.id)
                .map(|(_, a)| a)
                .expect("measurement was just added");
            let events = insert_events(record, evaluate_measurement_triggers(&measurement, &assessment));
            Ok(RecordedMeasurement { measurement, assessment, events })
        })
    }

    pub fn add_prescription(
        &self,
        actor: &Actor,
        patient: &PatientId,
        new: NewPrescription,
    ) -> Result<(Prescription, Vec<NotificationEvent>)> {
        let Actor::Doctor(doctor) = actor else {
            return Err(DiaryError::Forbidden("only the treating doctor may prescribe"));
        };
        let now = self.clock.now();
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            let p = Prescription {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                medicine_name: new.medicine_name.trim().to_owned(),
                category: new.category,
                dose_amount: new.dose_amount,
                dose_unit: new.dose_unit.trim().to_owned(),
                frequency: new.frequency,
                start: new.start,
                end: new.end,
                prescribed_by: doctor.clone(),
                created_at: now,
            };
            validate_prescription(&p)?;
            record.prescriptions.push(p.clone());
            let events = insert_events(record, vec![notify::medicine_event(&p, &revision(&p), now)]);
            Ok((p, events))
        })
    }

    pub fn update_prescription(
        &self,
        actor: &Actor,
        patient: &PatientId,
        prescription: &RecordId,
        update: PrescriptionUpdate,
    ) -> Result<(Prescription, Vec<NotificationEvent>)> {
        let now = self.clock.now();
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            let p = record
                .prescriptions
                .iter_mut()
                .find(|p| &p.id == prescription)
                .ok_or_else(|| DiaryError::UnknownRecord(prescription.clone()))?;
            let mut next = p.clone();
            if let Some(v) = update.medicine_name {
                next.medicine_name = v.trim().to_owned();
            }
            if let Some(v) = update.dose_amount {
                next.dose_amount = v;
            }
            if let Some(v) = update.dose_unit {
                next.dose_unit = v.trim().to_owned();
            }
            if let Some(v) = update.frequency {
                next.frequency = v;
            }
            if let Some(v) = update.start {
                next.start = v;
            }
            if let Some(v) = update.end {
                next.end = v;
            }
            validate_prescription(&next)?;
            if next == *p {
                return Ok((next, Vec::new()));
            }
            *p = next.clone();
            let events = insert_events(record, vec![notify::medicine_event(&next, &revision(&next), now)]);
            Ok((next, events))
        })
    }

    pub fn record_dose(
        &self,
        actor: &Actor,
        patient: &PatientId,
        prescription: &RecordId,
        date: NaiveDate,
        taken: bool,
    ) -> Result<DoseEvent> {
        self.not_future(date)?;
        let now = self.clock.now();
        self.write(actor, patient, Allow::PatientOrDoctor, |record| {
            let p = record.prescription(prescription).ok_or_else(|| DiaryError::UnknownRecord(prescription.clone()))?;
            if !p.is_active_on(date) {
                return Err(DiaryError::Validation(format!("{date} is outside the prescription's validity")));
            }
            let event = DoseEvent {
                id: RecordId::generate(),
                prescription_id: prescription.clone(),
                date,
                taken,
                recorded_at: now,
            };
            record.doses.insert((prescription.clone(), date), event.clone());
            Ok(event)
        })
    }

    pub fn add_report(
        &self,
        actor: &Actor,
        patient: &PatientId,
        bytes: &[u8],
        media_type: &str,
        description: &str,
    ) -> Result<ReportUpload> {
        // check access before touching the blob store
        self.read(actor, patient, |_| Ok(()))?;
        let blob = self.blobs.put(bytes, media_type)?;
        let now = self.clock.now();
        self.write(actor, patient, Allow::PatientOrDoctor, |record| {
            let report = ReportUpload {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                timestamp: now,
                blob,
                description: description.trim().to_owned(),
                author_role: actor.role().unwrap_or(Role::Patient),
            };
            record.reports.push(report.clone());
            Ok(report)
        })
    }

    pub fn report_content(&self, actor: &Actor, patient: &PatientId, report: &RecordId) -> Result<(ReportUpload, Vec<u8>)> {
        let upload = self.read(actor, patient, |record| {
            record.reports.iter().find(|r| &r.id == report).cloned().ok_or_else(|| DiaryError::UnknownRecord(report.clone()))
        })?;
        let bytes = self.blobs.get(&upload.blob)?;
        Ok((upload, bytes))
    }

    /// Advice from the doctor or a complaint from the patient. Doctor advice
    /// also lands in the patient's feed.
    pub fn add_advice(
        &self,
        actor: &Actor,
        patient: &PatientId,
        text: &str,
        client_key: Option<&str>,
    ) -> Result<(AdviceMessage, Vec<NotificationEvent>)> {
        let text = non_empty("text", text)?;
        let now = self.clock.now();
        self.write(actor, patient, Allow::PatientOrDoctor, |record| {
            if let Some(key) = client_key {
                if let Some(existing) = record.advice.iter().find(|a| a.client_key.as_deref() == Some(key)) {
                    return Ok((existing.clone(), Vec::new()));
                }
            }
            let advice = AdviceMessage {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                timestamp: now,
                text,
                author_role: actor.role().unwrap_or(Role::Doctor),
                client_key: client_key.map(str::to_owned),
            };
            record.advice.push(advice.clone());
            let events = match advice.author_role {
                Role::Doctor => insert_events(record, vec![NotificationEvent::from(&advice)]),
                Role::Patient => Vec::new(),
            };
            Ok((advice, events))
        })
    }

    /// A doctor's direct message into the patient's feed. The same
    /// `client_key` always maps to the same event, so resubmits are no-ops.
    pub fn notify_patient(
        &self,
        actor: &Actor,
        patient: &PatientId,
        body: &str,
        client_key: Option<&str>,
    ) -> Result<(NotificationEvent, bool)> {
        let body = non_empty("body", body)?;
        let now = self.clock.now();
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            let source = match client_key {
                Some(key) => format!("notify:{key}"),
                None => format!("notify:{}", RecordId::generate()),
            };
            let event = notify::advice_event(patient, &source, &body, now);
            if let Some(existing) = record.notifications.iter().find(|n| n.idempotency_key == event.idempotency_key) {
                return Ok((existing.clone(), false));
            }
            record.notifications.push(event.clone());
            Ok((event, true))
        })
    }

    pub fn order_tests(
        &self,
        actor: &Actor,
        patient: &PatientId,
        tests: Vec<String>,
        comments: &str,
    ) -> Result<(TestOrder, Vec<NotificationEvent>)> {
        let tests: Vec<String> = tests.iter().map(|t| t.trim().to_owned()).filter(|t| !t.is_empty()).collect();
        if tests.is_empty() {
            return Err(DiaryError::Validation("at least one test is required".into()));
        }
        let now = self.clock.now();
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            let order = TestOrder {
                id: RecordId::generate(),
                patient_id: patient.clone(),
                timestamp: now,
                tests,
                comments: comments.trim().to_owned(),
            };
            record.tests.push(order.clone());
            let events = insert_events(record, vec![notify::test_order_event(&order)]);
            Ok((order, events))
        })
    }

    // ---- profile changes ----

    /// Moves the patient to `new_doctor`. All records stay with the patient,
    /// so the new doctor sees the full history and the previous doctor loses
    /// access. Moving to the current doctor changes nothing.
    pub fn transfer_patient(&self, actor: &Actor, patient: &PatientId, new_doctor: &DoctorId) -> Result<PatientProfile> {
        self.doctor(new_doctor)?;
        self.write(actor, patient, Allow::PatientOnly, |record| {
            if record.profile.doctor_id.as_ref() != Some(new_doctor) {
                record.profile.doctor_id = Some(new_doctor.clone());
                record.profile.verified = false;
            }
            Ok(record.profile.clone())
        })
    }

    pub fn verify_patient(&self, actor: &Actor, patient: &PatientId) -> Result<PatientProfile> {
        self.write(actor, patient, Allow::DoctorOnly, |record| {
            if record.profile.doctor_id.is_none() {
                return Err(DiaryError::NotLinked);
            }
            record.profile.verified = true;
            Ok(record.profile.clone())
        })
    }

    pub fn update_details(&self, actor: &Actor, patient: &PatientId, update: DetailsUpdate) -> Result<PatientProfile> {
        if update.onset_category.is_some() && matches!(actor, Actor::Patient(_)) {
            return Err(DiaryError::Forbidden("only the treating doctor may set the disease category"));
        }
        self.write(actor, patient, Allow::PatientOrDoctor, |record| {
            let profile = &mut record.profile;
            if let Some(name) = update.name {
                profile.name = non_empty("name", &name)?;
            }
            if let Some(contact) = update.contact {
                profile.contact = contact.trim().to_owned();
            }
            if let Some(notes) = update.history_notes {
                profile.history_notes = notes;
            }
            if let Some(category) = update.onset_category {
                profile.onset_category = category;
            }
            Ok(profile.clone())
        })
    }

    // ---- reads ----

    pub fn profile(&self, actor: &Actor, patient: &PatientId) -> Result<PatientProfile> {
        self.read(actor, patient, |r| Ok(r.profile.clone()))
    }

    /// Full copy of the stored aggregate.
    pub fn record(&self, actor: &Actor, patient: &PatientId) -> Result<PatientRecord> {
        self.read(actor, patient, |r| Ok(r.clone()))
    }

    pub fn counts(&self, actor: &Actor, patient: &PatientId) -> Result<RecordCounts> {
        self.read(actor, patient, |r| Ok(RecordCounts::of(r)))
    }

    pub fn entries(&self, actor: &Actor, patient: &PatientId) -> Result<Vec<DiaryEntry>> {
        self.read(actor, patient, |r| Ok(r.entries.values().cloned().collect()))
    }

    pub fn reports(&self, actor: &Actor, patient: &PatientId) -> Result<Vec<ReportUpload>> {
        self.read(actor, patient, |r| Ok(r.reports.clone()))
    }

    pub fn status(&self, actor: &Actor, patient: &PatientId) -> Result<PatientStatus> {
        self.read(actor, patient, |r| Ok(assess::patient_status(r, &self.reference)))
    }

    pub fn timeline(&self, actor: &Actor, patient: &PatientId, range: Option<DateRange>) -> Result<Vec<TimelineItem>> {
        self.read(actor, patient, |r| Ok(build_timeline(r, &self.reference, range, actor.role())))
    }

    pub fn export_csv(&self, actor: &Actor, patient: &PatientId) -> Result<String> {
        self.read(actor, patient, |r| Ok(export::export_csv(r)))
    }

    /// The patient's feed as seen by `actor`'s role, oldest first.
    pub fn notifications(&self, actor: &Actor, patient: &PatientId) -> Result<Vec<NotificationEvent>> {
        self.read(actor, patient, |r| {
            Ok(r.notifications
                .iter()
                .filter(|n| actor.role().is_none_or(|role| n.recipient_role.includes(role)))
                .cloned()
                .collect())
        })
    }

    pub fn adherence(&self, actor: &Actor, patient: &PatientId, range: DateRange) -> Result<AdherenceReport> {
        self.read(actor, patient, |r| {
            let mut prescriptions = Vec::new();
            for p in &r.prescriptions {
                let events: Vec<DoseRecord> = r
                    .doses
                    .values()
                    .filter(|d| d.prescription_id == p.id)
                    .map(|d| DoseRecord { date: d.date, taken: d.taken })
                    .collect();
                let window = adherence_rate(&p.schedule(), &events, range.start, range.end)?;
                prescriptions.push(PrescriptionAdherence {
                    prescription_id: p.id.clone(),
                    medicine_name: p.medicine_name.clone(),
                    window,
                });
            }
            let windows: Vec<_> = prescriptions.iter().map(|p| p.window).collect();
            let overall = AdherenceWindow::combine(&windows, range.start, range.end);
            Ok(AdherenceReport { overall, prescriptions })
        })
    }

    fn linked_records(&self, actor: &Actor, doctor: &DoctorId) -> Result<Vec<PatientRecord>> {
        match actor {
            Actor::Doctor(id) if id == doctor => {}
            Actor::System => {}
            _ => return Err(DiaryError::Forbidden("doctors may only list their own patients")),
        }
        self.doctor(doctor)?;
        let shared: Vec<_> = self.patients.read().unwrap().values().cloned().collect();
        Ok(shared
            .iter()
            .filter_map(|s| {
                let r = s.read().unwrap();
                (r.profile.doctor_id.as_ref() == Some(doctor)).then(|| r.clone())
            })
            .collect())
    }

    pub fn patients_of(&self, actor: &Actor, doctor: &DoctorId) -> Result<Vec<PatientSummary>> {
        let records = self.linked_records(actor, doctor)?;
        let statuses = nephro_rules::batch::map(&records, |r| assess::patient_status(r, &self.reference));
        let mut out: Vec<_> = records
            .into_iter()
            .zip(statuses)
            .map(|(r, status)| PatientSummary { profile: r.profile, status })
            .collect();
        out.sort_by(|a, b| a.profile.name.cmp(&b.profile.name).then_with(|| a.profile.id.cmp(&b.profile.id)));
        Ok(out)
    }

    pub fn overview(&self, actor: &Actor, doctor: &DoctorId) -> Result<Overview> {
        let records = self.linked_records(actor, doctor)?;
        Ok(assess::overview(&records, &self.reference))
    }

    /// Doctor-facing events across all linked patients, oldest first.
    pub fn doctor_notifications(&self, actor: &Actor, doctor: &DoctorId) -> Result<Vec<NotificationEvent>> {
        let mut events: Vec<NotificationEvent> = self
            .linked_records(actor, doctor)?
            .into_iter()
            .flat_map(|r| r.notifications)
            .filter(|n| n.recipient_role.includes(Role::Doctor))
            .collect();
        events.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        Ok(events)
    }

    /// Referential-integrity check over the whole store. Returns one line per
    /// dangling reference; empty means consistent.
    pub fn audit(&self) -> Vec<String> {
        let doctors = self.doctors.read().unwrap();
        let shared: Vec<_> = self.patients.read().unwrap().values().cloned().collect();
        let mut problems = Vec::new();
        for s in shared {
            let r = s.read().unwrap();
            let pid = &r.profile.id;
            if let Some(d) = &r.profile.doctor_id {
                if !doctors.contains_key(d) {
                    problems.push(format!("patient {pid}: unknown doctor {d}"));
                }
            }
            if r.profile.verified && r.profile.doctor_id.is_none() {
                problems.push(format!("patient {pid}: verified without a doctor"));
            }
            let mut owners: Vec<(&str, &RecordId, &PatientId)> = Vec::new();
            owners.extend(r.entries.values().map(|x| ("entry", &x.id, &x.patient_id)));
            owners.extend(r.measurements.iter().map(|x| ("measurement", &x.id, &x.patient_id)));
            owners.extend(r.prescriptions.iter().map(|x| ("prescription", &x.id, &x.patient_id)));
            owners.extend(r.reports.iter().map(|x| ("report", &x.id, &x.patient_id)));
            owners.extend(r.advice.iter().map(|x| ("advice", &x.id, &x.patient_id)));
            owners.extend(r.tests.iter().map(|x| ("test order", &x.id, &x.patient_id)));
            owners.extend(r.notifications.iter().map(|x| ("notification", &x.id, &x.patient_id)));
            for (kind, id, owner) in owners {
                if owner != pid {
                    problems.push(format!("patient {pid}: {kind} {id} belongs to {owner}"));
                }
            }
            for (date, e) in &r.entries {
                if *date != e.date {
                    problems.push(format!("patient {pid}: entry {} filed under {date}", e.id));
                }
            }
            for p in &r.prescriptions {
                if !doctors.contains_key(&p.prescribed_by) {
                    problems.push(format!("prescription {}: unknown doctor {}", p.id, p.prescribed_by));
                }
            }
            for ((rx, date), d) in &r.doses {
                if r.prescription(rx).is_none() {
                    problems.push(format!("dose {}: unknown prescription {rx}", d.id));
                }
                if (rx, date) != (&d.prescription_id, &d.date) {
                    problems.push(format!("dose {}: filed under the wrong key", d.id));
                }
            }
            for x in &r.reports {
                if !self.blobs.contains(&x.blob) {
                    problems.push(format!("report {}: missing blob {}", x.id, x.blob.sha256));
                }
            }
            let mut keys = std::collections::HashSet::new();
            for n in &r.notifications {
                if !keys.insert(&n.idempotency_key) {
                    problems.push(format!("notification {}: duplicate idempotency key", n.id));
                }
            }
        }
        problems
    }
}

impl Feed for Diary {
    fn insert(&self, event: &NotificationEvent) -> Result<bool> {
        self.write(&Actor::System, &event.patient_id, Allow::PatientOrDoctor, |record| {
            Ok(!insert_events(record, vec![event.clone()]).is_empty())
        })
    }
}

/// Appends events whose key is not yet in the feed; returns the ones added.
fn insert_events(record: &mut PatientRecord, events: Vec<NotificationEvent>) -> Vec<NotificationEvent> {
    let mut added = Vec::new();
    for event in events {
        if record.notifications.iter().any(|n| n.idempotency_key == event.idempotency_key) {
            continue;
        }
        record.notifications.push(event.clone());
        added.push(event);
    }
    added
}

/// Content hash of a prescription, so an identical resubmitted update maps to
/// the same notification key.
fn revision(p: &Prescription) -> String {
    let json = serde_json::to_vec(p).expect("prescription serializes");
    hex::encode(&Sha256::digest(&json)[..8])
}

fn non_empty(field: &str, value: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(DiaryError::Validation(format!("{field} must not be empty")));
    }
    Ok(v.to_owned())
}

fn validate_measurement(m: &NewMeasurement) -> Result<()> {
    let bad = |msg: &str| Err(DiaryError::Validation(msg.to_owned()));
    match (m.systolic, m.diastolic) {
        (Some(s), Some(d)) => {
            if !(d > 0 && s > d && s <= 300) {
                return bad("blood pressure must satisfy 300 >= systolic > diastolic > 0");
            }
        }
        (None, None) => {}
        _ => return bad("systolic and diastolic must be given together"),
    }
    if let Some(h) = m.height_cm {
        if !(h.is_finite() && h > 0.0 && h < 300.0) {
            return bad("height_cm must be between 0 and 300");
        }
    }
    if let Some(w) = m.weight_kg {
        if !(w.is_finite() && w > 0.0 && w < 500.0) {
            return bad("weight_kg must be between 0 and 500");
        }
    }
    if m.systolic.is_none() && m.height_cm.is_none() && m.weight_kg.is_none() {
        return bad("a measurement needs blood pressure, height or weight");
    }
    Ok(())
}

fn validate_prescription(p: &Prescription) -> Result<()> {
    let bad = |msg: &str| Err(DiaryError::Validation(msg.to_owned()));
    if p.medicine_name.is_empty() {
        return bad("medicine_name must not be empty");
    }
    if !(p.dose_amount.is_finite() && p.dose_amount > 0.0) {
        return bad("dose_amount must be positive");
    }
    if p.frequency == 0 {
        return bad("frequency must be at least 1 dose per day");
    }
    if p.end.is_some_and(|end| end < p.start) {
        return bad("end must not precede start");
    }
    Ok(())
}
