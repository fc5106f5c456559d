#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use nephro_core::model::MedicineCategory;
use nephro_core::{
    Actor, BlobStore, ClinicalReference, Diary, DoctorId, FileRepository, ManualClock, MemoryRepository, NewDoctor,
    NewMeasurement, NewPatient, NewPrescription, PatientId, Repository,
};
use nephro_rules::{Sex, UrineProteinGrade};
use tempfile::TempDir;

pub struct Fixture {
    pub diary: Arc<Diary>,
    pub clock: Arc<ManualClock>,
    pub dir: TempDir,
}

pub fn at(y: i32, m: u32, d: u32, hh: u32, mm: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, hh, mm, 0).unwrap()
}

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn build(repo: Arc<dyn Repository>, clock: Arc<ManualClock>, dir: TempDir) -> Fixture {
    let reference = Arc::new(ClinicalReference::bundled().unwrap());
    let blobs = BlobStore::new(dir.path().join("blobs"), 1024 * 1024);
    let diary = Arc::new(Diary::open(repo, clock.clone(), reference, blobs).unwrap());
    Fixture { diary, clock, dir }
}

pub fn memory(now: DateTime<Utc>) -> Fixture {
    build(Arc::new(MemoryRepository::new()), Arc::new(ManualClock::new(now)), tempfile::tempdir().unwrap())
}

pub fn on_disk(now: DateTime<Utc>) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let repo = Arc::new(FileRepository::open(dir.path().join("store")).unwrap());
    build(repo, Arc::new(ManualClock::new(now)), dir)
}

impl Fixture {
    /// Reopens the same on-disk store, as a restarted process would.
    pub fn reopen(&self) -> Arc<Diary> {
        let repo = Arc::new(FileRepository::open(self.dir.path().join("store")).unwrap());
        let reference = Arc::new(ClinicalReference::bundled().unwrap());
        let blobs = BlobStore::new(self.dir.path().join("blobs"), 1024 * 1024);
        Arc::new(Diary::open(repo, self.clock.clone(), reference, blobs).unwrap())
    }

    pub fn doctor(&self, name: &str) -> DoctorId {
        self.diary
            .create_doctor(NewDoctor { name: name.into(), center: "Paediatric Nephrology OPD".into(), contact: "+91 11 2658 8500".into() })
            .unwrap()
            .id
    }

    pub fn patient(&self, name: &str, dob: NaiveDate, sex: Sex, doctor: Option<&DoctorId>) -> PatientId {
        self.diary
            .create_patient(NewPatient {
                name: name.into(),
                date_of_birth: Some(dob),
                sex: Some(sex),
                doctor_id: doctor.cloned(),
                ..Default::default()
            })
            .unwrap()
            .id
    }
}

/// The reviewed three-day diary behind `fixtures/three_day_export.csv`.
/// The API tests rebuild the same state over HTTP.
pub fn three_day_fixture(fx: &Fixture) -> (PatientId, DoctorId) {
    use UrineProteinGrade::*;
    let d = &fx.diary;
    fx.clock.set(at(2024, 3, 1, 7, 0));
    let doctor = fx.doctor("Dr. Arvind Bagga");
    let patient = fx.patient("Riya", date(2017, 6, 15), Sex::F, Some(&doctor));
    let me = Actor::Patient(patient.clone());
    let doc = Actor::Doctor(doctor.clone());

    // day 1
    fx.clock.set(at(2024, 3, 1, 8, 0));
    d.record_entry(&me, &patient, date(2024, 3, 1), OnePlus, "puffy eyes, mild").unwrap();
    fx.clock.set(at(2024, 3, 1, 10, 0));
    d.record_measurement(
        &doc,
        &patient,
        NewMeasurement {
            date: date(2024, 3, 1),
            systolic: Some(104),
            diastolic: Some(66),
            height_cm: Some(118.4),
            weight_kg: Some(22.35),
            comments: "Started \"prednisolone\"".into(),
        },
    )
    .unwrap();
    fx.clock.set(at(2024, 3, 1, 10, 5));
    let (pred, _) = d
        .add_prescription(
            &doc,
            &patient,
            NewPrescription {
                medicine_name: "Prednisolone".into(),
                category: MedicineCategory::Steroid,
                dose_amount: 20.0,
                dose_unit: "mg".into(),
                frequency: 2,
                start: date(2024, 3, 1),
                end: Some(date(2024, 3, 3)),
            },
        )
        .unwrap();
    fx.clock.set(at(2024, 3, 1, 10, 6));
    let (enal, _) = d
        .add_prescription(
            &doc,
            &patient,
            NewPrescription {
                medicine_name: "Enalapril".into(),
                category: MedicineCategory::Other,
                dose_amount: 2.5,
                dose_unit: "mg".into(),
                frequency: 1,
                start: date(2024, 3, 1),
                end: None,
            },
        )
        .unwrap();
    fx.clock.set(at(2024, 3, 1, 20, 0));
    d.record_dose(&me, &patient, &pred.id, date(2024, 3, 1), true).unwrap();
    d.record_dose(&me, &patient, &enal.id, date(2024, 3, 1), true).unwrap();

    // day 2
    fx.clock.set(at(2024, 3, 2, 8, 0));
    d.record_entry(&me, &patient, date(2024, 3, 2), ThreePlus, "swelling\nlegs").unwrap();
    fx.clock.set(at(2024, 3, 2, 11, 0));
    d.add_advice(&doc, &patient, "Reduce salt, check urine daily", None).unwrap();
    fx.clock.set(at(2024, 3, 2, 12, 0));
    d.add_advice(&me, &patient, "Feels tired", None).unwrap();
    fx.clock.set(at(2024, 3, 2, 20, 0));
    d.record_dose(&me, &patient, &pred.id, date(2024, 3, 2), true).unwrap();
    d.record_dose(&me, &patient, &enal.id, date(2024, 3, 2), false).unwrap();

    // day 3
    fx.clock.set(at(2024, 3, 3, 8, 0));
    d.record_entry(&me, &patient, date(2024, 3, 3), Trace, "").unwrap();
    fx.clock.set(at(2024, 3, 3, 9, 0));
    d.record_measurement(&doc, &patient, NewMeasurement { date: date(2024, 3, 3), height_cm: Some(118.5), ..Default::default() })
        .unwrap();
    fx.clock.set(at(2024, 3, 3, 9, 30));
    d.record_measurement(
        &doc,
        &patient,
        NewMeasurement {
            date: date(2024, 3, 3),
            systolic: Some(142),
            diastolic: Some(94),
            weight_kg: Some(22.0),
            ..Default::default()
        },
    )
    .unwrap();
    fx.clock.set(at(2024, 3, 3, 9, 45));
    d.order_tests(&doc, &patient, vec!["Serum albumin".into(), "Urine PCR".into()], "fasting").unwrap();
    fx.clock.set(at(2024, 3, 3, 20, 0));
    d.record_dose(&me, &patient, &pred.id, date(2024, 3, 3), false).unwrap();

    (patient, doctor)
}

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
