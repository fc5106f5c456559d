//! Patient diary store and alert pipeline.
//!
//! [`Diary`] owns patients, doctors and every per-patient record (dipstick
//! entries, clinical measurements, prescriptions, dose ticks, reports,
//! advice, test orders and the notification feed). Records live in one
//! aggregate per patient; each write replaces the aggregate atomically
//! through a [`Repository`].
//!
//! The [`notify`] module turns new records into [`NotificationEvent`]s and
//! fans them out to the in-app feed and to external sinks.

pub mod assess;
mod blob;
pub mod clock;
mod diary;
mod error;
pub mod export;
mod ids;
pub mod model;
pub mod notify;
pub mod repo;
pub mod timeline;

pub use assess::{CategoryCounts, ClinicalReference, MeasurementAssessment, Overview, PatientStatus};
pub use blob::{BlobRef, BlobStore, DEFAULT_MAX_IMAGE_BYTES};
pub use clock::{Clock, ManualClock, SystemClock};
pub use diary::{
    AdherenceReport, DetailsUpdate, Diary, NewDoctor, NewMeasurement, NewPatient, NewPrescription, PatientSummary,
    PrescriptionAdherence, PrescriptionUpdate, RecordCounts, RecordedEntry, RecordedMeasurement,
};
pub use error::{DiaryError, Result};
pub use ids::{DoctorId, PatientId, RecordId};
pub use model::Actor;
pub use notify::NotificationEvent;
pub use repo::{FileRepository, MemoryRepository, Repository};
pub use timeline::{DateRange, TimelineItem};
