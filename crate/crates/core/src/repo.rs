//! Persistence behind the diary. Each patient aggregate and each doctor
//! profile is written as a whole; a write either lands completely or not at
//! all.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::model::{DoctorProfile, PatientRecord};
use crate::{DiaryError, DoctorId, PatientId, Result};

#[derive(Debug, Default, Clone)]
pub struct Snapshot {
    pub patients: Vec<PatientRecord>,
    pub doctors: Vec<DoctorProfile>,
}

pub trait Repository: Send + Sync {
    fn load(&self) -> Result<Snapshot>;
    fn save_patient(&self, record: &PatientRecord) -> Result<()>;
    fn save_doctor(&self, doctor: &DoctorProfile) -> Result<()>;
}

/// Keeps aggregates in memory only. Reopening a diary over the same
/// repository sees earlier writes.
#[derive(Debug, Default)]
pub struct MemoryRepository {
    patients: Mutex<BTreeMap<PatientId, PatientRecord>>,
    doctors: Mutex<BTreeMap<DoctorId, DoctorProfile>>,
}

impl MemoryRepository {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Repository for MemoryRepository {
    fn load(&self) -> Result<Snapshot> {
        Ok(Snapshot {
            patients: self.patients.lock().unwrap().values().cloned().collect(),
            doctors: self.doctors.lock().unwrap().values().cloned().collect(),
        })
    }

    fn save_patient(&self, record: &PatientRecord) -> Result<()> {
        self.patients.lock().unwrap().insert(record.profile.id.clone(), record.clone());
        Ok(())
    }

    fn save_doctor(&self, doctor: &DoctorProfile) -> Result<()> {
        self.doctors.lock().unwrap().insert(doctor.id.clone(), doctor.clone());
        Ok(())
    }
}

/// One JSON document per aggregate under `<root>/patients/` and
/// `<root>/doctors/`, replaced by write-to-temp-then-rename.
#[derive(Debug, Clone)]
pub struct FileRepository {
    root: PathBuf,
}

impl FileRepository {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["patients", "doctors"] {
            fs::create_dir_all(root.join(sub)).map_err(DiaryError::storage)?;
        }
        Ok(FileRepository { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Repository for FileRepository {
    fn load(&self) -> Result<Snapshot> {
        Ok(Snapshot {
            patients: read_dir_json(&self.root.join("patients"))?,
            doctors: read_dir_json(&self.root.join("doctors"))?,
        })
    }

    fn save_patient(&self, record: &PatientRecord) -> Result<()> {
        let path = self.root.join("patients").join(format!("{}.json", record.profile.id));
        write_json_atomic(&path, record)
    }

    fn save_doctor(&self, doctor: &DoctorProfile) -> Result<()> {
        let path = self.root.join("doctors").join(format!("{}.json", doctor.id));
        write_json_atomic(&path, doctor)
    }
}

fn read_dir_json<T: DeserializeOwned>(dir: &Path) -> Result<Vec<T>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(DiaryError::storage)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_json(p)).collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| DiaryError::Storage(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| DiaryError::Storage(format!("{}: {e}", path.display())))
}

/// Serializes `value` next to `path` and renames it into place.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let dir = path.parent().ok_or_else(|| DiaryError::Storage(format!("{} has no parent", path.display())))?;
    fs::create_dir_all(dir).map_err(DiaryError::storage)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(DiaryError::storage)?;
    serde_json::to_writer_pretty(&mut tmp, value).map_err(DiaryError::storage)?;
    tmp.write_all(b"\n").map_err(DiaryError::storage)?;
    tmp.as_file().sync_all().map_err(DiaryError::storage)?;
    tmp.persist(path).map_err(DiaryError::storage)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doctor_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let repo = FileRepository::open(dir.path()).unwrap();
        let doctor = DoctorProfile {
            id: DoctorId::generate(),
            name: "Dr. R".into(),
            center: "Nephrology OPD".into(),
            contact: "+91 11 0000".into(),
        };
        repo.save_doctor(&doctor).unwrap();
        repo.save_doctor(&doctor).unwrap();
        let snap = FileRepository::open(dir.path()).unwrap().load().unwrap();
        assert_eq!(snap.doctors, vec![doctor]);
        assert!(snap.patients.is_empty());
        // no temp files left behind
        let names: Vec<_> = fs::read_dir(dir.path().join("doctors")).unwrap().collect();
        assert_eq!(names.len(), 1);
    }
}
