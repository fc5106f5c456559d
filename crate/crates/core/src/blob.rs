use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{DiaryError, Result};

/// Reference to an uploaded file stored under its content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub sha256: String,
    pub media_type: String,
    pub size: usize,
}

/// Content-addressed file store laid out as `<root>/<first 2 hex>/<hash>`.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
    max_bytes: usize,
}

pub const DEFAULT_MAX_IMAGE_BYTES: usize = 10 * 1024 * 1024;

const IMAGE_TYPES: [&str; 5] = ["image/jpeg", "image/png", "image/webp", "image/gif", "application/pdf"];

impl BlobStore {
    pub fn new(root: impl Into<PathBuf>, max_bytes: usize) -> Self {
        BlobStore { root: root.into(), max_bytes }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn max_bytes(&self) -> usize {
        self.max_bytes
    }

    fn path_for(&self, sha256: &str) -> PathBuf {
        self.root.join(&sha256[..2]).join(sha256)
    }

    pub fn put(&self, bytes: &[u8], media_type: &str) -> Result<BlobRef> {
        if bytes.len() > self.max_bytes {
            return Err(DiaryError::ImageTooLarge { size: bytes.len(), cap: self.max_bytes });
        }
        if bytes.is_empty() {
            return Err(DiaryError::Validation("empty upload".into()));
        }
        if !IMAGE_TYPES.contains(&media_type) {
            return Err(DiaryError::Validation(format!("unsupported media type {media_type:?}")));
        }
        let sha256 = hex::encode(Sha256::digest(bytes));
        let path = self.path_for(&sha256);
        if !path.exists() {
            let dir = path.parent().expect("blob path has a parent");
            fs::create_dir_all(dir).map_err(DiaryError::storage)?;
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(DiaryError::storage)?;
            tmp.write_all(bytes).map_err(DiaryError::storage)?;
            tmp.persist(&path).map_err(DiaryError::storage)?;
        }
        Ok(BlobRef { sha256, media_type: media_type.to_owned(), size: bytes.len() })
    }

    pub fn get(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        fs::read(self.path_for(&blob.sha256)).map_err(DiaryError::storage)
    }

    pub fn contains(&self, blob: &BlobRef) -> bool {
        self.path_for(&blob.sha256).is_file()
    }
}
