//! Session persistence.
//!
//! [`FileStore`] keeps every artifact once under `objects/<sha256>` and one
//! manifest per session under `sessions/<session_id>.json`.

use std::collections::HashMap;
use std::fs;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use thiserror::Error;

use crate::record::{sha256_hex, ArtifactError, Manifest, SessionRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("session {0} already has an LLM response")]
    Immutable(String),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("object {0} does not match its hash")]
    Corrupt(String),
    #[error("storage i/o: {0}")]
    Io(#[from] io::Error),
    #[error("manifest is unreadable: {0}")]
    Manifest(#[from] serde_json::Error),
}

impl StoreError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::NotFound(_) => "NotFound",
            Self::Immutable(_) => "Immutable",
            Self::Artifact(_) => "MissingArtifact",
            Self::Corrupt(_) => "CorruptObject",
            Self::Io(_) => "Io",
            Self::Manifest(_) => "CorruptManifest",
        }
    }
}

pub trait RecordStore: Send + Sync {
    /// Stores a record. Storing an identical session again keeps the
    /// original and returns it.
    fn put(&self, record: &SessionRecord) -> Result<SessionRecord, StoreError>;

    fn get(&self, session_id: &str) -> Result<SessionRecord, StoreError>;

    /// The one permitted mutation after analysis.
    fn attach_llm_response(&self, session_id: &str, text: &str) -> Result<SessionRecord, StoreError> {
        let mut record = self.get(session_id)?;
        if record.llm_response.is_some() {
            return Err(StoreError::Immutable(session_id.into()));
        }
        record.llm_response = Some(text.into());
        self.replace(&record)?;
        Ok(record)
    }

    /// Overwrites a stored record unconditionally.
    fn replace(&self, record: &SessionRecord) -> Result<(), StoreError>;
}

#[derive(Default)]
pub struct MemoryStore {
    records: RwLock<HashMap<String, SessionRecord>>,
}

impl RecordStore for MemoryStore {
    fn put(&self, record: &SessionRecord) -> Result<SessionRecord, StoreError> {
        let mut map = self.records.write().expect("store lock");
        Ok(map
            .entry(record.session_id.clone())
            .or_insert_with(|| record.clone())
            .clone())
    }

    fn get(&self, session_id: &str) -> Result<SessionRecord, StoreError> {
        let map = self.records.read().expect("store lock");
        map.get(session_id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(session_id.into()))
    }

    fn replace(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let mut map = self.records.write().expect("store lock");
        map.insert(record.session_id.clone(), record.clone());
        Ok(())
    }
}

pub struct FileStore {
    root: PathBuf,
    /// Serializes writers; readers only touch files renamed into place.
    write_lock: std::sync::Mutex<()>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Writes through a temporary file so readers never see partial content.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl FileStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self {
            root,
            write_lock: std::sync::Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn object_path(&self, hash: &str) -> PathBuf {
        self.root.join("objects").join(hash)
    }

    fn manifest_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn put_object(&self, bytes: &[u8]) -> Result<String, StoreError> {
        let hash = sha256_hex(bytes);
        let path = self.object_path(&hash);
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(hash)
    }

    fn get_object(&self, hash: &str) -> Result<Vec<u8>, StoreError> {
        let bytes = fs::read(self.object_path(hash))?;
        if sha256_hex(&bytes) != hash {
            return Err(StoreError::Corrupt(hash.into()));
        }
        Ok(bytes)
    }

    fn write(&self, record: &SessionRecord) -> Result<(), StoreError> {
        for (_, bytes) in record.artifacts() {
            self.put_object(&bytes)?;
        }
        write_atomic(&self.manifest_path(&record.session_id), &record.manifest_json())?;
        Ok(())
    }
}

impl RecordStore for FileStore {
    fn put(&self, record: &SessionRecord) -> Result<SessionRecord, StoreError> {
        let _guard = self.write_lock.lock().expect("store lock");
        match self.get(&record.session_id) {
            Ok(existing) => Ok(existing),
            Err(StoreError::NotFound(_)) => {
                self.write(record)?;
                Ok(record.clone())
            }
            Err(e) => Err(e),
        }
    }

    fn get(&self, session_id: &str) -> Result<SessionRecord, StoreError> {
        if !valid_id(session_id) {
            return Err(StoreError::NotFound(session_id.into()));
        }
        let raw = match fs::read(self.manifest_path(session_id)) {
            Ok(raw) => raw,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(StoreError::NotFound(session_id.into())),
            Err(e) => return Err(e.into()),
        };
        let manifest: Manifest = serde_json::from_slice(&raw)?;
        let hashes = manifest.artifacts.clone();
        let mut failure = None;
        let record =
            SessionRecord::from_artifacts(manifest, |name| match hashes.get(name).map(|h| self.get_object(h)) {
                Some(Ok(bytes)) => Some(bytes),
                Some(Err(e)) => {
                    failure.get_or_insert(e);
                    None
                }
                None => None,
            });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(record?)
    }

    fn replace(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let _guard = self.write_lock.lock().expect("store lock");
        self.write(record)
    }
}

/// Writes a record as plain named files plus `manifest.json`.
pub fn write_record_dir(record: &SessionRecord, dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in record.artifacts() {
        fs::write(dir.join(name), bytes)?;
    }
    fs::write(dir.join("manifest.json"), record.manifest_json())?;
    Ok(())
}

pub fn read_record_dir(dir: &Path) -> Result<SessionRecord, StoreError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    Ok(SessionRecord::from_artifacts(manifest, |name| {
        fs::read(dir.join(name)).ok()
    })?)
}
