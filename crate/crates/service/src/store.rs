//! Persistence for sessions, generation jobs and the gallery.
//!
//! The reference store keeps everything in one JSON document. [`JsonStore::open`]
//! rewrites the file atomically after every change; [`JsonStore::in_memory`]
//! keeps the document in memory only.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use evoscape_core::engine::StepRequest;
use evoscape_core::{AttributeMap, ImageRef, IndividualId, Session, SessionId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("store document is corrupt: {0}")]
    Corrupt(String),
    #[error("refusing to rewrite stored history of session {0}")]
    HistoryRewrite(SessionId),
    #[error("job {job} cannot move from {from:?} to {to:?}")]
    PhaseRegression { job: String, from: JobPhase, to: JobPhase },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JobPhase {
    GeneratingAttributes,
    GeneratingImages,
    Done,
    Failed,
}

impl JobPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobPhase::Done | JobPhase::Failed)
    }
}

/// What a job produces, kept so an interrupted job can be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobKind {
    Initialize,
    Step { request: StepRequest },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub job_id: String,
    pub session_id: SessionId,
    #[serde(flatten)]
    pub kind: JobKind,
    pub phase: JobPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl GenerationJob {
    pub fn new(job_id: String, session_id: SessionId, kind: JobKind) -> Self {
        let now = Utc::now();
        GenerationJob {
            job_id,
            session_id,
            kind,
            phase: JobPhase::GeneratingAttributes,
            error: None,
            created_at: now,
            updated_at: now,
        }
    }

    /// Moves the job forward. Phases never go back and terminal phases are final.
    pub fn advance(&mut self, phase: JobPhase) -> Result<(), StoreError> {
        if self.phase.is_terminal() || phase < self.phase {
            return Err(StoreError::PhaseRegression { job: self.job_id.clone(), from: self.phase, to: phase });
        }
        self.phase = phase;
        self.updated_at = Utc::now();
        Ok(())
    }

    pub fn fail(&mut self, message: impl Into<String>) -> Result<(), StoreError> {
        self.advance(JobPhase::Failed)?;
        self.error = Some(message.into());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub image: ImageRef,
    pub initial_prompt: String,
    pub attributes: AttributeMap,
    pub created_at: DateTime<Utc>,
    pub session_id: SessionId,
    pub individual_id: IndividualId,
}

pub trait Store: Send + Sync {
    fn session(&self, id: &SessionId) -> Result<Option<Session>, StoreError>;
    /// Inserts or replaces a session. Generations already stored may gain
    /// ratings but are never dropped or replaced.
    fn put_session(&self, session: &Session) -> Result<(), StoreError>;
    fn job(&self, id: &str) -> Result<Option<GenerationJob>, StoreError>;
    fn put_job(&self, job: &GenerationJob) -> Result<(), StoreError>;
    fn jobs(&self) -> Result<Vec<GenerationJob>, StoreError>;
    /// Appends entries; later entries count as newer.
    fn publish(&self, entries: Vec<GalleryEntry>) -> Result<(), StoreError>;
    /// Newest first. Returns the page and the total number of entries.
    fn gallery(&self, offset: usize, limit: usize) -> Result<(Vec<GalleryEntry>, usize), StoreError>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Document {
    #[serde(default)]
    sessions: BTreeMap<String, Session>,
    #[serde(default)]
    jobs: BTreeMap<String, GenerationJob>,
    /// Oldest first.
    #[serde(default)]
    gallery: Vec<GalleryEntry>,
}

pub struct JsonStore {
    path: Option<PathBuf>,
    doc: Mutex<Document>,
}

impl JsonStore {
    pub fn in_memory() -> Self {
        JsonStore { path: None, doc: Mutex::new(Document::default()) }
    }

    /// Opens the document at `path`, creating an empty one if it does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let doc = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Corrupt(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Document::default(),
            Err(e) => return Err(e.into()),
        };
        for session in doc.sessions.values() {
            session.validate().map_err(|e| StoreError::Corrupt(format!("session {}: {e}", session.id)))?;
        }
        let store = JsonStore { path: Some(path), doc: Mutex::new(doc) };
        store.flush(&store.doc.lock().unwrap())?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn flush(&self, doc: &Document) -> Result<(), StoreError> {
        let Some(path) = &self.path else { return Ok(()) };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, doc).map_err(std::io::Error::other)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    /// Applies `change` and persists; on a persistence failure the in-memory
    /// document is rolled back.
    fn update<T>(&self, change: impl FnOnce(&mut Document) -> Result<T, StoreError>) -> Result<T, StoreError> {
        let mut doc = self.doc.lock().unwrap();
        let before = self.path.is_some().then(|| doc.clone());
        let out = change(&mut doc)?;
        if let Err(e) = self.flush(&doc) {
            if let Some(before) = before {
                *doc = before;
            }
            return Err(e);
        }
        Ok(out)
    }
}

fn extends(old: &Session, new: &Session) -> bool {
    new.generations.len() >= old.generations.len()
        && old.generations.iter().zip(&new.generations).all(|(a, b)| {
            a.index == b.index
                && a.members.len() == b.members.len()
                && a.members.iter().zip(&b.members).all(|(x, y)| x.id == y.id && x.attributes == y.attributes)
        })
}

impl Store for JsonStore {
    fn session(&self, id: &SessionId) -> Result<Option<Session>, StoreError> {
        Ok(self.doc.lock().unwrap().sessions.get(id.as_str()).cloned())
    }

    fn put_session(&self, session: &Session) -> Result<(), StoreError> {
        self.update(|doc| {
            if let Some(old) = doc.sessions.get(session.id.as_str()) {
                if !extends(old, session) {
                    return Err(StoreError::HistoryRewrite(session.id.clone()));
                }
            }
            doc.sessions.insert(session.id.as_str().to_string(), session.clone());
            Ok(())
        })
    }

    fn job(&self, id: &str) -> Result<Option<GenerationJob>, StoreError> {
        Ok(self.doc.lock().unwrap().jobs.get(id).cloned())
    }

    fn put_job(&self, job: &GenerationJob) -> Result<(), StoreError> {
        self.update(|doc| {
            if let Some(old) = doc.jobs.get(&job.job_id) {
                if old.phase.is_terminal() && old.phase != job.phase || job.phase < old.phase {
                    return Err(StoreError::PhaseRegression { job: job.job_id.clone(), from: old.phase, to: job.phase });
                }
            }
            doc.jobs.insert(job.job_id.clone(), job.clone());
            Ok(())
        })
    }

    fn jobs(&self) -> Result<Vec<GenerationJob>, StoreError> {
        Ok(self.doc.lock().unwrap().jobs.values().cloned().collect())
    }

    fn publish(&self, entries: Vec<GalleryEntry>) -> Result<(), StoreError> {
        if entries.is_empty() {
            return Ok(());
        }
        self.update(|doc| {
            doc.gallery.extend(entries);
            Ok(())
        })
    }

    fn gallery(&self, offset: usize, limit: usize) -> Result<(Vec<GalleryEntry>, usize), StoreError> {
        let doc = self.doc.lock().unwrap();
        let page = doc.gallery.iter().rev().skip(offset).take(limit).cloned().collect();
        Ok((page, doc.gallery.len()))
    }
}
