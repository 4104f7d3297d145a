//! Session registry with optional on-disk persistence.
//!
//! A persisted session lives in `<data-dir>/<session-id>/`:
//!
//! ```text
//! schema.json  instance.json  corpus.json   canonical input files
//! session.json                              {"session_id", "tau"}
//! oplog.jsonl                               one LogEntry per committed mutation
//! ```
//!
//! Reopening re-runs the matcher on the inputs and replays the log, checking
//! every entry's revision and graph hash.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use ege_core::editor::EditOp;
use ege_core::formats::{serialize_corpus, serialize_instance, serialize_schema};
use ege_core::{Code, Diagnostic, Diagnostics};
use serde::{Deserialize, Serialize};

use crate::session::{RevisionInfo, Session, SessionSummary, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Edits,
    Undo,
    Redo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<EditOp>,
    pub revision: u64,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionMeta {
    session_id: String,
    tau: f64,
}

const SCHEMA: &str = "schema.json";
const INSTANCE: &str = "instance.json";
const CORPUS: &str = "corpus.json";
const META: &str = "session.json";
const OPLOG: &str = "oplog.jsonl";

fn io_error(path: &Path, e: impl std::fmt::Display) -> Diagnostics {
    Diagnostics::single(Diagnostic::error(
        Code::Io,
        path.display().to_string(),
        e.to_string(),
    ))
}

fn read(path: &Path) -> Result<Vec<u8>, Diagnostics> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Diagnostics> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn append(path: &Path, entry: &LogEntry) -> Result<(), Diagnostics> {
    let mut line = serde_json::to_vec(entry).map_err(|e| io_error(path, e))?;
    line.push(b'\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    f.write_all(&line)
        .and_then(|_| f.sync_data())
        .map_err(|e| io_error(path, e))
}

fn mismatch(subject: String, message: String) -> Diagnostics {
    Diagnostics::single(Diagnostic::error(Code::ReplayMismatch, subject, message))
}

/// Rebuilds a persisted session by matching its inputs and replaying its log.
pub fn load_session_dir(dir: &Path) -> Result<Session, Diagnostics> {
    let meta: SessionMeta = serde_json::from_slice(&read(&dir.join(META))?)
        .map_err(|e| mismatch(dir.join(META).display().to_string(), e.to_string()))?;
    let mut s = Session::create(
        meta.session_id,
        &read(&dir.join(SCHEMA))?,
        &read(&dir.join(INSTANCE))?,
        &read(&dir.join(CORPUS))?,
        meta.tau,
    )?;
    let log_path = dir.join(OPLOG);
    let file = match File::open(&log_path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(s),
        Err(e) => return Err(io_error(&log_path, e)),
    };
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_error(&log_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let subject = format!("{}:{}", log_path.display(), n + 1);
        let entry: LogEntry = serde_json::from_str(&line)
            .map_err(|e| mismatch(subject.clone(), format!("unreadable entry: {e}")))?;
        let replayed = match entry.action {
            Action::Edits => s.apply(entry.ops.clone()),
            Action::Undo => s.undo(),
            Action::Redo => s.redo(),
        };
        let info = replayed.map_err(|d| {
            let mut out = mismatch(
                subject.clone(),
                format!("entry {} no longer applies", entry.seq),
            );
            out.0.extend(d);
            out
        })?;
        if info.revision != entry.revision || info.hash != entry.hash {
            return Err(mismatch(
                subject,
                format!(
                    "entry {} replays to revision {} hash {}, log says revision {} hash {}",
                    entry.seq, info.revision, info.hash, entry.revision, entry.hash
                ),
            ));
        }
    }
    Ok(s)
}

/// All live sessions. Each session has its own lock, so writers on one
/// session never wait for another.
#[derive(Debug, Default)]
pub struct SessionStore {
    data_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `dir`, creating it if needed, and replays every session in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, Diagnostics> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let mut sessions = HashMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_error(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(META).is_file())
            .collect();
        entries.sort();
        for path in entries {
            let s = load_session_dir(&path)?;
            sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
        }
        Ok(Self {
            data_dir: Some(dir),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn create(
        &self,
        schema: &[u8],
        instance: &[u8],
        corpus: &[u8],
        tau: f64,
    ) -> Result<SessionSummary, Diagnostics> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Session::create(id.clone(), schema, instance, corpus, tau)?;
        if let Some(root) = &self.data_dir {
            let dir = root.join(&id);
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            write(&dir.join(SCHEMA), &serialize_schema(&s.schema))?;
            write(&dir.join(INSTANCE), &serialize_instance(&s.instance))?;
            write(&dir.join(CORPUS), &serialize_corpus(&s.corpus))?;
            write(&dir.join(OPLOG), b"")?;
            let meta = SessionMeta {
                session_id: id.clone(),
                tau,
            };
            write(
                &dir.join(META),
                &serde_json::to_vec_pretty(&meta).expect("meta serializes"),
            )?;
        }
        let summary = s.summary();
        self.sessions
            .write()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(s)));
        Ok(summary)
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, Diagnostics> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| {
                Diagnostics::single(Diagnostic::error(
                    Code::UnknownSession,
                    id,
                    format!("no session {id}"),
                ))
            })
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, Diagnostics> {
        Ok(self.get(id)?.lock().unwrap().snapshot())
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, Diagnostics> {
        Ok(self.get(id)?.lock().unwrap().summary())
    }

    pub fn revision(&self, id: &str) -> Result<RevisionInfo, Diagnostics> {
        Ok(self.get(id)?.lock().unwrap().revision_info())
    }

    fn mutate(
        &self,
        id: &str,
        action: Action,
        ops: Vec<EditOp>,
    ) -> Result<RevisionInfo, Diagnostics> {
        let handle = self.get(id)?;
        let mut s = handle.lock().unwrap();
        let before = s.clone();
        let info = match action {
            Action::Edits => s.apply(ops.clone()),
            Action::Undo => s.undo(),
            Action::Redo => s.redo(),
        }?;
        if let Some(root) = &self.data_dir {
            let entry = LogEntry {
                seq: info.revision,
                action,
                ops,
                revision: info.revision,
                hash: info.hash.clone(),
            };
            if let Err(e) = append(&root.join(id).join(OPLOG), &entry) {
                *s = before;
                return Err(e);
            }
        }
        Ok(info)
    }

    /// Applies a batch atomically; a failing batch commits nothing.
    pub fn edits(&self, id: &str, ops: Vec<EditOp>) -> Result<RevisionInfo, Diagnostics> {
        self.mutate(id, Action::Edits, ops)
    }

    pub fn undo(&self, id: &str) -> Result<RevisionInfo, Diagnostics> {
        self.mutate(id, Action::Undo, vec![])
    }

    pub fn redo(&self, id: &str) -> Result<RevisionInfo, Diagnostics> {
        self.mutate(id, Action::Redo, vec![])
    }

    pub fn export(&self, id: &str) -> Result<Vec<u8>, Diagnostics> {
        Ok(self.snapshot(id)?.export())
    }
}
