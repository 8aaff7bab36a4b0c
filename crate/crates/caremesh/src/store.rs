//! File-backed persistence: sessions, the binary vector index with its chunk
//! sidecars, uploaded datasets and run records.
//!
//! ```text
//! <root>/sessions/<id>/session.json
//! <root>/sessions/<id>/index.bin
//! <root>/sessions/<id>/chunks-<doc_id>.json
//! <root>/sessions/<id>/dataset.csv
//! <root>/sessions/<id>/runs/run-<run_id>.json
//! <root>/runs/run-<run_id>.json            runs not bound to a session
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use caremesh_core::kernel::{RunState, RunTranscript};
use caremesh_core::rag::{ChunkParams, DocumentChunk, IndexEntry, KnowledgeBase, VectorIndex};
use caremesh_core::sql::{ColumnKind, Table};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on `{path}`: {source}")]
    Io { path: String, source: io::Error },
    #[error("corrupt file `{path}`: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("not found: {0}")]
    NotFound(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Io { .. } => "StorageError",
            StoreError::Corrupt { .. } => "CorruptStorage",
            StoreError::NotFound(_) => "NotFound",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.display().to_string(), source }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt { path: path.display().to_string(), reason: reason.into() }
}

static TMP_SEQ: AtomicU64 = AtomicU64::new(0);

/// Write to a sibling temp file and rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let n = TMP_SEQ.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("tmp-{}-{n}", std::process::id()));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| corrupt(path, e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt(path, e.to_string()))
}

/// Encodes the index: `u32 D, u32 count`, then per record `u32 len, doc_id
/// bytes, u32 chunk_id, u32 char_offset, D x f32`. All little-endian.
pub fn encode_index(index: &VectorIndex) -> Vec<u8> {
    let dim = index.dim();
    let mut out = Vec::with_capacity(8 + index.len() * (16 + dim * 4));
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(index.len() as u32).to_le_bytes());
    for e in index.entries() {
        out.extend_from_slice(&(e.doc_id.len() as u32).to_le_bytes());
        out.extend_from_slice(e.doc_id.as_bytes());
        out.extend_from_slice(&e.chunk_id.to_le_bytes());
        out.extend_from_slice(&(e.char_offset as u32).to_le_bytes());
        for x in &e.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Option<f32> {
        self.take(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_index(bytes: &[u8]) -> Result<VectorIndex, String> {
    let mut c = Cursor { bytes, pos: 0 };
    let short = || "truncated index".to_string();
    let dim = c.u32().ok_or_else(short)? as usize;
    let count = c.u32().ok_or_else(short)? as usize;
    let mut entries = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u32().ok_or_else(short)? as usize;
        let doc_id = std::str::from_utf8(c.take(len).ok_or_else(short)?).map_err(|e| e.to_string())?.to_string();
        let chunk_id = c.u32().ok_or_else(short)?;
        let char_offset = c.u32().ok_or_else(short)? as usize;
        let vector = (0..dim).map(|_| c.f32()).collect::<Option<Vec<f32>>>().ok_or_else(short)?;
        entries.push(IndexEntry { doc_id, chunk_id, char_offset, vector });
    }
    if c.pos != bytes.len() {
        return Err("trailing bytes after last record".into());
    }
    let mut index = VectorIndex::new(dim);
    index.add(entries).map_err(|e| e.to_string())?;
    Ok(index)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub columns: Vec<ColumnInfo>,
    pub row_count: usize,
}

impl DatasetInfo {
    pub fn of(table: &Table) -> Self {
        Self { columns: table.schema().into_iter().map(|(name, kind)| ColumnInfo { name, kind }).collect(), row_count: table.row_count() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub created_at: String,
    pub doc_ids: Vec<String>,
    pub table: Option<DatasetInfo>,
    pub run_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { error: error.into(), detail: detail.into(), subject: None }
    }
}

/// Status of a workflow run, with its transcript and result once finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub workflow: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub state: RunState,
    pub steps_done: usize,
    pub result_ref: Option<String>,
    pub error: Option<ErrorBody>,
    pub created_at: String,
    pub updated_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<RunTranscript>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
}

/// Ids become path components, so only a safe alphabet is accepted.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

#[derive(Clone, Debug)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    fn session_file(&self, id: &str) -> PathBuf {
        self.session_dir(id).join("session.json")
    }

    pub fn runs_dir(&self, session: Option<&str>) -> PathBuf {
        match session {
            Some(id) => self.session_dir(id).join("runs"),
            None => self.root.join("runs"),
        }
    }

    pub fn create_session(&self) -> Result<Session, StoreError> {
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            created_at: now(),
            doc_ids: Vec::new(),
            table: None,
            run_ids: Vec::new(),
        };
        self.save_session(&session)?;
        Ok(session)
    }

    /// Creates the session with a caller-chosen id if it does not exist yet.
    pub fn ensure_session(&self, id: &str) -> Result<Session, StoreError> {
        if !valid_id(id) {
            return Err(StoreError::NotFound(format!("session `{id}`")));
        }
        if let Some(s) = self.load_session(id)? {
            return Ok(s);
        }
        let session = Session { id: id.into(), created_at: now(), doc_ids: Vec::new(), table: None, run_ids: Vec::new() };
        self.save_session(&session)?;
        Ok(session)
    }

    pub fn load_session(&self, id: &str) -> Result<Option<Session>, StoreError> {
        if !valid_id(id) {
            return Ok(None);
        }
        let path = self.session_file(id);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn save_session(&self, session: &Session) -> Result<(), StoreError> {
        write_json(&self.session_file(&session.id), session)
    }

    /// The session's knowledge base; empty when nothing has been uploaded.
    pub fn load_kb(&self, session: &Session) -> Result<KnowledgeBase, StoreError> {
        let dir = self.session_dir(&session.id);
        let index_path = dir.join("index.bin");
        if !index_path.exists() {
            return Ok(KnowledgeBase::new(caremesh_core::provider::EMBED_DIM));
        }
        let bytes = fs::read(&index_path).map_err(io_err(&index_path))?;
        let index = decode_index(&bytes).map_err(|r| corrupt(&index_path, r))?;
        let mut chunks = Vec::new();
        for doc in &session.doc_ids {
            let path = dir.join(format!("chunks-{doc}.json"));
            let mut doc_chunks: Vec<DocumentChunk> = read_json(&path)?;
            chunks.append(&mut doc_chunks);
        }
        KnowledgeBase::from_parts(ChunkParams::default(), chunks, index).map_err(|e| corrupt(&index_path, e.to_string()))
    }

    /// Writes sidecars first, then the index, so a crash never leaves index
    /// entries without text.
    pub fn save_kb(&self, session_id: &str, kb: &KnowledgeBase) -> Result<(), StoreError> {
        let dir = self.session_dir(session_id);
        for doc in kb.doc_ids() {
            let chunks = kb.chunks_of(doc).unwrap_or_default();
            write_json(&dir.join(format!("chunks-{doc}.json")), &chunks)?;
        }
        write_atomic(&dir.join("index.bin"), &encode_index(kb.index()))
    }

    pub fn save_dataset(&self, session_id: &str, csv: &[u8]) -> Result<(), StoreError> {
        write_atomic(&self.session_dir(session_id).join("dataset.csv"), csv)
    }

    pub fn load_dataset(&self, session_id: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.session_dir(session_id).join("dataset.csv");
        fs::read(&path).map_err(io_err(&path))
    }

    fn run_file(&self, session: Option<&str>, run_id: &str) -> PathBuf {
        self.runs_dir(session).join(format!("run-{run_id}.json"))
    }

    pub fn save_run(&self, run: &RunRecord) -> Result<(), StoreError> {
        write_json(&self.run_file(run.session_id.as_deref(), &run.run_id), run)
    }

    pub fn save_run_input(&self, run: &RunRecord, input: &Value) -> Result<(), StoreError> {
        write_json(&self.runs_dir(run.session_id.as_deref()).join(format!("input-{}.json", run.run_id)), input)
    }

    pub fn load_run_input(&self, run: &RunRecord) -> Result<Value, StoreError> {
        read_json(&self.runs_dir(run.session_id.as_deref()).join(format!("input-{}.json", run.run_id)))
    }

    /// Writes a finished run's result next to its record and returns the
    /// path relative to the data root.
    pub fn save_result(&self, run: &RunRecord, result: &Value) -> Result<String, StoreError> {
        let path = self.runs_dir(run.session_id.as_deref()).join(format!("result-{}.json", run.run_id));
        write_json(&path, result)?;
        Ok(path.strip_prefix(&self.root).unwrap_or(&path).to_string_lossy().replace('\\', "/"))
    }

    /// Path of a run record, looked up across sessionless and session runs.
    pub fn find_run(&self, run_id: &str) -> Result<Option<PathBuf>, StoreError> {
        if !valid_id(run_id) {
            return Ok(None);
        }
        let direct = self.run_file(None, run_id);
        if direct.exists() {
            return Ok(Some(direct));
        }
        let sessions = self.root.join("sessions");
        if !sessions.exists() {
            return Ok(None);
        }
        for entry in fs::read_dir(&sessions).map_err(io_err(&sessions))? {
            let entry = entry.map_err(io_err(&sessions))?;
            let candidate = entry.path().join("runs").join(format!("run-{run_id}.json"));
            if candidate.exists() {
                return Ok(Some(candidate));
            }
        }
        Ok(None)
    }

    pub fn load_run(&self, run_id: &str) -> Result<Option<RunRecord>, StoreError> {
        match self.find_run(run_id)? {
            Some(path) => read_json(&path).map(Some),
            None => Ok(None),
        }
    }

    /// Raw bytes of a run record, for byte-identical repeated reads.
    pub fn load_run_bytes(&self, run_id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        match self.find_run(run_id)? {
            Some(path) => fs::read(&path).map(Some).map_err(io_err(&path)),
            None => Ok(None),
        }
    }

    pub fn all_runs(&self) -> Result<Vec<RunRecord>, StoreError> {
        let mut dirs = vec![self.runs_dir(None)];
        let sessions = self.root.join("sessions");
        if sessions.exists() {
            for entry in fs::read_dir(&sessions).map_err(io_err(&sessions))? {
                dirs.push(entry.map_err(io_err(&sessions))?.path().join("runs"));
            }
        }
        let mut runs = Vec::new();
        for dir in dirs.into_iter().filter(|d| d.exists()) {
            for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
                let path = entry.map_err(io_err(&dir))?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if name.starts_with("run-") && name.ends_with(".json") {
                    runs.push(read_json(&path)?);
                }
            }
        }
        runs.sort_by(|a: &RunRecord, b| a.created_at.cmp(&b.created_at).then_with(|| a.run_id.cmp(&b.run_id)));
        Ok(runs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use caremesh_core::provider::HashedEmbedder;

    #[test]
    fn index_round_trip() {
        let mut idx = VectorIndex::new(3);
        idx.add(vec![
            IndexEntry { doc_id: "doc-1".into(), chunk_id: 0, char_offset: 0, vector: vec![1.0, 0.0, -0.5] },
            IndexEntry { doc_id: "doc-2".into(), chunk_id: 7, char_offset: 1000, vector: vec![0.25, 0.5, 0.125] },
        ])
        .unwrap();
        let bytes = encode_index(&idx);
        assert_eq!(&bytes[..8], &[3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(decode_index(&bytes).unwrap(), idx);
        assert!(decode_index(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_index(&extra).is_err());
    }

    #[test]
    fn kb_survives_reload() {
        let tmp = tempfile::tempdir().unwrap();
        let data = DataDir::new(tmp.path());
        let mut session = data.create_session().unwrap();
        let mut kb = data.load_kb(&session).unwrap();
        let id = kb.add_document("notes", "Sundowning is late-day confusion.", &HashedEmbedder).unwrap();
        session.doc_ids.push(id.clone());
        data.save_kb(&session.id, &kb).unwrap();
        data.save_session(&session).unwrap();
        assert!(data.session_dir(&session.id).join(format!("chunks-{id}.json")).exists());

        let session = data.load_session(&session.id).unwrap().unwrap();
        let again = data.load_kb(&session).unwrap();
        assert_eq!(again.chunk_count(), kb.chunk_count());
        let hits = again.retrieve("late-day confusion", 1, &HashedEmbedder).unwrap();
        assert_eq!(hits[0].doc_id, id);
    }

    #[test]
    fn ids_are_path_safe() {
        assert!(valid_id("a1-b_2"));
        for bad in ["", "../x", "a/b", "a b", "a.json"] {
            assert!(!valid_id(bad), "{bad}");
        }
        let tmp = tempfile::tempdir().unwrap();
        assert!(DataDir::new(tmp.path()).load_session("../etc").unwrap().is_none());
    }

    #[test]
    fn runs_are_found_in_sessions() {
        let tmp = tempfile::tempdir().unwrap();
        let data = DataDir::new(tmp.path());
        let run = RunRecord {
            run_id: "r1".into(),
            workflow: "support-plan".into(),
            session_id: Some("s1".into()),
            state: RunState::Pending,
            steps_done: 0,
            result_ref: None,
            error: None,
            created_at: now(),
            updated_at: now(),
            transcript: None,
            result: None,
        };
        data.save_run(&run).unwrap();
        assert_eq!(data.load_run("r1").unwrap().unwrap(), run);
        assert!(data.load_run("r2").unwrap().is_none());
        assert_eq!(data.all_runs().unwrap().len(), 1);
        let r = data.save_result(&run, &serde_json::json!({"a": 1})).unwrap();
        assert_eq!(r, "sessions/s1/runs/result-r1.json");
    }
}
