//! File-backed run store: `runs/<run_id>/manifest.json` plus an append-only
//! `runs/<run_id>/records.jsonl`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use maats_core::{MqmCategory, Severity, SystemKind};
use serde::Serialize;
use thiserror::Error;

use crate::record::{RunManifest, RunRecord, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("run `{0}` already exists")]
    RunExists(String),
    #[error("run `{run_id}` already holds a different record for segment `{segment_id}`")]
    ConflictingRecord { run_id: String, segment_id: String },
    #[error("{path}:{line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error("run id `{0}` must be non-empty and use only letters, digits, '.', '_' or '-'")]
    InvalidRunId(String),
}

impl StoreError {
    pub fn kind(&self) -> &'static str {
        match self {
            StoreError::Io { .. } => "io",
            StoreError::UnknownRun(_) => "unknown_run",
            StoreError::RunExists(_) => "run_exists",
            StoreError::ConflictingRecord { .. } => "conflicting_record",
            StoreError::Corrupt { .. } => "corrupt_store",
            StoreError::InvalidRunId(_) => "invalid_run_id",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn validate_run_id(run_id: &str) -> Result<(), StoreError> {
    let ok = !run_id.is_empty()
        && !run_id.starts_with('.')
        && run_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidRunId(run_id.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    /// Identical record already stored; nothing written.
    AlreadyPresent,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let runs = root.join("runs");
        fs::create_dir_all(&runs).map_err(io_err(&runs))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    fn manifest_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("manifest.json")
    }

    pub fn records_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join("records.jsonl")
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.manifest_path(run_id).is_file()
    }

    pub fn create_run(&self, manifest: &RunManifest) -> Result<RunWriter, StoreError> {
        validate_run_id(&manifest.run_id)?;
        if self.exists(&manifest.run_id) {
            return Err(StoreError::RunExists(manifest.run_id.clone()));
        }
        let dir = self.run_dir(&manifest.run_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        self.write_manifest(manifest)?;
        self.writer(&manifest.run_id)
    }

    /// Opens an existing run for further appends.
    pub fn writer(&self, run_id: &str) -> Result<RunWriter, StoreError> {
        validate_run_id(run_id)?;
        if !self.exists(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        let path = self.records_path(run_id);
        let index = self
            .load_records(run_id)?
            .into_iter()
            .map(|r| (r.segment_id.clone(), r.content_digest()))
            .collect();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(RunWriter {
            run_id: run_id.to_string(),
            path,
            inner: Mutex::new((file, index)),
        })
    }

    /// Appends through a short-lived writer.
    pub fn append_record(&self, record: &RunRecord) -> Result<AppendOutcome, StoreError> {
        self.writer(&record.run_id)?.append(record)
    }

    fn write_manifest(&self, manifest: &RunManifest) -> Result<(), StoreError> {
        let path = self.manifest_path(&manifest.run_id);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn load_manifest(&self, run_id: &str) -> Result<RunManifest, StoreError> {
        validate_run_id(run_id)?;
        let path = self.manifest_path(run_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownRun(run_id.to_string())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path,
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn finish_run(&self, run_id: &str, finished_at: String) -> Result<RunManifest, StoreError> {
        let mut manifest = self.load_manifest(run_id)?;
        manifest.finished_at = Some(finished_at);
        self.write_manifest(&manifest)?;
        Ok(manifest)
    }

    /// Records in file order.
    pub fn load_records(&self, run_id: &str) -> Result<Vec<RunRecord>, StoreError> {
        if !self.exists(run_id) {
            return Err(StoreError::UnknownRun(run_id.to_string()));
        }
        let path = self.records_path(run_id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: RunRecord = serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            if record.schema_version != SCHEMA_VERSION {
                return Err(StoreError::Corrupt {
                    path: path.clone(),
                    line: i + 1,
                    reason: format!("schema version {} (expected {SCHEMA_VERSION})", record.schema_version),
                });
            }
            out.push(record);
        }
        Ok(out)
    }

    pub fn list_runs(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("runs");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if self.exists(&name) {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Serializes appends to one run's record file.
pub struct RunWriter {
    run_id: String,
    path: PathBuf,
    inner: Mutex<(File, HashMap<String, String>)>,
}

impl RunWriter {
    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn contains(&self, segment_id: &str) -> bool {
        self.inner.lock().expect("writer lock").1.contains_key(segment_id)
    }

    /// Idempotent on identical content; a different record for a stored segment is a conflict.
    pub fn append(&self, record: &RunRecord) -> Result<AppendOutcome, StoreError> {
        if record.run_id != self.run_id {
            return Err(StoreError::UnknownRun(record.run_id.clone()));
        }
        let line = record.to_line();
        let digest = record.content_digest();
        let mut guard = self.inner.lock().expect("writer lock");
        let (file, index) = &mut *guard;
        match index.get(&record.segment_id) {
            Some(existing) if *existing == digest => return Ok(AppendOutcome::AlreadyPresent),
            Some(_) => {
                return Err(StoreError::ConflictingRecord {
                    run_id: self.run_id.clone(),
                    segment_id: record.segment_id.clone(),
                })
            }
            None => {}
        }
        file.write_all(format!("{line}\n").as_bytes())
            .map_err(io_err(&self.path))?;
        file.sync_data().map_err(io_err(&self.path))?;
        index.insert(record.segment_id.clone(), digest);
        Ok(AppendOutcome::Appended)
    }
}

/// Finding counts per (system, category, severity), derived from records.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct AnnotationCounts {
    pub counts: BTreeMap<SystemKind, BTreeMap<MqmCategory, BTreeMap<Severity, u64>>>,
}

impl AnnotationCounts {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Self {
        let mut out = Self::default();
        for r in records {
            for a in r.findings() {
                *out.counts
                    .entry(r.system)
                    .or_default()
                    .entry(a.category)
                    .or_default()
                    .entry(a.severity)
                    .or_default() += 1;
            }
        }
        out
    }

    pub fn total(&self, system: SystemKind) -> u64 {
        self.counts
            .get(&system)
            .map(|c| c.values().flat_map(|s| s.values()).sum())
            .unwrap_or(0)
    }

    pub fn by_category(&self, system: SystemKind, category: MqmCategory) -> u64 {
        self.counts
            .get(&system)
            .and_then(|c| c.get(&category))
            .map(|s| s.values().sum())
            .unwrap_or(0)
    }
}
