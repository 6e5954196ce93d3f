//! Append-only response store, one `{"digest", "text"}` record per line.
//! Replay fixtures use the same format.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::types::CacheKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub digest: CacheKey,
    pub text: String,
}

/// Reads a record file. Later lines win on duplicate digests. A torn final
/// line (crash mid-write) is skipped; any other malformed line is an error.
pub fn load_records(path: &Path) -> io::Result<HashMap<CacheKey, String>> {
    let mut out = HashMap::new();
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<io::Result<_>>()?;
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CacheRecord>(line) {
            Ok(r) => {
                out.insert(r.digest, r.text);
            }
            Err(_) if i == last => {
                tracing::warn!(path = %path.display(), line = i + 1, "skipping torn final cache line");
            }
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[CacheRecord]) -> io::Result<()> {
    let mut file = File::create(path)?;
    for r in records {
        writeln!(file, "{}", serde_json::to_string(r).map_err(io::Error::other)?)?;
    }
    file.sync_all()
}

/// In-memory index over an append-only file. All writes go through one lock,
/// so concurrent callers never interleave partial lines.
pub struct ResponseCache {
    path: PathBuf,
    inner: Mutex<CacheInner>,
}

struct CacheInner {
    entries: HashMap<CacheKey, String>,
    writer: File,
}

impl ResponseCache {
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let entries = if path.exists() {
            repair_tail(&path)?;
            load_records(&path)?
        } else {
            HashMap::new()
        };
        let writer = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            inner: Mutex::new(CacheInner { entries, writer }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.inner.lock().expect("cache lock").entries.get(key).cloned()
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.inner.lock().expect("cache lock").entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends unless the same text is already stored under `key`.
    pub fn put(&self, key: &CacheKey, text: &str) -> io::Result<()> {
        let mut inner = self.inner.lock().expect("cache lock");
        if inner.entries.get(key).map(String::as_str) == Some(text) {
            return Ok(());
        }
        let line = serde_json::to_string(&CacheRecord {
            digest: key.clone(),
            text: text.to_string(),
        })
        .map_err(io::Error::other)?;
        inner.writer.write_all(format!("{line}\n").as_bytes())?;
        inner.writer.flush()?;
        inner.entries.insert(key.clone(), text.to_string());
        Ok(())
    }
}

/// Drops an unparseable unterminated final line left by a crash mid-write,
/// or terminates a complete one, so appends always start on a fresh line.
fn repair_tail(path: &Path) -> io::Result<()> {
    let bytes = std::fs::read(path)?;
    if bytes.last().is_none_or(|b| *b == b'\n') {
        return Ok(());
    }
    let start = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    if serde_json::from_slice::<CacheRecord>(&bytes[start..]).is_ok() {
        OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
    } else {
        tracing::warn!(path = %path.display(), "truncating torn final cache line");
        OpenOptions::new().write(true).open(path)?.set_len(start as u64)?;
    }
    Ok(())
}
