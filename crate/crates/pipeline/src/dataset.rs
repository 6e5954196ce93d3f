//! Dataset, gold-annotation and external-score ingestion.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use maats_core::types::{parse_severity_token, SeverityToken};
use maats_core::{category_from_slug, AnnotationSet, CoreError, ErrorAnnotation, LanguagePair, Segment, SystemKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: duplicate segment id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {0}: empty source text")]
    EmptySource(usize),
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: {source}")]
    UnknownCategory {
        line: usize,
        #[source]
        source: CoreError,
    },
    #[error("parallel files differ in length: {source_lines} source lines, {other_lines} in {other}")]
    LineCountMismatch {
        source_lines: usize,
        other: PathBuf,
        other_lines: usize,
    },
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "io",
            IngestError::DuplicateId { .. } => "duplicate_id",
            IngestError::EmptySource(_) => "empty_source",
            IngestError::MalformedRecord { .. } => "malformed_record",
            IngestError::UnknownCategory { .. } => "unknown_category",
            IngestError::LineCountMismatch { .. } => "line_count_mismatch",
        }
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn malformed(line: usize, reason: impl ToString) -> IngestError {
    IngestError::MalformedRecord {
        line,
        reason: reason.to_string(),
    }
}

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case")]
pub enum DatasetSource {
    /// One `{id, source, reference?}` record per line.
    Jsonl { path: PathBuf },
    /// Line-aligned plain text; ids are 1-based line numbers unless an id file is given.
    Parallel {
        source: PathBuf,
        reference: Option<PathBuf>,
        ids: Option<PathBuf>,
    },
}

impl DatasetSource {
    /// Files in hashing order.
    pub fn files(&self) -> Vec<&Path> {
        match self {
            DatasetSource::Jsonl { path } => vec![path],
            DatasetSource::Parallel { source, reference, ids } => std::iter::once(source.as_path())
                .chain(reference.as_deref())
                .chain(ids.as_deref())
                .collect(),
        }
    }

    pub fn describe(&self) -> String {
        self.files()
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    id: serde_json::Value,
    source: String,
    #[serde(default)]
    reference: Option<String>,
}

pub fn ingest_dataset(src: &DatasetSource, pair: &LanguagePair) -> Result<Vec<Segment>, IngestError> {
    let mut rows: Vec<(usize, String, String, Option<String>)> = Vec::new();
    match src {
        DatasetSource::Jsonl { path } => {
            for (i, line) in read(path)?.lines().enumerate() {
                let n = i + 1;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: DatasetLine = serde_json::from_str(line).map_err(|e| malformed(n, e))?;
                let id = match rec.id {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(x) => x.to_string(),
                    other => return Err(malformed(n, format!("id must be a string or number, got {other}"))),
                };
                rows.push((n, id, rec.source, rec.reference));
            }
        }
        DatasetSource::Parallel { source, reference, ids } => {
            let sources: Vec<String> = read(source)?.lines().map(str::to_string).collect();
            let aligned = |p: &Path| -> Result<Vec<String>, IngestError> {
                let lines: Vec<String> = read(p)?.lines().map(str::to_string).collect();
                if lines.len() != sources.len() {
                    return Err(IngestError::LineCountMismatch {
                        source_lines: sources.len(),
                        other: p.to_path_buf(),
                        other_lines: lines.len(),
                    });
                }
                Ok(lines)
            };
            let references = reference.as_deref().map(aligned).transpose()?;
            let id_lines = ids.as_deref().map(aligned).transpose()?;
            for (i, s) in sources.into_iter().enumerate() {
                let id = id_lines
                    .as_ref()
                    .map_or_else(|| (i + 1).to_string(), |v| v[i].trim().to_string());
                let r = references.as_ref().map(|v| v[i].clone());
                rows.push((i + 1, id, s, r));
            }
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, id, source, reference) in rows {
        if id.is_empty() {
            return Err(malformed(line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateId { line, id });
        }
        let segment = Segment::new(id, source, reference.filter(|r| !r.trim().is_empty()), pair.clone())
            .map_err(|_| IngestError::EmptySource(line))?;
        out.push(segment);
    }
    Ok(out)
}

/// SHA-256 over the dataset files' bytes, in [`DatasetSource::files`] order.
pub fn dataset_digest(src: &DatasetSource) -> Result<String, IngestError> {
    let mut hasher = Sha256::new();
    for path in src.files() {
        let bytes = fs::read(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Deserialize)]
struct GoldLine {
    segment_id: serde_json::Value,
    category: String,
    #[serde(default)]
    subcategory: Option<String>,
    severity: String,
    #[serde(default)]
    explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldAnnotations {
    pub sets: BTreeMap<String, AnnotationSet>,
    pub warnings: Vec<String>,
}

/// Groups `{segment_id, category, subcategory, severity, explanation}` lines by segment.
/// Lines with a no-error severity are skipped with a warning.
pub fn ingest_gold_annotations(path: &Path) -> Result<GoldAnnotations, IngestError> {
    let mut gold = GoldAnnotations::default();
    for (i, line) in read(path)?.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GoldLine = serde_json::from_str(line).map_err(|e| malformed(n, e))?;
        let segment_id = match rec.segment_id {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(x) => x.to_string(),
            other => {
                return Err(malformed(
                    n,
                    format!("segment_id must be a string or number, got {other}"),
                ))
            }
        };
        let category =
            category_from_slug(&rec.category).map_err(|source| IngestError::UnknownCategory { line: n, source })?;
        let set = gold
            .sets
            .entry(segment_id.clone())
            .or_insert_with(|| AnnotationSet::new(segment_id.clone(), "gold"));
        let severity = match parse_severity_token(&rec.severity) {
            Some(SeverityToken::Present(s)) => s,
            Some(SeverityToken::Absent) => {
                gold.warnings.push(format!("line {n}: no-error severity, skipped"));
                continue;
            }
            None => return Err(malformed(n, format!("unknown severity `{}`", rec.severity))),
        };
        let sub = rec.subcategory.unwrap_or_default();
        let sub = if sub.trim().is_empty() {
            "unspecified".to_string()
        } else {
            sub
        };
        let annotation = ErrorAnnotation::new(category, &sub, severity, rec.explanation.unwrap_or_default())
            .map_err(|e| malformed(n, e))?
            .with_origin("gold");
        if !category.is_known_subcategory(&annotation.subcategory) {
            gold.warnings.push(format!(
                "line {n}: subcategory `{}` not listed for {}",
                annotation.subcategory,
                category.slug()
            ));
        }
        set.annotations.push(annotation);
    }
    Ok(gold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalScore {
    pub segment_id: String,
    pub system: SystemKind,
    pub metric_name: String,
    pub score: f64,
}

/// Reads `{segment_id, system, metric_name, score}` lines from an external scorer.
pub fn ingest_external_scores(path: &Path) -> Result<Vec<ExternalScore>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in read(path)?.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let s: ExternalScore = serde_json::from_str(line).map_err(|e| malformed(n, e))?;
        if !s.score.is_finite() {
            return Err(malformed(n, "score must be finite"));
        }
        if !seen.insert((s.segment_id.clone(), s.system, s.metric_name.clone())) {
            return Err(malformed(
                n,
                format!(
                    "duplicate score for ({}, {}, {})",
                    s.segment_id, s.system, s.metric_name
                ),
            ));
        }
        out.push(s);
    }
    Ok(out)
}
