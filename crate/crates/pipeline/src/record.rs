//! Persisted shapes: run manifests and per-segment run records.

use maats_core::{AnnotationSet, ErrorAnnotation, LanguagePair, MqmCategory, SystemKind, TranslationDraft};
use maats_gateway::{CacheKey, Outcome};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::orchestrator::{CallRole, FallbackReason, MaatsResult, SingleAgentResult, TranscriptEntry, ZeroShotResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub run_id: String,
    pub model_id: String,
    pub approach: SystemKind,
    pub pair: LanguagePair,
    pub dataset_path: String,
    pub dataset_digest: String,
    pub segment_count: usize,
    pub temperature: f64,
    /// Evaluator categories; empty for the baselines.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<MqmCategory>,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    /// Effective configuration at launch.
    #[serde(default)]
    pub config: serde_json::Value,
}

/// One model call as recorded: who made it and which request digest it used.
/// Timing and cache provenance are left out so reruns serialize identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptDigest {
    pub role: CallRole,
    pub digest: CacheKey,
    /// `None` when the call failed.
    pub outcome: Option<Outcome>,
}

impl From<&TranscriptEntry> for TranscriptDigest {
    fn from(e: &TranscriptEntry) -> Self {
        Self {
            role: e.role,
            digest: e.digest.clone(),
            outcome: e.response.as_ref().map(|r| r.outcome),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub segment_id: String,
    pub system: SystemKind,
    pub model_id: String,
    /// Every stage produced, initial first.
    pub drafts: Vec<TranslationDraft>,
    /// Parsed findings with the raw replies they came from.
    #[serde(default)]
    pub annotation_sets: Vec<AnnotationSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prioritized: Vec<ErrorAnnotation>,
    pub final_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fell_back: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<FallbackReason>,
    pub transcript: Vec<TranscriptDigest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub fn from_zero_shot(run_id: &str, r: &ZeroShotResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.to_string(),
            segment_id: r.draft.segment_id.clone(),
            system: SystemKind::ZeroShot,
            model_id: r.draft.model_id.clone(),
            drafts: vec![r.draft.clone()],
            annotation_sets: Vec::new(),
            prioritized: Vec::new(),
            final_text: r.draft.text.clone(),
            fell_back: None,
            fallback_reason: None,
            transcript: r.transcript.iter().map(TranscriptDigest::from).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn from_single_agent(run_id: &str, r: &SingleAgentResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.to_string(),
            segment_id: r.initial.segment_id.clone(),
            system: SystemKind::SingleAgent,
            model_id: r.initial.model_id.clone(),
            drafts: vec![r.initial.clone(), r.final_draft.clone()],
            annotation_sets: vec![r.self_annotations.clone()],
            prioritized: Vec::new(),
            final_text: r.final_draft.text.clone(),
            fell_back: Some(r.fell_back),
            fallback_reason: r.fallback_reason,
            transcript: r.transcript.iter().map(TranscriptDigest::from).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn from_maats(run_id: &str, r: &MaatsResult) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run_id: run_id.to_string(),
            segment_id: r.initial.segment_id.clone(),
            system: SystemKind::Maats,
            model_id: r.initial.model_id.clone(),
            drafts: vec![r.initial.clone(), r.final_draft.clone()],
            annotation_sets: r.annotation_sets.clone(),
            prioritized: r.prioritized.clone(),
            final_text: r.final_draft.text.clone(),
            fell_back: None,
            fallback_reason: None,
            transcript: r.transcript.iter().map(TranscriptDigest::from).collect(),
            warnings: r.warnings.clone(),
        }
    }

    /// Single-line JSON, the on-disk form.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn content_digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_line().as_bytes()))
    }

    /// The annotations this record contributes to confusion and count reports.
    pub fn findings(&self) -> impl Iterator<Item = &ErrorAnnotation> {
        self.annotation_sets.iter().flat_map(|s| s.annotations.iter())
    }

    /// All findings merged into one set for the segment.
    pub fn merged_annotations(&self) -> AnnotationSet {
        let draft_id = self.drafts.first().map(|d| d.draft_id.clone()).unwrap_or_default();
        let mut set = AnnotationSet::new(self.segment_id.clone(), draft_id);
        set.annotations = self.findings().cloned().collect();
        set
    }
}
