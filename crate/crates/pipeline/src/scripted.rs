//! A deterministic stand-in model for offline fixtures. It recognizes the
//! calling agent from the system prompt, recovers the source text from the
//! rendered template, and answers from a per-segment script.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use maats_core::prompts::extract_placeholders;
use maats_core::{MqmCategory, PromptLibrary, Segment, TemplateId};
use maats_gateway::{cache_key, CacheKey, CacheRecord, ChatRequest, FnProvider, Gateway, ProviderFailure};
use serde::{Deserialize, Serialize};

use crate::orchestrator::{Orchestrator, OrchestratorConfig, PipelineError};

/// Canned replies for one source sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedSegment {
    pub source: String,
    pub translation: String,
    /// Full self-review reply for the single-agent baseline.
    pub self_review: String,
    /// Evaluator replies by category; missing categories answer "None".
    #[serde(default)]
    pub evaluations: BTreeMap<MqmCategory, String>,
    pub edited: String,
}

#[derive(Debug, Clone)]
pub struct ScriptedModel {
    by_source: HashMap<String, ScriptedSegment>,
    prompts: PromptLibrary,
}

impl ScriptedModel {
    pub fn new(segments: Vec<ScriptedSegment>, prompts: PromptLibrary) -> Self {
        Self {
            by_source: segments.into_iter().map(|s| (s.source.clone(), s)).collect(),
            prompts,
        }
    }

    /// Reads a JSON array of [`ScriptedSegment`].
    pub fn from_file(path: &Path, prompts: PromptLibrary) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let segments: Vec<ScriptedSegment> = serde_json::from_str(&text).map_err(std::io::Error::other)?;
        Ok(Self::new(segments, prompts))
    }

    fn template_for(&self, system_prompt: &str) -> Option<TemplateId> {
        TemplateId::all()
            .into_iter()
            .find(|t| t.system_prompt() == system_prompt)
    }

    pub fn respond(&self, req: &ChatRequest) -> Result<String, ProviderFailure> {
        let fatal = |body: String| ProviderFailure::Fatal { status: None, body };
        let template = self
            .template_for(&req.system_prompt)
            .ok_or_else(|| fatal(format!("unrecognized system prompt: {}", req.system_prompt)))?;
        let values = extract_placeholders(&self.prompts.template(template).body, &req.user_prompt)
            .ok_or_else(|| fatal(format!("prompt does not fit template {template}")))?;
        let source = values.get("source_text").map(String::as_str).unwrap_or_default();
        let script = self
            .by_source
            .get(source)
            .ok_or_else(|| fatal(format!("no script for source {source:?}")))?;
        Ok(match template {
            TemplateId::Translator => script.translation.clone(),
            TemplateId::SingleAgentRefine => script.self_review.clone(),
            TemplateId::Evaluator(category) => script
                .evaluations
                .get(&category)
                .cloned()
                .unwrap_or_else(|| "None".to_string()),
            TemplateId::Editor => script.edited.clone(),
        })
    }

    pub fn into_provider(self, name: &str) -> FnProvider {
        FnProvider::new(name, move |req, _| self.respond(req))
    }
}

/// Runs every approach over `segments` against the script and returns each
/// distinct request's reply as a replay record, sorted by digest.
pub async fn record_replay(
    model: ScriptedModel,
    model_id: &str,
    segments: &[Segment],
    categories: &[MqmCategory],
    config: OrchestratorConfig,
) -> Result<Vec<CacheRecord>, PipelineError> {
    let prompts = Arc::new(model.prompts.clone());
    let seen: Arc<Mutex<BTreeMap<CacheKey, String>>> = Arc::default();
    let sink = Arc::clone(&seen);
    let provider = FnProvider::new("scripted", move |req, _| {
        let text = model.respond(req)?;
        sink.lock().expect("recorder lock").insert(cache_key(req), text.clone());
        Ok(text)
    });
    let gateway = Gateway::builder()
        .provider(Arc::new(provider))
        .default_provider("scripted")
        .build()
        .map_err(|source| PipelineError::Gateway {
            segment_id: String::new(),
            source,
        })?;
    let orchestrator = Orchestrator::new(Arc::new(gateway), prompts, config);
    for segment in segments {
        orchestrator.run_zero_shot(segment, model_id).await?;
        orchestrator.run_single_agent(segment, model_id).await?;
        orchestrator.run_maats(segment, model_id, categories).await?;
    }
    let seen = seen.lock().expect("recorder lock");
    Ok(seen
        .iter()
        .map(|(digest, text)| CacheRecord {
            digest: digest.clone(),
            text: text.clone(),
        })
        .collect())
}
