//! Runs one segment through an approach: zero-shot, single-agent
//! self-refinement, or translator -> per-category evaluators -> editor.

use std::sync::Arc;

use futures::stream::{self, StreamExt};
use maats_core::parser::extract_refined_translation;
use maats_core::{
    extract_editor_translation, parse_annotations, prioritize, AnnotationSet, CoreError, DraftStage, EditorContext,
    ErrorAnnotation, MqmCategory, PromptLibrary, Segment, SystemKind, TemplateId, TranslationDraft,
};
use maats_gateway::{
    cache_key, CacheKey, ChatRequest, ChatResponse, Gateway, GatewayError, Outcome, DEFAULT_MAX_OUTPUT_TOKENS,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("segment {segment_id}: {source}")]
    Gateway {
        segment_id: String,
        #[source]
        source: GatewayError,
    },
    #[error("segment {segment_id}: {source}")]
    Core {
        segment_id: String,
        #[source]
        source: CoreError,
    },
    #[error("segment {segment_id}: {category} evaluator failed: {source}")]
    EvaluatorFailed {
        segment_id: String,
        category: MqmCategory,
        #[source]
        source: GatewayError,
    },
    #[error("segment {segment_id}: editor refused to produce a translation")]
    EditorRefused { segment_id: String },
    #[error("invalid category list: {0}")]
    InvalidCategories(String),
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Gateway { source, .. } => source.kind(),
            PipelineError::Core { .. } => "core",
            PipelineError::EvaluatorFailed { .. } => "evaluator_failed",
            PipelineError::EditorRefused { .. } => "editor_refused",
            PipelineError::InvalidCategories(_) => "invalid_categories",
        }
    }

    pub fn segment_id(&self) -> Option<&str> {
        match self {
            PipelineError::Gateway { segment_id, .. }
            | PipelineError::Core { segment_id, .. }
            | PipelineError::EvaluatorFailed { segment_id, .. }
            | PipelineError::EditorRefused { segment_id } => Some(segment_id),
            PipelineError::InvalidCategories(_) => None,
        }
    }
}

/// Which agent made a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "agent", content = "category")]
pub enum CallRole {
    Translator,
    SelfRefine,
    Evaluator(MqmCategory),
    Editor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub role: CallRole,
    pub digest: CacheKey,
    /// `None` when the call failed and the pipeline continued without it.
    pub response: Option<ChatResponse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotResult {
    pub draft: TranslationDraft,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    Refusal,
    NoChange,
    NoTranslationFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleAgentResult {
    pub initial: TranslationDraft,
    pub self_annotation_raw: String,
    /// Findings parsed from the self-review, kept for annotation counts.
    pub self_annotations: AnnotationSet,
    pub final_draft: TranslationDraft,
    pub fell_back: bool,
    pub fallback_reason: Option<FallbackReason>,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaatsResult {
    pub initial: TranslationDraft,
    /// One per enabled category, in category order.
    pub annotation_sets: Vec<AnnotationSet>,
    pub prioritized: Vec<ErrorAnnotation>,
    pub final_draft: TranslationDraft,
    pub transcript: Vec<TranscriptEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Evaluator calls in flight per segment.
    pub evaluator_concurrency: usize,
    /// Fail the segment when an evaluator call fails instead of continuing with an empty set.
    pub strict: bool,
    pub editor_context: EditorContext,
    /// Warn when source, draft and annotations together exceed this many estimated tokens.
    pub editor_token_budget: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            evaluator_concurrency: 4,
            strict: false,
            editor_context: EditorContext::Normalized,
            editor_token_budget: 1000,
        }
    }
}

/// Rough token count: one per four characters, at least one per word.
pub fn estimate_tokens(text: &str) -> usize {
    let chars = text.chars().count().div_ceil(4);
    chars.max(text.split_whitespace().count())
}

/// Checks a category list: non-empty and without repeats. Order is normalized.
pub fn validate_categories(categories: &[MqmCategory]) -> Result<Vec<MqmCategory>, PipelineError> {
    if categories.is_empty() {
        return Err(PipelineError::InvalidCategories(
            "at least one category is required".into(),
        ));
    }
    let mut sorted = categories.to_vec();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(PipelineError::InvalidCategories("categories must be unique".into()));
    }
    Ok(sorted)
}

pub struct Orchestrator {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptLibrary>,
    config: OrchestratorConfig,
}

impl Orchestrator {
    pub fn new(gateway: Arc<Gateway>, prompts: Arc<PromptLibrary>, config: OrchestratorConfig) -> Self {
        Self {
            gateway,
            prompts,
            config,
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    fn request(&self, template: TemplateId, model_id: &str, user_prompt: String) -> ChatRequest {
        ChatRequest::new(model_id, template.system_prompt(), user_prompt)
            .with_temperature(self.config.temperature)
            .with_max_output_tokens(self.config.max_output_tokens)
    }

    async fn call(
        &self,
        segment: &Segment,
        role: CallRole,
        req: ChatRequest,
        transcript: &mut Vec<TranscriptEntry>,
    ) -> Result<ChatResponse, PipelineError> {
        let response = self
            .gateway
            .complete(&req)
            .await
            .map_err(|source| PipelineError::Gateway {
                segment_id: segment.id.clone(),
                source,
            })?;
        transcript.push(TranscriptEntry {
            role,
            digest: cache_key(&req),
            response: Some(response.clone()),
        });
        Ok(response)
    }

    fn draft(
        &self,
        segment: &Segment,
        system: SystemKind,
        stage: DraftStage,
        text: String,
        model_id: &str,
    ) -> Result<TranslationDraft, PipelineError> {
        TranslationDraft::new(&segment.id, system, stage, text, model_id, self.config.temperature).map_err(|source| {
            PipelineError::Core {
                segment_id: segment.id.clone(),
                source,
            }
        })
    }

    async fn translate(
        &self,
        segment: &Segment,
        model_id: &str,
        system: SystemKind,
        stage: DraftStage,
        transcript: &mut Vec<TranscriptEntry>,
    ) -> Result<TranslationDraft, PipelineError> {
        let core_err = |source| PipelineError::Core {
            segment_id: segment.id.clone(),
            source,
        };
        let prompt = self
            .prompts
            .render_translator(&segment.pair, &segment.source_text)
            .map_err(core_err)?;
        let req = self.request(TemplateId::Translator, model_id, prompt);
        let reply = self.call(segment, CallRole::Translator, req, transcript).await?;
        let text = extract_editor_translation(&reply.text)
            .map_err(|_| core_err(CoreError::EmptyDraft(segment.id.clone())))?
            .text;
        self.draft(segment, system, stage, text, model_id)
    }

    pub async fn run_zero_shot(&self, segment: &Segment, model_id: &str) -> Result<ZeroShotResult, PipelineError> {
        let mut transcript = Vec::new();
        let draft = self
            .translate(
                segment,
                model_id,
                SystemKind::ZeroShot,
                DraftStage::Final,
                &mut transcript,
            )
            .await?;
        Ok(ZeroShotResult { draft, transcript })
    }

    pub async fn run_single_agent(
        &self,
        segment: &Segment,
        model_id: &str,
    ) -> Result<SingleAgentResult, PipelineError> {
        let mut transcript = Vec::new();
        let initial = self
            .translate(
                segment,
                model_id,
                SystemKind::SingleAgent,
                DraftStage::Initial,
                &mut transcript,
            )
            .await?;
        let prompt = self
            .prompts
            .render_single_agent(&segment.pair, &segment.source_text, &initial.text)
            .map_err(|source| PipelineError::Core {
                segment_id: segment.id.clone(),
                source,
            })?;
        let req = self.request(TemplateId::SingleAgentRefine, model_id, prompt);
        let reply = self.call(segment, CallRole::SelfRefine, req, &mut transcript).await?;

        let origin = format!("single_agent:{model_id}");
        let mut self_annotations =
            parse_annotations(&reply.text, None).into_set(&segment.id, &initial.draft_id, &origin);
        self_annotations.raw_text = reply.text.clone();

        let candidate = match reply.outcome {
            Outcome::Refusal => Err(FallbackReason::Refusal),
            Outcome::Completed => match extract_refined_translation(&reply.text) {
                None => Err(FallbackReason::NoTranslationFound),
                Some(t) if t.trim() == initial.text.trim() => Err(FallbackReason::NoChange),
                Some(t) => Ok(t),
            },
        };
        let (final_draft, fell_back, fallback_reason) = match candidate {
            Ok(text) => (
                self.draft(segment, SystemKind::SingleAgent, DraftStage::Final, text, model_id)?,
                false,
                None,
            ),
            Err(reason) => {
                tracing::info!(segment = %segment.id, ?reason, "self-refinement fell back to the initial draft");
                let text = initial.text.clone();
                (
                    self.draft(segment, SystemKind::SingleAgent, DraftStage::Final, text, model_id)?,
                    true,
                    Some(reason),
                )
            }
        };
        Ok(SingleAgentResult {
            initial,
            self_annotation_raw: reply.text,
            self_annotations,
            final_draft,
            fell_back,
            fallback_reason,
            transcript,
        })
    }

    pub async fn run_maats(
        &self,
        segment: &Segment,
        model_id: &str,
        categories: &[MqmCategory],
    ) -> Result<MaatsResult, PipelineError> {
        let categories = validate_categories(categories)?;
        let mut transcript = Vec::new();
        let mut warnings = Vec::new();
        let initial = self
            .translate(
                segment,
                model_id,
                SystemKind::Maats,
                DraftStage::Initial,
                &mut transcript,
            )
            .await?;

        // buffered() yields in input order whatever the completion order
        let evaluated: Vec<(MqmCategory, CacheKey, Result<ChatResponse, GatewayError>)> =
            stream::iter(categories.iter().copied())
                .map(|category| {
                    let prompt =
                        self.prompts
                            .render_evaluator(category, &segment.pair, &segment.source_text, &initial.text);
                    let req = self.request(TemplateId::Evaluator(category), model_id, prompt);
                    async move {
                        let digest = cache_key(&req);
                        (category, digest, self.gateway.complete(&req).await)
                    }
                })
                .buffered(self.config.evaluator_concurrency.max(1))
                .collect()
                .await;

        let mut annotation_sets = Vec::with_capacity(evaluated.len());
        for (category, digest, result) in evaluated {
            let origin = format!("evaluator_{}:{model_id}", category.slug());
            match result {
                Ok(reply) => {
                    let report = parse_annotations(&reply.text, Some(category));
                    for w in &report.warnings {
                        warnings.push(format!("{} evaluator line {}: {}", category.slug(), w.line, w.reason));
                    }
                    if reply.is_refusal() {
                        warnings.push(format!("{} evaluator refused", category.slug()));
                    }
                    let mut set = report.into_set(&segment.id, &initial.draft_id, &origin);
                    set.category = Some(category);
                    set.raw_text = reply.text.clone();
                    annotation_sets.push(set);
                    transcript.push(TranscriptEntry {
                        role: CallRole::Evaluator(category),
                        digest,
                        response: Some(reply),
                    });
                }
                Err(source) if self.config.strict => {
                    return Err(PipelineError::EvaluatorFailed {
                        segment_id: segment.id.clone(),
                        category,
                        source,
                    });
                }
                Err(source) => {
                    tracing::warn!(segment = %segment.id, %category, error = %source, "evaluator failed; continuing");
                    warnings.push(format!("{} evaluator failed: {source}", category.slug()));
                    let mut set = AnnotationSet::new(segment.id.clone(), initial.draft_id.clone());
                    set.category = Some(category);
                    set.error = Some(source.to_string());
                    annotation_sets.push(set);
                    transcript.push(TranscriptEntry {
                        role: CallRole::Evaluator(category),
                        digest,
                        response: None,
                    });
                }
            }
        }

        let prioritized = prioritize(&annotation_sets);
        let core_err = |source| PipelineError::Core {
            segment_id: segment.id.clone(),
            source,
        };
        let prompt = self
            .prompts
            .render_editor(
                &segment.pair,
                &segment.source_text,
                &initial.text,
                &annotation_sets,
                self.config.editor_context,
            )
            .map_err(core_err)?;
        let context_tokens = estimate_tokens(&segment.source_text)
            + estimate_tokens(&initial.text)
            + annotation_sets
                .iter()
                .flat_map(|s| &s.annotations)
                .map(|a| estimate_tokens(&maats_core::parser::serialize_one(a)))
                .sum::<usize>();
        if context_tokens > self.config.editor_token_budget {
            tracing::warn!(segment = %segment.id, context_tokens, "editor context over token budget");
            warnings.push(format!(
                "editor context ~{context_tokens} tokens exceeds budget {}",
                self.config.editor_token_budget
            ));
        }
        let req = self.request(TemplateId::Editor, model_id, prompt);
        let reply = self.call(segment, CallRole::Editor, req, &mut transcript).await?;
        if reply.is_refusal() {
            return Err(PipelineError::EditorRefused {
                segment_id: segment.id.clone(),
            });
        }
        let extracted = extract_editor_translation(&reply.text).map_err(core_err)?;
        warnings.extend(extracted.warnings.into_iter().map(|w| format!("editor: {w}")));
        let final_draft = self.draft(segment, SystemKind::Maats, DraftStage::Final, extracted.text, model_id)?;
        Ok(MaatsResult {
            initial,
            annotation_sets,
            prioritized,
            final_draft,
            transcript,
            warnings,
        })
    }
}
