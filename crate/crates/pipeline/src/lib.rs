//! Segment orchestration for the three approaches, dataset ingestion and the
//! file-backed run store.

pub mod dataset;
pub mod orchestrator;
pub mod record;
pub mod report;
pub mod runner;
pub mod scripted;
pub mod store;

pub use dataset::{
    dataset_digest, ingest_dataset, ingest_external_scores, ingest_gold_annotations, DatasetSource, ExternalScore,
    GoldAnnotations, IngestError,
};
pub use orchestrator::{
    estimate_tokens, validate_categories, CallRole, FallbackReason, MaatsResult, Orchestrator, OrchestratorConfig,
    PipelineError, SingleAgentResult, TranscriptEntry, ZeroShotResult,
};
pub use record::{RunManifest, RunRecord, TranscriptDigest, SCHEMA_VERSION};
pub use report::{
    confusion_report, counts_tsv, evaluate, ConfusionReport, EvalReport, ReportConfig, ReportError, RunInput,
};
pub use runner::{run_dataset, run_segment, RunError, RunSummary};
pub use scripted::{ScriptedModel, ScriptedSegment};
pub use store::{AnnotationCounts, AppendOutcome, RunStore, RunWriter, StoreError};
