//! Core of the MAATS multi-agent translation toolkit: the MQM domain model,
//! agent prompt templates, annotation parsing, and evaluation statistics.

pub mod error;
pub mod metrics;
pub mod parser;
pub mod prioritize;
pub mod prompts;
pub mod types;

pub use error::CoreError;
pub use parser::{
    extract_editor_translation, extract_refined_translation, parse_annotations, serialize_annotations, ParseReport,
};
pub use prioritize::prioritize;
pub use prompts::{EditorContext, PromptLibrary, TemplateId};
pub use types::{
    category_from_slug, severity_rank, AnnotationSet, DraftStage, ErrorAnnotation, LanguagePair, MqmCategory, Segment,
    Severity, SystemKind, TranslationDraft,
};
