//! Evaluation metrics and significance statistics.
//!
//! Lexical scores (BLEU, METEOR-lite) are computed here; neural scores such as
//! COMET or BLEURT are produced by external scorers and only ingested, after
//! which every statistic treats them like any other per-segment metric.

mod anova;
mod bleu;
mod bootstrap;
mod borda;
mod confusion;
mod meteor;
pub mod special;
mod tokenize;

pub use anova::{anova_f, AnovaResult};
pub use bleu::{bleu, sentence_bleu, BleuStats, MAX_NGRAM};
pub use bootstrap::{paired_bootstrap, BootstrapResult};
pub use borda::{borda, BordaResult, RankingBallot};
pub use confusion::{confusion, CategoryCounts, ConfusionCounts, MatchMode};
pub use meteor::{chunk_count, meteor_lite, Alignment, MeteorScore};
pub use tokenize::{scheme_for_target, tokenize, TokenScheme, TokenizedText};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("tokenization schemes differ: {0} vs {1}")]
    SchemeMismatch(TokenScheme, TokenScheme),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("segment ids differ between predictions and gold (first difference: `{0}`)")]
    SegmentIdMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("invalid ballot: {0}")]
    InvalidBallot(String),
}
