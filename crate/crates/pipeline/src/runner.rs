use futures::stream::{self, StreamExt};
use maats_core::{MqmCategory, Segment, SystemKind};
use serde::Serialize;
use thiserror::Error;

use crate::orchestrator::{Orchestrator, PipelineError};
use crate::record::RunRecord;
use crate::store::{AppendOutcome, RunWriter, StoreError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Pipeline(e) => e.kind(),
            RunError::Store(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub segments: usize,
    pub appended: usize,
    /// Segments already recorded by an earlier invocation.
    pub skipped: usize,
    /// Gateway requests issued by this invocation.
    pub gateway_calls: u64,
    pub cache_hits: u64,
    pub fell_back: usize,
    pub warnings: usize,
}

/// Runs one segment and shapes the result as a record.
pub async fn run_segment(
    orchestrator: &Orchestrator,
    run_id: &str,
    system: SystemKind,
    segment: &Segment,
    model_id: &str,
    categories: &[MqmCategory],
) -> Result<RunRecord, PipelineError> {
    Ok(match system {
        SystemKind::ZeroShot => {
            RunRecord::from_zero_shot(run_id, &orchestrator.run_zero_shot(segment, model_id).await?)
        }
        SystemKind::SingleAgent => {
            RunRecord::from_single_agent(run_id, &orchestrator.run_single_agent(segment, model_id).await?)
        }
        SystemKind::Maats => {
            RunRecord::from_maats(run_id, &orchestrator.run_maats(segment, model_id, categories).await?)
        }
    })
}

/// Processes `segments` with up to `segment_concurrency` in flight and appends
/// records in dataset order. Segments the writer already holds are skipped.
/// Stops at the first failing segment; records before it stay stored.
pub async fn run_dataset(
    orchestrator: &Orchestrator,
    writer: &RunWriter,
    system: SystemKind,
    segments: &[Segment],
    model_id: &str,
    categories: &[MqmCategory],
    segment_concurrency: usize,
) -> Result<RunSummary, RunError> {
    let before = orchestrator.gateway().stats();
    let run_id = writer.run_id().to_string();
    let mut summary = RunSummary {
        run_id: run_id.clone(),
        segments: segments.len(),
        ..RunSummary::default()
    };
    let pending: Vec<&Segment> = segments.iter().filter(|s| !writer.contains(&s.id)).collect();
    summary.skipped = segments.len() - pending.len();

    let mut results = stream::iter(pending)
        .map(|segment| run_segment(orchestrator, &run_id, system, segment, model_id, categories))
        .buffered(segment_concurrency.max(1));
    while let Some(result) = results.next().await {
        let record = result?;
        summary.fell_back += usize::from(record.fell_back == Some(true));
        summary.warnings += record.warnings.len();
        if writer.append(&record)? == AppendOutcome::Appended {
            summary.appended += 1;
        }
    }
    let after = orchestrator.gateway().stats();
    summary.gateway_calls = after.requests - before.requests;
    summary.cache_hits = after.cache_hits - before.cache_hits;
    Ok(summary)
}
