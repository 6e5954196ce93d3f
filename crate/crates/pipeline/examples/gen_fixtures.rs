//! Regenerates `fixtures/en-de/replay.jsonl` from the scripted model.
//!
//! cargo run -p maats-pipeline --example gen_fixtures

use std::path::PathBuf;

use maats_core::{LanguagePair, MqmCategory, PromptLibrary};
use maats_gateway::cache::write_records;
use maats_pipeline::scripted::record_replay;
use maats_pipeline::{ingest_dataset, DatasetSource, OrchestratorConfig, ScriptedModel};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/en-de");
    let pair = LanguagePair::new("en", "de")?;
    let segments = ingest_dataset(
        &DatasetSource::Jsonl {
            path: dir.join("dataset.jsonl"),
        },
        &pair,
    )?;
    let model = ScriptedModel::from_file(&dir.join("script.json"), PromptLibrary::default())?;
    let records = record_replay(
        model,
        "gpt-4o",
        &segments,
        &MqmCategory::ALL,
        OrchestratorConfig::default(),
    )
    .await?;
    let out = dir.join("replay.jsonl");
    write_records(&out, &records)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}
