//! `run`, `eval`, `confusion` and `dump-prompts`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use maats_core::metrics::MatchMode;
use maats_core::{LanguagePair, MqmCategory, PromptLibrary, Segment, SystemKind};
use maats_gateway::{Gateway, GatewayConfig};
use maats_pipeline::{
    confusion_report, counts_tsv, dataset_digest, evaluate, ingest_dataset, ingest_external_scores,
    ingest_gold_annotations, run_dataset, validate_categories, DatasetSource, Orchestrator, RunInput, RunManifest,
    RunRecord, RunStore, RunSummary, SCHEMA_VERSION,
};
use serde_json::json;
use tracing::{info, warn};

use crate::cli::{ConfusionArgs, DumpPromptsArgs, EvalArgs, RunArgs};
use crate::config::Config;
use crate::error::{io_error, CliError};

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn parse_pair(text: &str, allow_any: bool) -> Result<LanguagePair, CliError> {
    let parts: Vec<&str> = text.split(['-', '_']).filter(|p| !p.is_empty()).collect();
    match parts.as_slice() {
        [src, tgt] => Ok(LanguagePair::build(src, tgt, allow_any)?),
        _ => Err(CliError::new(
            "invalid_argument",
            format!("malformed language pair `{text}`"),
        )),
    }
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(path).map_err(|e| io_error(path, e))
}

fn dataset_source(args: &RunArgs) -> Result<DatasetSource, CliError> {
    if let Some(path) = &args.dataset {
        return Ok(DatasetSource::Jsonl { path: absolute(path)? });
    }
    let source = args
        .source
        .as_deref()
        .ok_or_else(|| CliError::new("usage", "either --dataset or --source is required"))?;
    Ok(DatasetSource::Parallel {
        source: absolute(source)?,
        reference: args.references.as_deref().map(absolute).transpose()?,
        ids: args.ids.as_deref().map(absolute).transpose()?,
    })
}

/// `<src>-<tgt>-<model>-<approach>` with characters the store rejects replaced by `_`.
pub fn default_run_id(pair: &LanguagePair, model: &str, approach: SystemKind) -> String {
    let model: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{pair}-{model}-{approach}")
}

pub fn prompt_library(config: &Config) -> Result<PromptLibrary, CliError> {
    let library = PromptLibrary::default();
    Ok(match &config.run.prompts_dir {
        Some(dir) => library.with_overrides(dir)?,
        None => library,
    })
}

/// The dataset a run was launched on, read back from its manifest.
pub fn manifest_dataset(manifest: &RunManifest) -> Result<DatasetSource, CliError> {
    let value = manifest.config.get("dataset").cloned().ok_or_else(|| {
        CliError::new(
            "missing_dataset",
            format!("run `{}` does not record its dataset", manifest.run_id),
        )
    })?;
    serde_json::from_value(value)
        .map_err(|e| CliError::new("missing_dataset", format!("run `{}`: {e}", manifest.run_id)))
}

/// Reloads a run's segments and checks the files still match the recorded digest.
pub fn manifest_segments(manifest: &RunManifest) -> Result<Vec<Segment>, CliError> {
    let source = manifest_dataset(manifest)?;
    let digest = dataset_digest(&source)?;
    if digest != manifest.dataset_digest {
        return Err(CliError::new(
            "dataset_changed",
            format!(
                "dataset of run `{}` changed since the run: {}",
                manifest.run_id,
                source.describe()
            ),
        ));
    }
    Ok(ingest_dataset(&source, &manifest.pair)?)
}

pub async fn run(args: RunArgs, config: &Config) -> Result<RunSummary, CliError> {
    let pair = parse_pair(&args.pair, config.run.allow_any_language)?;
    let categories = if args.approach == SystemKind::Maats {
        if args.categories.is_empty() {
            MqmCategory::ALL.to_vec()
        } else {
            validate_categories(&args.categories)?
        }
    } else {
        Vec::new()
    };
    let source = dataset_source(&args)?;
    let segments = ingest_dataset(&source, &pair)?;
    let digest = dataset_digest(&source)?;

    let mut orch_config = config.orchestrator();
    orch_config.strict = args.strict;
    if let Some(t) = args.temperature {
        orch_config.temperature = t;
    }
    if let Some(n) = args.evaluator_concurrency {
        orch_config.evaluator_concurrency = n.max(1);
    }
    let segment_concurrency = args.concurrency.unwrap_or(config.run.segment_concurrency).max(1);
    let gateway_config = match &args.replay {
        Some(path) => {
            let mut g = GatewayConfig::replay_only(absolute(path)?);
            g.temperature_ceiling = config.gateway.temperature_ceiling;
            g
        }
        None => config.gateway.clone(),
    };
    if !(0.0..=gateway_config.temperature_ceiling).contains(&orch_config.temperature) {
        return Err(CliError::new(
            "invalid_request",
            format!(
                "temperature {} outside [0, {}]",
                orch_config.temperature, gateway_config.temperature_ceiling
            ),
        ));
    }
    let gateway = Gateway::from_config(&gateway_config)?;
    let prompts = prompt_library(config)?;

    let run_id = args
        .run_id
        .clone()
        .unwrap_or_else(|| default_run_id(&pair, &args.model, args.approach));
    let store = RunStore::open(&config.store)?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        run_id: run_id.clone(),
        model_id: args.model.clone(),
        approach: args.approach,
        pair: pair.clone(),
        dataset_path: source.describe(),
        dataset_digest: digest,
        segment_count: segments.len(),
        temperature: orch_config.temperature,
        categories: categories.clone(),
        started_at: timestamp(),
        finished_at: None,
        config: json!({
            "dataset": source,
            "strict": orch_config.strict,
            "max_output_tokens": orch_config.max_output_tokens,
            "evaluator_concurrency": orch_config.evaluator_concurrency,
            "segment_concurrency": segment_concurrency,
            "editor_context": orch_config.editor_context,
            "editor_token_budget": orch_config.editor_token_budget,
            "prompts_dir": config.run.prompts_dir,
        }),
    };
    let writer = if args.resume && store.exists(&run_id) {
        let existing = store.load_manifest(&run_id)?;
        let same = existing.model_id == manifest.model_id
            && existing.approach == manifest.approach
            && existing.pair == manifest.pair
            && existing.dataset_digest == manifest.dataset_digest
            && existing.categories == manifest.categories;
        if !same {
            return Err(CliError::new(
                "resume_mismatch",
                format!("run `{run_id}` was started with a different model, approach, pair, dataset or category list"),
            ));
        }
        store.writer(&run_id)?
    } else {
        store.create_run(&manifest)?
    };

    let orchestrator = Orchestrator::new(Arc::new(gateway), Arc::new(prompts), orch_config);
    let summary = run_dataset(
        &orchestrator,
        &writer,
        args.approach,
        &segments,
        &args.model,
        &categories,
        segment_concurrency,
    )
    .await?;
    store.finish_run(&run_id, timestamp())?;
    Ok(summary)
}

fn load_runs(store: &RunStore, ids: &[String]) -> Result<Vec<(RunManifest, Vec<RunRecord>)>, CliError> {
    ids.iter()
        .map(|id| Ok((store.load_manifest(id)?, store.load_records(id)?)))
        .collect()
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn eval(args: EvalArgs, config: &Config) -> Result<serde_json::Value, CliError> {
    let store = RunStore::open(&config.store)?;
    let mut external: BTreeMap<String, PathBuf> = BTreeMap::new();
    for spec in &args.scores {
        let (run, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::new("usage", format!("--scores expects RUN_ID=PATH, got `{spec}`")))?;
        if !args.runs.iter().any(|r| r == run) {
            return Err(CliError::new(
                "usage",
                format!("--scores names run `{run}` not given with --run"),
            ));
        }
        external.insert(run.to_string(), PathBuf::from(path));
    }
    let runs = load_runs(&store, &args.runs)?;
    let mut inputs = Vec::with_capacity(runs.len());
    for (manifest, records) in &runs {
        let references = manifest_segments(manifest)?
            .into_iter()
            .filter_map(|s| s.reference_text.map(|r| (s.id, r)))
            .collect();
        let external = match external.get(&manifest.run_id) {
            Some(path) => ingest_external_scores(path)?,
            None => Vec::new(),
        };
        inputs.push(RunInput {
            manifest: manifest.clone(),
            records: records.clone(),
            references,
            external,
        });
    }
    let mut report_config = config.report();
    report_config.fluency_label |= args.fluency_label;
    if let Some(n) = args.resamples {
        report_config.resamples = n;
    }
    if let Some(s) = args.seed {
        report_config.seed = s;
    }
    let report = evaluate(&inputs, &report_config)?;
    let counts = counts_tsv(&runs, report_config.fluency_label);
    for note in &report.notes {
        info!("{note}");
    }
    match &args.out {
        Some(dir) => {
            let files = [
                ("scores.tsv", report.scores_tsv()),
                ("significance.tsv", report.significance_tsv()),
                ("counts.tsv", counts),
            ];
            for (name, text) in &files {
                write_file(&dir.join(name), text)?;
            }
            Ok(json!({
                "runs": args.runs,
                "out": dir,
                "files": files.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
                "notes": report.notes,
            }))
        }
        None => {
            print!("{}\n{}\n{}", report.scores_tsv(), report.significance_tsv(), counts);
            Ok(serde_json::Value::Null)
        }
    }
}

pub fn confusion(args: ConfusionArgs, config: &Config) -> Result<serde_json::Value, CliError> {
    let store = RunStore::open(&config.store)?;
    let gold = ingest_gold_annotations(&args.gold)?;
    for w in &gold.warnings {
        warn!("{w}");
    }
    let runs = load_runs(&store, &args.runs)?;
    let mut report_config = config.report();
    report_config.fluency_label |= args.fluency_label;
    if args.severity_aware {
        report_config.match_mode = MatchMode::SeverityAware;
    }
    let table = confusion_report(&runs, &gold, &report_config)?.to_tsv();
    match &args.out {
        Some(path) => {
            write_file(path, &table)?;
            Ok(json!({"runs": args.runs, "out": path}))
        }
        None => {
            print!("{table}");
            Ok(serde_json::Value::Null)
        }
    }
}

pub fn dump_prompts(args: DumpPromptsArgs, config: &Config) -> Result<serde_json::Value, CliError> {
    let written = prompt_library(config)?.dump(&args.out)?;
    Ok(json!({ "written": written }))
}
