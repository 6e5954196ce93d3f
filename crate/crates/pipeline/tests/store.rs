use std::fs;
use std::path::PathBuf;

use maats_core::{DraftStage, LanguagePair, MqmCategory, Severity, SystemKind, TranslationDraft};
use maats_pipeline::{
    dataset_digest, ingest_dataset, ingest_external_scores, ingest_gold_annotations, AnnotationCounts, AppendOutcome,
    DatasetSource, IngestError, RunManifest, RunRecord, RunStore, StoreError, SCHEMA_VERSION,
};

fn manifest(run_id: &str) -> RunManifest {
    RunManifest {
        schema_version: SCHEMA_VERSION,
        run_id: run_id.to_string(),
        model_id: "m".to_string(),
        approach: SystemKind::ZeroShot,
        pair: LanguagePair::new("en", "de").unwrap(),
        dataset_path: "d.jsonl".to_string(),
        dataset_digest: "0".repeat(64),
        segment_count: 2,
        temperature: 0.0,
        categories: Vec::new(),
        started_at: "2026-01-01T00:00:00Z".to_string(),
        finished_at: None,
        config: serde_json::json!({"k": 1}),
    }
}

fn record(run_id: &str, segment_id: &str, text: &str) -> RunRecord {
    let draft = TranslationDraft::new(segment_id, SystemKind::ZeroShot, DraftStage::Final, text, "m", 0.0).unwrap();
    RunRecord {
        schema_version: SCHEMA_VERSION,
        run_id: run_id.to_string(),
        segment_id: segment_id.to_string(),
        system: SystemKind::ZeroShot,
        model_id: "m".to_string(),
        drafts: vec![draft],
        annotation_sets: Vec::new(),
        prioritized: Vec::new(),
        final_text: text.to_string(),
        fell_back: None,
        fallback_reason: None,
        transcript: Vec::new(),
        warnings: Vec::new(),
    }
}

#[test]
fn append_is_idempotent_and_detects_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    store.create_run(&manifest("r1")).unwrap();
    let a = record("r1", "s1", "Hallo");
    assert_eq!(store.append_record(&a).unwrap(), AppendOutcome::Appended);
    assert_eq!(store.append_record(&a).unwrap(), AppendOutcome::AlreadyPresent);
    let err = store.append_record(&record("r1", "s1", "Servus")).unwrap_err();
    assert!(matches!(err, StoreError::ConflictingRecord { .. }));
    assert_eq!(store.load_records("r1").unwrap(), vec![a]);
    assert_eq!(fs::read_to_string(store.records_path("r1")).unwrap().lines().count(), 1);
}

#[test]
fn unknown_and_duplicate_runs() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    assert!(matches!(
        store.append_record(&record("ghost", "s1", "x")),
        Err(StoreError::UnknownRun(_))
    ));
    store.create_run(&manifest("r1")).unwrap();
    assert!(matches!(
        store.create_run(&manifest("r1")),
        Err(StoreError::RunExists(_))
    ));
    assert!(matches!(
        store.create_run(&manifest("../x")),
        Err(StoreError::InvalidRunId(_))
    ));
    assert_eq!(store.list_runs().unwrap(), ["r1"]);
}

#[test]
fn storage_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let writer = store.create_run(&manifest("r1")).unwrap();
    writer.append(&record("r1", "s1", "Eins")).unwrap();
    writer.append(&record("r1", "s2", "Zwei")).unwrap();
    let bytes = fs::read_to_string(store.records_path("r1")).unwrap();
    let reemitted: String = store
        .load_records("r1")
        .unwrap()
        .iter()
        .map(|r| r.to_line() + "\n")
        .collect();
    assert_eq!(bytes, reemitted);

    let finished = store.finish_run("r1", "2026-01-01T00:01:00Z".to_string()).unwrap();
    assert_eq!(store.load_manifest("r1").unwrap(), finished);
    assert_eq!(finished.config, serde_json::json!({"k": 1}));
}

#[test]
fn wrong_schema_version_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    store.create_run(&manifest("r1")).unwrap();
    let mut r = record("r1", "s1", "x");
    r.schema_version = 99;
    fs::write(store.records_path("r1"), r.to_line() + "\n").unwrap();
    assert!(matches!(
        store.load_records("r1"),
        Err(StoreError::Corrupt { line: 1, .. })
    ));
}

#[test]
fn two_hundred_line_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wmt.jsonl");
    let body: String = (1..=200)
        .map(|i| format!("{{\"id\":\"seg-{i}\",\"source\":\"Sentence number {i}.\",\"reference\":\"Satz {i}.\"}}\n"))
        .collect();
    fs::write(&path, body).unwrap();
    let src = DatasetSource::Jsonl { path };
    let segs = ingest_dataset(&src, &LanguagePair::new("en", "de").unwrap()).unwrap();
    assert_eq!(segs.len(), 200);
    assert_eq!(segs[199].id, "seg-200");
    assert_eq!(dataset_digest(&src).unwrap(), dataset_digest(&src).unwrap());
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/en-de")
        .join(name)
}

#[test]
fn gold_annotations_map_aliases_and_skip_sentinels() {
    let gold = ingest_gold_annotations(&fixture("gold.jsonl")).unwrap();
    let s3 = &gold.sets["s3"];
    assert_eq!(s3.annotations[1].category, MqmCategory::LinguisticConventions);
    assert_eq!(s3.annotations[1].severity, Severity::Minor);
    assert_eq!(gold.sets["s5"].annotations.len(), 0);
    assert!(gold.warnings.iter().any(|w| w.contains("no-error")));
    assert_eq!(gold.sets.values().map(|s| s.annotations.len()).sum::<usize>(), 6);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    assert!(ingest_gold_annotations(&empty).unwrap().sets.is_empty());

    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"segment_id\":\"s1\",\"category\":\"grammarish\",\"severity\":\"major\"}\n",
    )
    .unwrap();
    assert!(matches!(
        ingest_gold_annotations(&bad),
        Err(IngestError::UnknownCategory { line: 1, .. })
    ));
}

#[test]
fn external_scores_guard_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("comet.jsonl");
    let line = "{\"segment_id\":\"s1\",\"system\":\"maats\",\"metric_name\":\"COMET\",\"score\":0.81}\n";
    fs::write(&path, line).unwrap();
    assert_eq!(ingest_external_scores(&path).unwrap()[0].score, 0.81);
    fs::write(&path, format!("{line}{line}")).unwrap();
    assert!(matches!(
        ingest_external_scores(&path),
        Err(IngestError::MalformedRecord { line: 2, .. })
    ));
}

#[test]
fn annotation_counts_are_derived_from_records() {
    let mut r = record("r1", "s1", "x");
    let mut set = maats_core::AnnotationSet::new("s1", "d");
    for (cat, sev) in [
        (MqmCategory::Accuracy, Severity::Major),
        (MqmCategory::Accuracy, Severity::Major),
        (MqmCategory::Style, Severity::Minor),
    ] {
        set.annotations
            .push(maats_core::ErrorAnnotation::new(cat, "x", sev, "").unwrap());
    }
    r.annotation_sets.push(set);
    let counts = AnnotationCounts::from_records([&r]);
    assert_eq!(counts.total(SystemKind::ZeroShot), 3);
    assert_eq!(counts.by_category(SystemKind::ZeroShot, MqmCategory::Accuracy), 2);
    assert_eq!(counts.total(SystemKind::Maats), 0);
}
