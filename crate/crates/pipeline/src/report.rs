//! Tab-separated report tables derived from stored runs: corpus scores,
//! significance tests, confusion counts against gold findings, and finding
//! counts per category and severity.

use std::collections::{BTreeMap, BTreeSet};

use maats_core::metrics::{
    anova_f, bleu, confusion, meteor_lite, paired_bootstrap, scheme_for_target, sentence_bleu, tokenize, MatchMode,
    MetricError, TokenScheme, TokenizedText,
};
use maats_core::{AnnotationSet, MqmCategory, Severity, SystemKind};
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{ExternalScore, GoldAnnotations};
use crate::record::{RunManifest, RunRecord};
use crate::store::AnnotationCounts;

pub const BLEU: &str = "BLEU";
pub const METEOR: &str = "METEOR";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("no runs given")]
    NoRuns,
    #[error("segment `{0}` has no reference translation")]
    MissingReference(String),
    #[error("runs for {direction} {model_id} cover different segments ({first} vs {other})")]
    SegmentMismatch {
        direction: String,
        model_id: String,
        first: String,
        other: String,
    },
    #[error("run `{run_id}`: external score for segment `{segment_id}` names system {system}, run is {approach}")]
    ScoreSystemMismatch {
        run_id: String,
        segment_id: String,
        system: SystemKind,
        approach: SystemKind,
    },
    #[error("run `{run_id}`: metric {metric} is missing for segment `{segment_id}`")]
    MissingScore {
        run_id: String,
        metric: String,
        segment_id: String,
    },
    #[error("gold findings name segment `{0}`, which no run contains")]
    UnknownGoldSegment(String),
}

impl ReportError {
    pub fn kind(&self) -> &'static str {
        match self {
            ReportError::Metric(_) => "metric_error",
            ReportError::NoRuns => "no_runs",
            ReportError::MissingReference(_) => "missing_reference",
            ReportError::SegmentMismatch { .. } => "segment_mismatch",
            ReportError::ScoreSystemMismatch { .. } => "score_system_mismatch",
            ReportError::MissingScore { .. } => "missing_score",
            ReportError::UnknownGoldSegment(_) => "unknown_gold_segment",
        }
    }
}

/// One stored run plus what scoring needs from outside the store.
#[derive(Debug, Clone)]
pub struct RunInput {
    pub manifest: RunManifest,
    pub records: Vec<RunRecord>,
    /// Reference translations by segment id.
    pub references: BTreeMap<String, String>,
    /// Scores from external scorers such as COMET or BLEURT.
    pub external: Vec<ExternalScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Label linguistic conventions as "Fluency".
    pub fluency_label: bool,
    pub match_mode: MatchMode,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            resamples: 10_000,
            seed: 42,
            fluency_label: false,
            match_mode: MatchMode::CategoryCount,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub direction: String,
    pub model_id: String,
    pub system: SystemKind,
    pub scheme: TokenScheme,
    pub segments: usize,
    /// Corpus BLEU and mean METEOR on a 0-100 scale, external metrics as given.
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceRow {
    pub metric: String,
    pub direction: String,
    pub model_id: String,
    /// `bootstrap` or `anova`.
    pub test: &'static str,
    /// `maats>zero_shot` style for bootstrap, the system list for ANOVA.
    pub comparison: String,
    pub statistic: Option<f64>,
    /// `None` when the test is undefined on this data.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub scores: Vec<ScoreRow>,
    pub significance: Vec<SignificanceRow>,
    pub notes: Vec<String>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

fn tsv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl EvalReport {
    pub fn metric_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.scores.iter().flat_map(|r| r.scores.keys()).collect();
        let mut out = vec![BLEU.to_string(), METEOR.to_string()];
        out.extend(names.into_iter().filter(|n| *n != BLEU && *n != METEOR).cloned());
        out
    }

    pub fn scores_tsv(&self) -> String {
        let metrics = self.metric_names();
        let mut header = strings(&["direction", "model", "system", "tokenization", "segments"]);
        header.extend(metrics.iter().cloned());
        tsv(
            &header,
            self.scores.iter().map(|r| {
                let mut row = vec![
                    r.direction.clone(),
                    r.model_id.clone(),
                    r.system.to_string(),
                    r.scheme.to_string(),
                    r.segments.to_string(),
                ];
                row.extend(metrics.iter().map(|m| fmt_opt(r.scores.get(m).copied())));
                row
            }),
        )
    }

    pub fn significance_tsv(&self) -> String {
        tsv(
            &strings(&["metric", "direction", "model", "test", "comparison", "statistic", "p"]),
            self.significance.iter().map(|r| {
                vec![
                    r.metric.clone(),
                    r.direction.clone(),
                    r.model_id.clone(),
                    r.test.to_string(),
                    r.comparison.clone(),
                    fmt_opt(r.statistic),
                    fmt_opt(r.p),
                ]
            }),
        )
    }
}

/// Per-segment scores of one run, metric -> segment -> score.
type SegmentScores = BTreeMap<String, BTreeMap<String, f64>>;

fn score_run(run: &RunInput, scheme: TokenScheme) -> Result<(f64, SegmentScores), ReportError> {
    let mut candidates = Vec::with_capacity(run.records.len());
    let mut references: Vec<TokenizedText> = Vec::with_capacity(run.records.len());
    let mut per_segment = SegmentScores::new();
    for r in &run.records {
        let reference = run
            .references
            .get(&r.segment_id)
            .ok_or_else(|| ReportError::MissingReference(r.segment_id.clone()))?;
        let c = tokenize(&r.final_text, scheme);
        let rf = tokenize(reference, scheme);
        per_segment
            .entry(BLEU.to_string())
            .or_default()
            .insert(r.segment_id.clone(), 100.0 * sentence_bleu(&c, &rf)?);
        per_segment
            .entry(METEOR.to_string())
            .or_default()
            .insert(r.segment_id.clone(), 100.0 * meteor_lite(&c, &rf)?.score);
        candidates.push(c);
        references.push(rf);
    }
    let corpus_bleu = 100.0 * bleu(&candidates, &references)?;
    for s in &run.external {
        if s.system != run.manifest.approach {
            return Err(ReportError::ScoreSystemMismatch {
                run_id: run.manifest.run_id.clone(),
                segment_id: s.segment_id.clone(),
                system: s.system,
                approach: run.manifest.approach,
            });
        }
        per_segment
            .entry(s.metric_name.clone())
            .or_default()
            .insert(s.segment_id.clone(), s.score);
    }
    Ok((corpus_bleu, per_segment))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Scores every run and tests differences between systems within each
/// (direction, model) group. BLEU in the score table is corpus-level; the
/// significance tests run on sentence-level scores.
pub fn evaluate(runs: &[RunInput], config: &ReportConfig) -> Result<EvalReport, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let mut groups: BTreeMap<(String, String), Vec<&RunInput>> = BTreeMap::new();
    for run in runs {
        groups
            .entry((run.manifest.pair.to_string(), run.manifest.model_id.clone()))
            .or_default()
            .push(run);
    }
    let mut scores = Vec::new();
    let mut significance = Vec::new();
    let mut schemes = BTreeSet::new();
    for ((direction, model_id), mut group) in groups {
        group.sort_by_key(|r| (r.manifest.approach, r.manifest.run_id.clone()));
        let ids = |r: &RunInput| r.records.iter().map(|x| x.segment_id.clone()).collect::<BTreeSet<_>>();
        let first_ids = ids(group[0]);
        for other in &group[1..] {
            if ids(other) != first_ids {
                return Err(ReportError::SegmentMismatch {
                    direction,
                    model_id,
                    first: group[0].manifest.run_id.clone(),
                    other: other.manifest.run_id.clone(),
                });
            }
        }
        let scheme = scheme_for_target(&group[0].manifest.pair.target);
        schemes.insert(scheme);
        let mut by_system: Vec<(SystemKind, SegmentScores)> = Vec::new();
        for run in &group {
            let (corpus_bleu, per_segment) = score_run(run, scheme)?;
            let mut table = BTreeMap::new();
            for (metric, values) in &per_segment {
                let v: Vec<f64> = values.values().copied().collect();
                table.insert(metric.clone(), if metric == BLEU { corpus_bleu } else { mean(&v) });
            }
            scores.push(ScoreRow {
                direction: direction.clone(),
                model_id: model_id.clone(),
                system: run.manifest.approach,
                scheme,
                segments: run.records.len(),
                scores: table,
            });
            by_system.push((run.manifest.approach, per_segment));
        }

        let metrics: BTreeSet<String> = by_system.iter().flat_map(|(_, s)| s.keys().cloned()).collect();
        for metric in metrics {
            let mut columns: Vec<(SystemKind, Vec<f64>)> = Vec::new();
            for ((system, per_segment), run) in by_system.iter().zip(&group) {
                let values = per_segment.get(&metric);
                let column = first_ids
                    .iter()
                    .map(|id| {
                        values
                            .and_then(|v| v.get(id))
                            .copied()
                            .ok_or_else(|| ReportError::MissingScore {
                                run_id: run.manifest.run_id.clone(),
                                metric: metric.clone(),
                                segment_id: id.clone(),
                            })
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                columns.push((*system, column));
            }
            if let Some((_, ours)) = columns.iter().find(|(s, _)| *s == SystemKind::Maats) {
                for (other, theirs) in columns.iter().filter(|(s, _)| *s != SystemKind::Maats) {
                    let p = paired_bootstrap(ours, theirs, config.resamples, config.seed).ok();
                    significance.push(SignificanceRow {
                        metric: metric.clone(),
                        direction: direction.clone(),
                        model_id: model_id.clone(),
                        test: "bootstrap",
                        comparison: format!("maats>{other}"),
                        statistic: p.as_ref().map(|b| b.mean_a - b.mean_b),
                        p: p.map(|b| b.p),
                    });
                }
            }
            if columns.len() >= 2 {
                let anova = anova_f(&columns.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>()).ok();
                significance.push(SignificanceRow {
                    metric: metric.clone(),
                    direction: direction.clone(),
                    model_id: model_id.clone(),
                    test: "anova",
                    comparison: columns.iter().map(|(s, _)| s.as_str()).collect::<Vec<_>>().join(","),
                    statistic: anova.as_ref().map(|a| a.f),
                    p: anova.map(|a| a.p),
                });
            }
        }
    }
    let mut notes = vec![
        "BLEU: corpus BLEU-4, 0-100 scale, add-one smoothing for n>1 precisions with zero matches".to_string(),
        "METEOR: exact-match METEOR-lite, mean of segment scores, 0-100 scale".to_string(),
        format!(
            "significance: sentence-level scores; paired bootstrap with {} resamples, seed {}",
            config.resamples, config.seed
        ),
    ];
    notes.push(format!(
        "tokenization: {}",
        schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    ));
    Ok(EvalReport {
        scores,
        significance,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionRow {
    pub run_id: String,
    pub direction: String,
    pub model_id: String,
    pub system: SystemKind,
    /// `None` for the per-run total row.
    pub category: Option<MqmCategory>,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionReport {
    pub rows: Vec<ConfusionRow>,
    pub fluency_label: bool,
    pub severity_aware: bool,
}

impl ConfusionReport {
    pub fn to_tsv(&self) -> String {
        tsv(
            &strings(&["run", "direction", "model", "system", "category", "tp", "fp", "fn"]),
            self.rows.iter().map(|r| {
                vec![
                    r.run_id.clone(),
                    r.direction.clone(),
                    r.model_id.clone(),
                    r.system.to_string(),
                    r.category
                        .map_or("Total", |c| c.report_label(self.fluency_label))
                        .to_string(),
                    r.tp.to_string(),
                    r.fp.to_string(),
                    r.fn_.to_string(),
                ]
            }),
        )
    }
}

/// Counts each run's findings against gold findings. A segment without gold
/// lines is taken to have no gold errors.
pub fn confusion_report(
    runs: &[(RunManifest, Vec<RunRecord>)],
    gold: &GoldAnnotations,
    config: &ReportConfig,
) -> Result<ConfusionReport, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let all_ids: BTreeSet<&str> = runs
        .iter()
        .flat_map(|(_, records)| records.iter().map(|r| r.segment_id.as_str()))
        .collect();
    if let Some(unknown) = gold.sets.keys().find(|id| !all_ids.contains(id.as_str())) {
        return Err(ReportError::UnknownGoldSegment(unknown.clone()));
    }
    let mut rows = Vec::new();
    for (manifest, records) in runs {
        let pred: Vec<AnnotationSet> = records.iter().map(RunRecord::merged_annotations).collect();
        let gold_sets: Vec<AnnotationSet> = records
            .iter()
            .map(|r| {
                gold.sets
                    .get(&r.segment_id)
                    .cloned()
                    .unwrap_or_else(|| AnnotationSet::new(r.segment_id.clone(), "gold"))
            })
            .collect();
        let counts = confusion(&pred, &gold_sets, config.match_mode)?;
        let row = |category: Option<MqmCategory>, c: maats_core::metrics::CategoryCounts| ConfusionRow {
            run_id: manifest.run_id.clone(),
            direction: manifest.pair.to_string(),
            model_id: manifest.model_id.clone(),
            system: manifest.approach,
            category,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        };
        for category in MqmCategory::ALL {
            rows.push(row(Some(category), counts.get(category)));
        }
        rows.push(row(None, counts.totals()));
    }
    Ok(ConfusionReport {
        rows,
        fluency_label: config.fluency_label,
        severity_aware: config.match_mode == MatchMode::SeverityAware,
    })
}

/// Finding counts per run, category and severity.
pub fn counts_tsv(runs: &[(RunManifest, Vec<RunRecord>)], fluency_label: bool) -> String {
    let mut rows = Vec::new();
    for (manifest, records) in runs {
        let counts = AnnotationCounts::from_records(records);
        let per_system = counts.counts.get(&manifest.approach);
        for category in MqmCategory::ALL {
            let by_sev = per_system.and_then(|c| c.get(&category));
            let get = |s: Severity| by_sev.and_then(|m| m.get(&s)).copied().unwrap_or(0);
            let (c, ma, mi) = (get(Severity::Critical), get(Severity::Major), get(Severity::Minor));
            rows.push(vec![
                manifest.run_id.clone(),
                manifest.pair.to_string(),
                manifest.model_id.clone(),
                manifest.approach.to_string(),
                category.report_label(fluency_label).to_string(),
                c.to_string(),
                ma.to_string(),
                mi.to_string(),
                (c + ma + mi).to_string(),
            ]);
        }
    }
    tsv(
        &strings(&[
            "run",
            "direction",
            "model",
            "system",
            "category",
            "critical",
            "major",
            "minor",
            "total",
        ]),
        rows,
    )
}
