//! Anonymized three-way ranking sessions: task creation, the HTTP API and
//! the Borda export.
//!
//! Files live under `<store>/rankings/<session>/`: `session.json` holds the
//! tasks with their hidden label assignment and `ballots.jsonl` the submitted
//! orderings in label form.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use maats_core::metrics::{borda, BordaResult, RankingBallot};
use maats_core::SystemKind;
use maats_pipeline::store::validate_run_id;
use maats_pipeline::{RunManifest, RunStore};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::commands::manifest_segments;
use crate::error::{io_error, CliError};

pub const LABELS: [Label; 3] = [Label::A, Label::B, Label::C];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    A,
    B,
    C,
}

impl Label {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(Label::A),
            "B" | "b" => Some(Label::B),
            "C" | "c" => Some(Label::C),
            _ => None,
        }
    }
}

/// What an annotator sees. Carries no system identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTask {
    pub task_id: String,
    pub model_id: String,
    pub source_text: String,
    pub outputs: BTreeMap<Label, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTask {
    pub task: RankingTask,
    pub segment_id: String,
    pub assignment: BTreeMap<Label, SystemKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub session_id: String,
    pub run_ids: Vec<String>,
    pub annotators: Vec<String>,
    pub tasks: Vec<SessionTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredBallot {
    pub annotator_id: String,
    pub task_id: String,
    /// Best first.
    pub ordering: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankingError {
    UnknownAnnotator(String),
    NoTasksRemaining,
    UnknownTask(String),
    DuplicateBallot { annotator_id: String, task_id: String },
    InvalidOrdering(String),
    BadRequest(String),
    Storage(String),
}

impl RankingError {
    pub fn kind(&self) -> &'static str {
        match self {
            RankingError::UnknownAnnotator(_) => "unknown_annotator",
            RankingError::NoTasksRemaining => "no_tasks_remaining",
            RankingError::UnknownTask(_) => "unknown_task",
            RankingError::DuplicateBallot { .. } => "duplicate_ballot",
            RankingError::InvalidOrdering(_) => "invalid_ordering",
            RankingError::BadRequest(_) => "bad_request",
            RankingError::Storage(_) => "storage",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            RankingError::UnknownAnnotator(_) => StatusCode::FORBIDDEN,
            RankingError::NoTasksRemaining => StatusCode::GONE,
            RankingError::UnknownTask(_) => StatusCode::NOT_FOUND,
            RankingError::DuplicateBallot { .. } => StatusCode::CONFLICT,
            RankingError::InvalidOrdering(_) => StatusCode::UNPROCESSABLE_ENTITY,
            RankingError::BadRequest(_) => StatusCode::BAD_REQUEST,
            RankingError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn message(&self) -> String {
        match self {
            RankingError::UnknownAnnotator(a) => format!("unknown annotator `{a}`"),
            RankingError::NoTasksRemaining => "no tasks remaining".to_string(),
            RankingError::UnknownTask(t) => format!("unknown task `{t}`"),
            RankingError::DuplicateBallot { annotator_id, task_id } => {
                format!("annotator `{annotator_id}` already ranked task `{task_id}`")
            }
            RankingError::InvalidOrdering(m) | RankingError::BadRequest(m) | RankingError::Storage(m) => m.clone(),
        }
    }
}

impl IntoResponse for RankingError {
    fn into_response(self) -> Response {
        let body = json!({"error": self.kind(), "message": self.message()});
        (self.status(), Json(body)).into_response()
    }
}

/// Label order for task `index`, fixed by the run ids.
pub fn assign_labels(run_ids: &[String], index: usize) -> BTreeMap<Label, SystemKind> {
    let mut hasher = Sha256::new();
    for id in run_ids {
        hasher.update(id.as_bytes());
        hasher.update([0]);
    }
    hasher.update((index as u64).to_le_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    let mut systems = SystemKind::ALL;
    systems.shuffle(&mut ChaCha8Rng::from_seed(seed));
    LABELS.into_iter().zip(systems).collect()
}

fn session_dir(store: &RunStore, session_id: &str) -> PathBuf {
    store.root().join("rankings").join(session_id)
}

/// Builds tasks from completed runs: per model one run of each approach over
/// the same dataset. Tasks follow model order, then dataset order.
pub fn build_session(
    store: &RunStore,
    session_id: &str,
    run_ids: &[String],
    annotators: &[String],
) -> Result<Session, CliError> {
    validate_run_id(session_id)
        .map_err(|_| CliError::new("invalid_session", format!("invalid session id `{session_id}`")))?;
    let annotators: Vec<String> = annotators.iter().map(|a| a.trim().to_string()).collect();
    if annotators.iter().any(String::is_empty) || annotators.iter().collect::<BTreeSet<_>>().len() != annotators.len() {
        return Err(CliError::new(
            "invalid_argument",
            "annotator ids must be non-empty and distinct",
        ));
    }
    let mut by_model: BTreeMap<String, BTreeMap<SystemKind, RunManifest>> = BTreeMap::new();
    for id in run_ids {
        let manifest = store.load_manifest(id)?;
        let slot = by_model.entry(manifest.model_id.clone()).or_default();
        if slot.contains_key(&manifest.approach) {
            return Err(CliError::new(
                "invalid_session",
                format!("model `{}` has two {} runs", manifest.model_id, manifest.approach),
            ));
        }
        slot.insert(manifest.approach, manifest);
    }
    let mut tasks = Vec::new();
    for (model, runs) in &by_model {
        if runs.len() != SystemKind::ALL.len() {
            return Err(CliError::new(
                "invalid_session",
                format!("model `{model}` needs one run per approach, got {}", runs.len()),
            ));
        }
        let digests: BTreeSet<&str> = runs.values().map(|m| m.dataset_digest.as_str()).collect();
        if digests.len() != 1 {
            return Err(CliError::new(
                "invalid_session",
                format!("runs for model `{model}` use different datasets"),
            ));
        }
        let segments = manifest_segments(&runs[&SystemKind::Maats])?;
        let mut finals: BTreeMap<SystemKind, BTreeMap<String, String>> = BTreeMap::new();
        for (system, manifest) in runs {
            let texts = store
                .load_records(&manifest.run_id)?
                .into_iter()
                .map(|r| (r.segment_id, r.final_text))
                .collect();
            finals.insert(*system, texts);
        }
        for segment in &segments {
            let Some(outputs) = SystemKind::ALL
                .iter()
                .map(|s| finals[s].get(&segment.id).cloned())
                .collect::<Option<Vec<String>>>()
            else {
                continue;
            };
            let index = tasks.len();
            let assignment = assign_labels(run_ids, index);
            let by_system: BTreeMap<SystemKind, String> = SystemKind::ALL.into_iter().zip(outputs).collect();
            let outputs = assignment.iter().map(|(l, s)| (*l, by_system[s].clone())).collect();
            tasks.push(SessionTask {
                task: RankingTask {
                    task_id: (index + 1).to_string(),
                    model_id: model.clone(),
                    source_text: segment.source_text.clone(),
                    outputs,
                },
                segment_id: segment.id.clone(),
                assignment,
            });
        }
    }
    if tasks.is_empty() {
        return Err(CliError::new("invalid_session", "no segment is complete in every run"));
    }
    Ok(Session {
        session_id: session_id.to_string(),
        run_ids: run_ids.to_vec(),
        annotators,
        tasks,
    })
}

pub fn load_session(store: &RunStore, session_id: &str) -> Result<(Session, Vec<StoredBallot>), CliError> {
    let dir = session_dir(store, session_id);
    let path = dir.join("session.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::new("unknown_session", format!("no ranking session `{session_id}`"))
        } else {
            io_error(&path, e)
        }
    })?;
    let session: Session =
        serde_json::from_str(&text).map_err(|e| CliError::new("corrupt_store", format!("{}: {e}", path.display())))?;
    let ballots_path = dir.join("ballots.jsonl");
    let mut ballots = Vec::new();
    if ballots_path.exists() {
        let text = fs::read_to_string(&ballots_path).map_err(|e| io_error(&ballots_path, e))?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let ballot: StoredBallot = serde_json::from_str(line)
                .map_err(|e| CliError::new("corrupt_store", format!("{}:{}: {e}", ballots_path.display(), i + 1)))?;
            ballots.push(ballot);
        }
    }
    Ok((session, ballots))
}

struct Ballots {
    file: File,
    /// annotator -> answered task ids
    answered: BTreeMap<String, BTreeSet<String>>,
    count: usize,
}

pub struct RankingService {
    session: Session,
    index: BTreeMap<String, usize>,
    ballots: Mutex<Ballots>,
}

impl RankingService {
    /// Opens `session_id`, creating it from `run_ids` when new. An existing
    /// session must have been built from the same runs and annotators.
    pub fn open(
        store: &RunStore,
        session_id: &str,
        run_ids: &[String],
        annotators: &[String],
    ) -> Result<Self, CliError> {
        let dir = session_dir(store, session_id);
        let session_path = dir.join("session.json");
        let (session, stored) = if session_path.exists() {
            let (session, stored) = load_session(store, session_id)?;
            if session.run_ids != run_ids || session.annotators != annotators {
                return Err(CliError::new(
                    "session_mismatch",
                    format!("session `{session_id}` was created with other runs or annotators"),
                ));
            }
            (session, stored)
        } else {
            let session = build_session(store, session_id, run_ids, annotators)?;
            fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
            let text = serde_json::to_string_pretty(&session).expect("session serializes") + "\n";
            fs::write(&session_path, text).map_err(|e| io_error(&session_path, e))?;
            (session, Vec::new())
        };
        Self::from_parts(session, stored, &dir.join("ballots.jsonl"))
    }

    fn from_parts(session: Session, stored: Vec<StoredBallot>, ballots_path: &Path) -> Result<Self, CliError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(ballots_path)
            .map_err(|e| io_error(ballots_path, e))?;
        let mut answered: BTreeMap<String, BTreeSet<String>> = session
            .annotators
            .iter()
            .map(|a| (a.clone(), BTreeSet::new()))
            .collect();
        for b in &stored {
            answered
                .entry(b.annotator_id.clone())
                .or_default()
                .insert(b.task_id.clone());
        }
        let index = session
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.task.task_id.clone(), i))
            .collect();
        Ok(Self {
            session,
            index,
            ballots: Mutex::new(Ballots {
                file,
                answered,
                count: stored.len(),
            }),
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    fn known(&self, annotator: &str) -> Result<(), RankingError> {
        if self.session.annotators.iter().any(|a| a == annotator) {
            Ok(())
        } else {
            Err(RankingError::UnknownAnnotator(annotator.to_string()))
        }
    }

    /// First task, in session order, the annotator has not ranked.
    pub fn next_task(&self, annotator: &str) -> Result<RankingTask, RankingError> {
        self.known(annotator)?;
        let ballots = self.ballots.lock().expect("ballot lock");
        let done = &ballots.answered[annotator];
        self.session
            .tasks
            .iter()
            .find(|t| !done.contains(&t.task.task_id))
            .map(|t| t.task.clone())
            .ok_or(RankingError::NoTasksRemaining)
    }

    pub fn submit(
        &self,
        annotator: &str,
        task_id: &str,
        ordering: &[String],
    ) -> Result<serde_json::Value, RankingError> {
        self.known(annotator)?;
        if !self.index.contains_key(task_id) {
            return Err(RankingError::UnknownTask(task_id.to_string()));
        }
        let labels: Vec<Label> = ordering
            .iter()
            .map(|s| Label::parse(s).ok_or_else(|| RankingError::InvalidOrdering(format!("unknown label `{s}`"))))
            .collect::<Result<_, _>>()?;
        let distinct: BTreeSet<Label> = labels.iter().copied().collect();
        if labels.len() != LABELS.len() || distinct.len() != LABELS.len() {
            return Err(RankingError::InvalidOrdering(format!(
                "ordering {ordering:?} is not a permutation of A, B, C"
            )));
        }
        let mut ballots = self.ballots.lock().expect("ballot lock");
        if ballots.answered[annotator].contains(task_id) {
            return Err(RankingError::DuplicateBallot {
                annotator_id: annotator.to_string(),
                task_id: task_id.to_string(),
            });
        }
        let stored = StoredBallot {
            annotator_id: annotator.to_string(),
            task_id: task_id.to_string(),
            ordering: labels,
        };
        let line = serde_json::to_string(&stored).expect("ballot serializes") + "\n";
        ballots
            .file
            .write_all(line.as_bytes())
            .and_then(|_| ballots.file.flush())
            .map_err(|e| RankingError::Storage(e.to_string()))?;
        ballots
            .answered
            .get_mut(annotator)
            .expect("known annotator")
            .insert(task_id.to_string());
        ballots.count += 1;
        let remaining = self.session.tasks.len() - ballots.answered[annotator].len();
        Ok(json!({"accepted": true, "task_id": task_id, "remaining": remaining}))
    }

    pub fn progress(&self) -> serde_json::Value {
        let ballots = self.ballots.lock().expect("ballot lock");
        let annotators: BTreeMap<&str, usize> = ballots.answered.iter().map(|(a, t)| (a.as_str(), t.len())).collect();
        json!({"tasks": self.session.tasks.len(), "ballots": ballots.count, "annotators": annotators})
    }
}

#[derive(Deserialize)]
struct NextQuery {
    annotator: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BallotBody {
    annotator: String,
    task_id: String,
    ordering: Vec<String>,
}

async fn next_task(State(svc): State<Arc<RankingService>>, Query(q): Query<NextQuery>) -> Response {
    let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) else {
        return RankingError::BadRequest("missing `annotator` query parameter".to_string()).into_response();
    };
    match svc.next_task(&annotator) {
        Ok(task) => Json(task).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn submit_ballot(State(svc): State<Arc<RankingService>>, body: Bytes) -> Response {
    let body: BallotBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return RankingError::BadRequest(format!("malformed ballot: {e}")).into_response(),
    };
    match svc.submit(&body.annotator, &body.task_id, &body.ordering) {
        Ok(ack) => Json(ack).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn progress(State(svc): State<Arc<RankingService>>) -> Response {
    Json(svc.progress()).into_response()
}

pub fn router(service: Arc<RankingService>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/tasks/next", get(next_task))
        .route("/api/ballots", post(submit_ballot))
        .route("/api/progress", get(progress))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

/// Ballots with labels resolved to systems.
pub fn resolve_ballots(session: &Session, stored: &[StoredBallot]) -> Result<Vec<RankingBallot>, CliError> {
    let tasks: BTreeMap<&str, &SessionTask> = session.tasks.iter().map(|t| (t.task.task_id.as_str(), t)).collect();
    stored
        .iter()
        .map(|b| {
            let task = tasks
                .get(b.task_id.as_str())
                .ok_or_else(|| CliError::new("corrupt_store", format!("ballot names unknown task `{}`", b.task_id)))?;
            Ok(RankingBallot {
                annotator_id: b.annotator_id.clone(),
                segment_id: task.segment_id.clone(),
                model_id: task.task.model_id.clone(),
                ordering: b.ordering.iter().map(|l| task.assignment[l]).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BordaReport {
    pub session: String,
    pub overall: BordaResult,
    pub by_model: BTreeMap<String, BordaResult>,
}

impl BordaReport {
    /// `scope, model, system, points, ballots`; scope is `overall` or `model`.
    pub fn points_tsv(&self) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
        w.write_record(["scope", "model", "system", "points", "ballots"])
            .expect("in-memory write");
        let scopes = std::iter::once(("overall", "*", &self.overall))
            .chain(self.by_model.iter().map(|(m, r)| ("model", m.as_str(), r)));
        for (scope, model, result) in scopes {
            for (system, points) in result.standings() {
                w.write_record([
                    scope,
                    model,
                    system.as_str(),
                    &points.to_string(),
                    &result.ballots.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// `scope, model, system, opponent, wins, ballots, win_rate`.
    pub fn win_rates_tsv(&self) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
        w.write_record(["scope", "model", "system", "opponent", "wins", "ballots", "win_rate"])
            .expect("in-memory write");
        let scopes = std::iter::once(("overall", "*", &self.overall))
            .chain(self.by_model.iter().map(|(m, r)| ("model", m.as_str(), r)));
        for (scope, model, result) in scopes {
            for (a, row) in &result.wins {
                for (b, wins) in row {
                    w.write_record([
                        scope,
                        model,
                        a.as_str(),
                        b.as_str(),
                        &wins.to_string(),
                        &result.ballots.to_string(),
                        &format!("{:.4}", result.win_rate(*a, *b)),
                    ])
                    .expect("in-memory write");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

pub fn borda_report(session: &Session, ballots: &[RankingBallot]) -> Result<BordaReport, CliError> {
    let metric = |e: maats_core::metrics::MetricError| CliError::new("metric_error", e.to_string());
    let overall = borda(ballots).map_err(metric)?;
    let mut grouped: BTreeMap<String, Vec<RankingBallot>> = BTreeMap::new();
    for b in ballots {
        grouped.entry(b.model_id.clone()).or_default().push(b.clone());
    }
    let by_model = grouped
        .into_iter()
        .map(|(m, bs)| Ok((m, borda(&bs).map_err(metric)?)))
        .collect::<Result<_, CliError>>()?;
    Ok(BordaReport {
        session: session.session_id.clone(),
        overall,
        by_model,
    })
}

pub fn export(store: &RunStore, session_id: &str, out: Option<&Path>) -> Result<BordaReport, CliError> {
    let (session, stored) = load_session(store, session_id)?;
    let ballots = resolve_ballots(&session, &stored)?;
    let report = borda_report(&session, &ballots)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let dump: String = stored
            .iter()
            .zip(&ballots)
            .map(|(s, b)| {
                json!({
                    "task_id": s.task_id,
                    "annotator_id": b.annotator_id,
                    "segment_id": b.segment_id,
                    "model_id": b.model_id,
                    "labels": s.ordering,
                    "ordering": b.ordering,
                })
                .to_string()
                    + "\n"
            })
            .collect();
        for (name, text) in [
            ("ballots.jsonl", dump),
            ("borda.tsv", report.points_tsv()),
            ("win_rates.tsv", report.win_rates_tsv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        }
    }
    Ok(report)
}
