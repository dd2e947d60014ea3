//! HTTP API behind the annotation UI.
//!
//! | method | path                  | result                                   |
//! |--------|-----------------------|------------------------------------------|
//! | GET    | `/api/v1/tasks/next`  | 200 next task, 204 when none remain      |
//! | POST   | `/api/v1/judgments`   | 201 stored, 400 invalid, 409 duplicate   |
//! | GET    | `/api/v1/progress`    | judgment counts                          |
//! | GET    | `/api/v1/parameters`  | the ten parameter labels and the scale   |

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use log::{error, info};
use mteval_core::human::{
    normalized_human, FieldError, HumanJudgment, JudgmentError, JudgmentStore, PARAMETERS, SCALE,
};
use mteval_core::text::CorpusSide;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::args::ServeArgs;
use crate::CliError;

/// Segments and system outputs offered for annotation.
#[derive(Debug, Clone, Default)]
pub struct AnnotationCorpus {
    segment_ids: Vec<u64>,
    sources: BTreeMap<u64, String>,
    outputs: BTreeMap<String, BTreeMap<u64, String>>,
}

impl AnnotationCorpus {
    /// Every system must cover the same segments; the optional source side
    /// too.
    pub fn new(
        systems: Vec<(String, CorpusSide)>,
        source: Option<CorpusSide>,
    ) -> Result<Self, String> {
        let ids_of =
            |side: &CorpusSide| -> Vec<u64> { side.segments.iter().map(|s| s.id as u64).collect() };
        let first = systems.first().ok_or("at least one system is required")?;
        let segment_ids = ids_of(&first.1);
        let mut outputs = BTreeMap::new();
        for (name, side) in systems {
            if ids_of(&side) != segment_ids {
                return Err(format!(
                    "system {name:?} has {} segments, expected {}",
                    side.len(),
                    segment_ids.len()
                ));
            }
            let texts = side
                .segments
                .into_iter()
                .map(|s| (s.id as u64, s.text))
                .collect();
            if outputs.insert(name.clone(), texts).is_some() {
                return Err(format!("system {name:?} given twice"));
            }
        }
        let sources = match source {
            Some(side) => {
                if ids_of(&side) != segment_ids {
                    return Err(format!(
                        "source has {} segments, expected {}",
                        side.len(),
                        segment_ids.len()
                    ));
                }
                side.segments
                    .into_iter()
                    .map(|s| (s.id as u64, s.text))
                    .collect()
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            segment_ids,
            sources,
            outputs,
        })
    }

    pub fn task_count(&self) -> usize {
        self.segment_ids.len() * self.outputs.len()
    }

    /// Systems of one segment in the order shown to `annotator`.
    pub fn system_order(&self, annotator: &str, segment_id: u64) -> Vec<&str> {
        let mut systems: Vec<&str> = self.outputs.keys().map(String::as_str).collect();
        let mut hasher = Sha256::new();
        hasher.update(annotator.as_bytes());
        hasher.update(b"\0");
        hasher.update(segment_id.to_le_bytes());
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&hasher.finalize());
        systems.shuffle(&mut ChaCha8Rng::from_seed(seed));
        systems
    }
}

pub struct AppState {
    pub corpus: AnnotationCorpus,
    pub store: Mutex<JudgmentStore>,
}

#[derive(Debug, Serialize)]
pub struct AnnotationTask<'a> {
    pub segment_id: u64,
    pub source_text: Option<&'a str>,
    /// Identifier to send back with the judgment; not for display.
    pub system: &'a str,
    pub blinded_label: String,
    pub hypothesis: &'a str,
    pub system_outputs: BTreeMap<&'a str, &'a str>,
    pub parameter_labels: &'static [&'static str],
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/tasks/next", get(next_task))
        .route("/api/v1/judgments", post(post_judgment))
        .route("/api/v1/progress", get(progress))
        .route("/api/v1/parameters", get(parameters))
        .with_state(state)
}

fn field_errors(errors: Vec<FieldError>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "errors": errors }))).into_response()
}

fn bad_field(field: &str, message: impl Into<String>) -> Response {
    field_errors(vec![FieldError {
        field: field.to_string(),
        message: message.into(),
    }])
}

fn internal(message: String) -> Response {
    error!("{message}");
    (
        StatusCode::INTERNAL_SERVER_ERROR,
        Json(json!({ "error": message })),
    )
        .into_response()
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, JudgmentStore> {
    state.store.lock().unwrap_or_else(|p| p.into_inner())
}

async fn next_task(
    State(state): State<Arc<AppState>>,
    Query(q): Query<AnnotatorQuery>,
) -> Response {
    let annotator = match q.annotator.as_deref().map(str::trim) {
        Some(a) if !a.is_empty() => a.to_string(),
        _ => return bad_field("annotator", "required"),
    };
    let corpus = &state.corpus;
    let store = lock(&state);
    let mut completed = 0;
    let mut pending = None;
    for &id in &corpus.segment_ids {
        for (position, system) in corpus.system_order(&annotator, id).into_iter().enumerate() {
            if store.contains(id, system, &annotator) {
                completed += 1;
            } else if pending.is_none() {
                pending = Some((id, system, position));
            }
        }
    }
    drop(store);
    let Some((segment_id, system, position)) = pending else {
        return StatusCode::NO_CONTENT.into_response();
    };
    let hypothesis = corpus.outputs[system][&segment_id].as_str();
    let task = AnnotationTask {
        segment_id,
        source_text: corpus.sources.get(&segment_id).map(String::as_str),
        system,
        blinded_label: format!("Output {}", position + 1),
        hypothesis,
        system_outputs: BTreeMap::from([(system, hypothesis)]),
        parameter_labels: &PARAMETERS,
        completed,
        total: corpus.task_count(),
    };
    Json(task).into_response()
}

async fn post_judgment(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => return bad_field("body", format!("not valid JSON: {e}")),
    };
    let judgment = match HumanJudgment::from_value(&value, false) {
        Ok(j) => j,
        Err(JudgmentError::Invalid(errors)) => return field_errors(errors),
        Err(e) => return bad_field("body", e.to_string()),
    };
    let corpus = &state.corpus;
    let mut errors = Vec::new();
    if !corpus.outputs.contains_key(&judgment.system) {
        errors.push(FieldError {
            field: "system".into(),
            message: format!("unknown system {:?}", judgment.system),
        });
    }
    if corpus
        .segment_ids
        .binary_search(&judgment.segment_id)
        .is_err()
    {
        errors.push(FieldError {
            field: "segment_id".into(),
            message: format!("unknown segment {}", judgment.segment_id),
        });
    }
    if !errors.is_empty() {
        return field_errors(errors);
    }
    let average = judgment.average_score();
    let stored = judgment.clone();
    match lock(&state).append(judgment) {
        Ok(()) => {
            info!(
                "judgment segment={} system={} annotator={}",
                stored.segment_id, stored.system, stored.annotator
            );
            let body = json!({
                "judgment": stored,
                "average": average,
                "normalized": normalized_human(average),
            });
            (StatusCode::CREATED, Json(body)).into_response()
        }
        Err(e @ JudgmentError::Duplicate { .. }) => (
            StatusCode::CONFLICT,
            Json(json!({ "error": e.to_string() })),
        )
            .into_response(),
        Err(JudgmentError::Invalid(errors)) => field_errors(errors),
        Err(e) => internal(e.to_string()),
    }
}

async fn progress(State(state): State<Arc<AppState>>, Query(q): Query<AnnotatorQuery>) -> Response {
    let total = state.corpus.task_count();
    let store = lock(&state);
    let mut per_annotator: BTreeMap<String, usize> = BTreeMap::new();
    for j in store.iter() {
        *per_annotator.entry(j.annotator.clone()).or_default() += 1;
    }
    let mut body = json!({
        "total_tasks": total,
        "judgments": store.len(),
        "annotators": per_annotator,
    });
    if let Some(annotator) = q.annotator.filter(|a| !a.trim().is_empty()) {
        let completed = per_annotator.get(annotator.trim()).copied().unwrap_or(0);
        body["annotator"] = json!(annotator.trim());
        body["completed"] = json!(completed);
        body["remaining"] = json!(total.saturating_sub(completed));
    }
    Json(body).into_response()
}

async fn parameters() -> Response {
    let parameters: Vec<_> = PARAMETERS
        .iter()
        .enumerate()
        .map(|(i, label)| json!({ "index": i + 1, "label": label }))
        .collect();
    let scale: Vec<_> = SCALE
        .iter()
        .map(|(value, label)| json!({ "value": value, "label": label }))
        .collect();
    Json(json!({ "parameters": parameters, "scale": scale })).into_response()
}

fn load_side(path: &Path) -> Result<CorpusSide, CliError> {
    CorpusSide::load(path).map_err(|e| CliError::Input(e.to_string()))
}

/// Loads the corpus and judgment store named by `args`.
pub fn build_state(args: &ServeArgs) -> Result<AppState, CliError> {
    let systems = args
        .systems
        .iter()
        .map(|(name, path)| Ok((name.clone(), load_side(path)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let source = args.source.as_deref().map(load_side).transpose()?;
    let corpus = AnnotationCorpus::new(systems, source).map_err(CliError::Input)?;
    let store = JudgmentStore::open(&args.judgments).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(AppState {
        corpus,
        store: Mutex::new(store),
    })
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let state = Arc::new(build_state(args)?);
    let mut app = router(state);
    if let Some(ui) = &args.ui {
        if !ui.is_dir() {
            return Err(CliError::Input(format!(
                "{}: not a directory",
                ui.display()
            )));
        }
        app = app.fallback_service(tower_http::services::ServeDir::new(ui));
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Input(format!("cannot listen on {addr}: {e}")))?;
        info!("listening on {addr}");
        eprintln!("mteval: serving on http://{addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}
