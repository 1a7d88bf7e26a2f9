//! HTTP/JSON front of the verdict store. Field names are pinned by
//! `api/triage-api.schema.json`.

use std::collections::BTreeMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::store::{ReviewStatus, StoredVerdict, TriageError, TriageStore};
use super::{suggest_category, TriageVerdict, VerdictCategory};
use crate::record::EvaluationRecord;
use crate::validator::TestOutcome;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<TriageStore>,
    /// Shared bearer token; `None` leaves the API open (local use).
    pub token: Option<String>,
    /// Lines of context shown around the target function.
    pub context_lines: usize,
}

impl AppState {
    pub fn new(store: Arc<TriageStore>, token: Option<String>) -> Self {
        Self {
            store,
            token,
            context_lines: 5,
        }
    }
}

struct ApiError(StatusCode, Value);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

fn api_error(status: StatusCode, kind: &str, message: impl ToString) -> ApiError {
    ApiError(status, json!({ "error": kind, "message": message.to_string() }))
}

impl From<TriageError> for ApiError {
    fn from(e: TriageError) -> Self {
        let (status, kind) = match &e {
            TriageError::Conflict { .. } => (StatusCode::CONFLICT, "conflict"),
            TriageError::UnknownTask(_) => (StatusCode::NOT_FOUND, "unknown_task"),
            TriageError::UnknownVerdict(_) => (StatusCode::NOT_FOUND, "unknown_verdict"),
            TriageError::UnknownReviewer(_) => (StatusCode::FORBIDDEN, "unknown_reviewer"),
            TriageError::CampaignSealed => (StatusCode::LOCKED, "campaign_sealed"),
            TriageError::OpenDisagreements(_) => (StatusCode::CONFLICT, "open_disagreements"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        api_error(status, kind, e)
    }
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok {
            return api_error(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

#[derive(Serialize)]
struct TaskSummary {
    id: String,
    task_id: String,
    provider_id: String,
    project: String,
    kind: &'static str,
    status: ReviewStatus,
    n_verdicts: usize,
    suggestion: Option<VerdictCategory>,
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
}

async fn list_tasks(
    State(state): State<AppState>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<TaskSummary>>, ApiError> {
    let wanted = match q.status.as_deref() {
        None => None,
        Some(s) => Some(
            s.parse::<ReviewStatus>()
                .map_err(|e| api_error(StatusCode::BAD_REQUEST, "bad_request", e))?,
        ),
    };
    let snap = state.store.snapshot();
    let required = state.store.options().required_reviewers;
    let out = state
        .store
        .records()
        .values()
        .filter_map(|r| {
            let status = snap.status(&r.id(), required);
            if wanted.is_some_and(|w| w != status) {
                return None;
            }
            Some(TaskSummary {
                id: r.id(),
                task_id: r.task.task_id.clone(),
                provider_id: r.provider_id.clone(),
                project: r.task.project.clone(),
                kind: r.task.kind.label(),
                status,
                n_verdicts: snap.verdicts_for(&r.id()).len(),
                suggestion: suggest_category(r),
            })
        })
        .collect();
    Ok(Json(out))
}

#[derive(Serialize)]
struct VerificationSummary {
    state: &'static str,
    skipped_reason: Option<String>,
    compile_outcome: Option<&'static str>,
    compile_messages: Vec<String>,
    issues: BTreeMap<String, usize>,
    issue_delta: BTreeMap<String, i64>,
    uncategorized: usize,
}

fn verification_summary(r: &EvaluationRecord) -> VerificationSummary {
    let issues = r
        .issue_counts()
        .into_iter()
        .filter(|(_, n)| *n > 0)
        .map(|(c, n)| (c.label().to_string(), n))
        .collect();
    match r.verification.done() {
        Some(v) => VerificationSummary {
            state: "done",
            skipped_reason: None,
            compile_outcome: Some(match v.compile_outcome {
                crate::verifier::CompileOutcome::Success => "success",
                crate::verifier::CompileOutcome::CompileError { .. } => "compile_error",
            }),
            compile_messages: match &v.compile_outcome {
                crate::verifier::CompileOutcome::CompileError { messages } => messages.clone(),
                _ => Vec::new(),
            },
            issues,
            issue_delta: v
                .issue_delta
                .iter()
                .filter(|(_, d)| **d != 0)
                .map(|(c, d)| (c.label().to_string(), *d))
                .collect(),
            uncategorized: v.uncategorized.len(),
        },
        None => VerificationSummary {
            state: "skipped",
            skipped_reason: r.verification.skipped_reason().map(str::to_string),
            compile_outcome: None,
            compile_messages: Vec::new(),
            issues,
            issue_delta: BTreeMap::new(),
            uncategorized: 0,
        },
    }
}

#[derive(Serialize)]
struct TestSummary {
    state: &'static str,
    skipped_reason: Option<String>,
    outcome: Option<TestOutcome>,
}

fn context_excerpt(r: &EvaluationRecord, around: usize) -> String {
    let lines: Vec<&str> = r.task.context_file_pre.lines().collect();
    let (start, end) = match &r.task.function_span_pre {
        Some(s) => (s.start_line.saturating_sub(1 + around), (s.end_line + around).min(lines.len())),
        None => (0, lines.len().min(2 * around + 1)),
    };
    lines[start.min(lines.len())..end].join("\n")
}

#[derive(Deserialize)]
struct DetailQuery {
    #[serde(default)]
    blind: bool,
}

async fn get_task(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<DetailQuery>,
) -> Result<Json<Value>, ApiError> {
    let r = state
        .store
        .records()
        .get(&id)
        .ok_or_else(|| api_error(StatusCode::NOT_FOUND, "unknown_task", format!("unknown task {id}")))?;
    let snap = state.store.snapshot();
    let verdicts: Vec<StoredVerdict> = snap.verdicts_for(&id).to_vec();
    let mut body = json!({
        "id": id,
        "task_id": r.task.task_id,
        "provider_id": r.provider_id,
        "project": r.task.project,
        "kind": r.task.kind.label(),
        "function_name": r.task.function_name,
        "context_file_path": r.task.context_file_path,
        "status": snap.status(&id, state.store.options().required_reviewers),
        "prompt": r.prompt.text,
        "context_excerpt": context_excerpt(r, state.context_lines),
        "human_diff": r.task.human_diff,
        "llm_diff": r.candidate_diff,
        "citations": r.response.as_ref().map(|m| m.citations.clone()).unwrap_or_default(),
        "verdicts": verdicts,
        "blind": q.blind,
    });
    if !q.blind {
        body["verification"] = serde_json::to_value(verification_summary(r)).expect("serializable");
        body["test_outcome"] = serde_json::to_value(TestSummary {
            state: if r.validation.done().is_some() { "done" } else { "skipped" },
            skipped_reason: r.validation.skipped_reason().map(str::to_string),
            outcome: r.validation.done().cloned(),
        })
        .expect("serializable");
        body["suggestion"] = serde_json::to_value(suggest_category(r)).expect("serializable");
    }
    Ok(Json(body))
}

#[derive(Deserialize)]
struct VerdictBody {
    reviewer_id: String,
    category: VerdictCategory,
    #[serde(default)]
    notes: String,
}

async fn post_verdict(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<VerdictBody>,
) -> Result<(StatusCode, Json<Value>), ApiError> {
    let r = state
        .store
        .records()
        .get(&id)
        .ok_or_else(|| api_error(StatusCode::NOT_FOUND, "unknown_task", format!("unknown task {id}")))?;
    let verdict = TriageVerdict {
        task_id: r.task.task_id.clone(),
        provider_id: r.provider_id.clone(),
        reviewer_id: body.reviewer_id,
        category: body.category,
        notes: body.notes,
        timestamp: chrono::Utc::now(),
    };
    match state.store.record_verdict(verdict) {
        Ok(vid) => {
            let snap = state.store.snapshot();
            let stored = snap.verdicts_for(&id).iter().find(|v| v.id == vid).cloned();
            Ok((StatusCode::CREATED, Json(serde_json::to_value(stored).expect("serializable"))))
        }
        Err(TriageError::Conflict { existing_id, .. }) => {
            let snap = state.store.snapshot();
            let existing = snap.verdicts_for(&id).iter().find(|v| v.id == existing_id).cloned();
            Err(ApiError(
                StatusCode::CONFLICT,
                json!({
                    "error": "conflict",
                    "message": "reviewer already judged this task",
                    "existing": existing,
                }),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(Deserialize)]
struct RetractBody {
    #[serde(default)]
    reason: String,
}

async fn retract_verdict(
    State(state): State<AppState>,
    Path(vid): Path<u64>,
    Json(body): Json<RetractBody>,
) -> Result<StatusCode, ApiError> {
    state.store.retract(vid, &body.reason)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn get_agreement(State(state): State<AppState>) -> Json<super::AgreementStats> {
    Json(state.store.agreement())
}

fn campaign_body(state: &AppState) -> Value {
    let snap = state.store.snapshot();
    let required = state.store.options().required_reviewers;
    let mut counts = BTreeMap::from([
        (ReviewStatus::Pending, 0usize),
        (ReviewStatus::Reviewed, 0),
        (ReviewStatus::Disputed, 0),
    ]);
    for id in state.store.records().keys() {
        *counts.entry(snap.status(id, required)).or_default() += 1;
    }
    json!({
        "sealed": snap.sealed.is_some(),
        "seal": snap.sealed,
        "reviewers": state.store.options().reviewers,
        "required_reviewers": required,
        "counts": {
            "pending": counts[&ReviewStatus::Pending],
            "reviewed": counts[&ReviewStatus::Reviewed],
            "disputed": counts[&ReviewStatus::Disputed],
        },
    })
}

async fn get_campaign(State(state): State<AppState>) -> Json<Value> {
    Json(campaign_body(&state))
}

#[derive(Deserialize, Default)]
struct SealBody {
    #[serde(default, rename = "override")]
    override_disputes: bool,
}

async fn seal_campaign(State(state): State<AppState>, body: Option<Json<SealBody>>) -> Result<Json<Value>, ApiError> {
    let body = body.map(|b| b.0).unwrap_or_default();
    match state.store.seal(body.override_disputes) {
        Ok(_) => Ok(Json(campaign_body(&state))),
        Err(TriageError::OpenDisagreements(n)) => Err(ApiError(
            StatusCode::CONFLICT,
            json!({
                "error": "open_disagreements",
                "message": format!("{n} records are disputed; seal needs an override"),
                "disputed": state.store.disputed(),
            }),
        )),
        Err(e) => Err(e.into()),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tasks", get(list_tasks))
        .route("/tasks/:id", get(get_task))
        .route("/tasks/:id/verdicts", post(post_verdict))
        .route("/verdicts/:vid/retract", post(retract_verdict))
        .route("/agreement", get(get_agreement))
        .route("/campaign", get(get_campaign))
        .route("/campaign/seal", post(seal_campaign))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("address {0} already in use")]
    AddressInUse(SocketAddr),
    #[error("serve: {0}")]
    Io(#[from] std::io::Error),
}

pub struct ServeHandle {
    pub local_addr: SocketAddr,
    listener: tokio::net::TcpListener,
    router: Router,
}

impl ServeHandle {
    pub async fn bind(addr: SocketAddr, state: AppState) -> Result<ServeHandle, ServeError> {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                ServeError::AddressInUse(addr)
            } else {
                ServeError::Io(e)
            }
        })?;
        Ok(ServeHandle {
            local_addr: listener.local_addr()?,
            listener,
            router: router(state),
        })
    }

    /// Serves until `shutdown` resolves; in-flight requests finish first.
    /// Every verdict is synced before its response, so nothing is pending
    /// once this returns.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
        axum::serve(self.listener, self.router)
            .with_graceful_shutdown(shutdown)
            .await?;
        Ok(())
    }
}

/// Binds and serves until ctrl-c or SIGTERM.
pub async fn serve(addr: SocketAddr, state: AppState) -> Result<(), ServeError> {
    let handle = ServeHandle::bind(addr, state).await?;
    tracing::info!(addr = %handle.local_addr, "triage service listening");
    handle.run(shutdown_signal()).await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down triage service");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::sample_record;
    use crate::triage::store::StoreOptions;
    use axum::body::Body;
    use axum::http::Request as HttpRequest;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    fn app(dir: &std::path::Path, n: usize, token: Option<&str>) -> Router {
        let records = (0..n).map(|i| sample_record(&format!("t{i}"), "p1")).collect();
        let opts = StoreOptions {
            reviewers: ["r1", "r2"].iter().map(|s| s.to_string()).collect(),
            required_reviewers: 2,
        };
        let store = TriageStore::open(dir, records, opts).unwrap();
        router(AppState::new(Arc::new(store), token.map(str::to_string)))
    }

    async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = HttpRequest::builder().method(method).uri(uri);
        let body = match body {
            Some(b) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(b.to_string())
            }
            None => Body::empty(),
        };
        let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, v)
    }

    #[tokio::test]
    async fn empty_store_lists_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 0, None);
        let (s, v) = call(&app, "GET", "/tasks?status=pending", None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v, json!([]));
    }

    #[tokio::test]
    async fn verdict_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 2, None);
        let (s, v) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "WrongSolution", "notes": "off by one"})),
        )
        .await;
        assert_eq!(s, StatusCode::CREATED, "{v}");
        let (_, task) = call(&app, "GET", "/tasks/t0:p1", None).await;
        assert_eq!(task["verdicts"][0]["category"], "WrongSolution");
        assert_eq!(task["verdicts"][0]["reviewer_id"], "r1");
        assert_eq!(task["status"], "pending");

        let (s, dup) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "EmptyPatch"})),
        )
        .await;
        assert_eq!(s, StatusCode::CONFLICT);
        assert_eq!(dup["existing"]["category"], "WrongSolution");

        let (s, _) = call(&app, "GET", "/tasks/nope:p1", None).await;
        assert_eq!(s, StatusCode::NOT_FOUND);
        let (s, _) = call(&app, "GET", "/tasks?status=bogus", None).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
    }

    #[tokio::test]
    async fn blind_mode_hides_machine_results() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 1, None);
        let (_, open) = call(&app, "GET", "/tasks/t0:p1", None).await;
        assert!(open.get("verification").is_some());
        assert!(open.get("suggestion").is_some());
        let (_, blind) = call(&app, "GET", "/tasks/t0:p1?blind=true", None).await;
        assert!(blind.get("verification").is_none());
        assert!(blind.get("test_outcome").is_none());
        assert!(blind.get("suggestion").is_none());
    }

    #[tokio::test]
    async fn seal_walk() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 1, None);
        for (r, c) in [("r1", "PartialFix"), ("r2", "WrongSolution")] {
            call(&app, "POST", "/tasks/t0:p1/verdicts", Some(json!({"reviewer_id": r, "category": c}))).await;
        }
        let (_, disputed) = call(&app, "GET", "/tasks?status=disputed", None).await;
        assert_eq!(disputed.as_array().unwrap().len(), 1);
        let (s, v) = call(&app, "POST", "/campaign/seal", Some(json!({}))).await;
        assert_eq!(s, StatusCode::CONFLICT);
        assert_eq!(v["disputed"], json!(["t0:p1"]));
        let (s, v) = call(&app, "POST", "/campaign/seal", Some(json!({"override": true}))).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["sealed"], true);
        let (s, _) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "EmptyPatch"})),
        )
        .await;
        assert_eq!(s, StatusCode::LOCKED);
    }

    #[tokio::test]
    async fn retraction_reopens_slot() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 1, None);
        let (_, v) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "PartialFix"})),
        )
        .await;
        let vid = v["id"].as_u64().unwrap();
        let (s, _) = call(&app, "POST", &format!("/verdicts/{vid}/retract"), Some(json!({"reason": "x"}))).await;
        assert_eq!(s, StatusCode::NO_CONTENT);
        let (s, _) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "EmptyPatch"})),
        )
        .await;
        assert_eq!(s, StatusCode::CREATED);
    }

    #[tokio::test]
    async fn token_and_reviewer_checks() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 1, Some("s3cret"));
        let (s, _) = call(&app, "GET", "/agreement", None).await;
        assert_eq!(s, StatusCode::UNAUTHORIZED);
        let req = HttpRequest::builder()
            .uri("/agreement")
            .header(header::AUTHORIZATION, "Bearer s3cret")
            .body(Body::empty())
            .unwrap();
        assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);

        let dir2 = tempfile::tempdir().unwrap();
        let open = super::tests::app(dir2.path(), 1, None);
        let (s, _) = call(
            &open,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "mallory", "category": "EmptyPatch"})),
        )
        .await;
        assert_eq!(s, StatusCode::FORBIDDEN);
    }

    fn assert_schema(definition: &str, body: &Value) {
        let mut schema: Value =
            serde_json::from_str(include_str!("../../api/triage-api.schema.json")).unwrap();
        schema["$ref"] = json!(format!("#/definitions/{definition}"));
        let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
        let msgs: Vec<String> = match compiled.validate(body) {
            Ok(()) => return,
            Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
        };
        panic!("{definition} does not match schema: {msgs:?}\n{body}");
    }

    #[tokio::test]
    async fn bodies_match_schema_file() {
        let dir = tempfile::tempdir().unwrap();
        let app = app(dir.path(), 2, None);
        let (_, agreement) = call(&app, "GET", "/agreement", None).await;
        assert_schema("agreement", &agreement);

        let (_, created) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r1", "category": "EmptyPatch"})),
        )
        .await;
        assert_schema("verdict", &created);
        call(&app, "POST", "/tasks/t0:p1/verdicts", Some(json!({"reviewer_id": "r2", "category": "EmptyPatch"}))).await;
        let (_, conflict) = call(
            &app,
            "POST",
            "/tasks/t0:p1/verdicts",
            Some(json!({"reviewer_id": "r2", "category": "EmptyPatch"})),
        )
        .await;
        assert_schema("error", &conflict);

        let (_, list) = call(&app, "GET", "/tasks", None).await;
        assert_schema("task_list", &list);
        for uri in ["/tasks/t0:p1", "/tasks/t1:p1?blind=true"] {
            let (_, detail) = call(&app, "GET", uri, None).await;
            assert_schema("task_detail", &detail);
        }
        let (_, agreement) = call(&app, "GET", "/agreement", None).await;
        assert_schema("agreement", &agreement);
        assert_eq!(agreement["raw_agreement"], 1.0);
        let (_, campaign) = call(&app, "POST", "/campaign/seal", None).await;
        assert_schema("campaign", &campaign);
        let (_, campaign) = call(&app, "GET", "/campaign", None).await;
        assert_schema("campaign", &campaign);
        let (_, missing) = call(&app, "GET", "/tasks/zzz", None).await;
        assert_schema("error", &missing);

        // The schema is not vacuous.
        let bad = json!({"n_double_reviewed": 1});
        let mut schema: Value = serde_json::from_str(include_str!("../../api/triage-api.schema.json")).unwrap();
        schema["$ref"] = json!("#/definitions/agreement");
        assert!(!jsonschema::JSONSchema::compile(&schema).unwrap().is_valid(&bad));
    }

    #[tokio::test]
    async fn busy_port_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(TriageStore::open(dir.path(), Vec::new(), StoreOptions::default()).unwrap());
        let first = ServeHandle::bind("127.0.0.1:0".parse().unwrap(), AppState::new(store.clone(), None))
            .await
            .unwrap();
        let again = ServeHandle::bind(first.local_addr, AppState::new(store, None)).await;
        assert!(matches!(again, Err(ServeError::AddressInUse(_))));
    }

    #[tokio::test]
    async fn graceful_shutdown_over_tcp() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(TriageStore::open(dir.path(), Vec::new(), StoreOptions::default()).unwrap());
        let handle = ServeHandle::bind("127.0.0.1:0".parse().unwrap(), AppState::new(store, None))
            .await
            .unwrap();
        let addr = handle.local_addr;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(handle.run(async {
            let _ = rx.await;
        }));
        let body = tokio::task::spawn_blocking(move || {
            ureq::get(&format!("http://{addr}/campaign")).call().unwrap().into_string().unwrap()
        })
        .await
        .unwrap();
        assert!(body.contains("\"sealed\":false"));
        tx.send(()).unwrap();
        server.await.unwrap().unwrap();
    }
}
