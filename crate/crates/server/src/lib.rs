//! HTTP facade over `inspectkit-core` for one dataset per process.
//!
//! Everything except `POST /bbn/build` is a pure read of the session. Built
//! models are memoized per (phase, size, smoothing), so rebuilding with the
//! same parameters returns the same digest.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use inspectkit_core::advisor::{check_compliance, DesiredRangeTable};
use inspectkit_core::bbn::{build_model, recommend, CptModel, Evidence, LevelScheme, ParamNode};
use inspectkit_core::dataset::{load_dataset, validate, Phase, ProjectDataset, SizeCategory, ValidationReport};
use inspectkit_core::metrics::{di_series, pattern_summary, project_metrics, DiLevel};
use inspectkit_core::tables::reproduce_table;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;

mod problem;

pub use problem::Problem;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot load dataset {path}: {source}")]
    Dataset {
        path: String,
        source: inspectkit_core::Error,
    },
    #[error("cannot load range table {path}: {source}")]
    Ranges {
        path: String,
        source: inspectkit_core::Error,
    },
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub port: u16,
    /// Dataset file, or `@reference` for the embedded one.
    pub dataset: PathBuf,
    pub ranges: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8080,
            dataset: PathBuf::from(inspectkit_core::dataset::REFERENCE_PATH),
            ranges: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ModelKey {
    phase: Phase,
    size: SizeCategory,
    smoothing_bits: u64,
}

#[derive(Debug)]
pub struct BuiltModel {
    pub model: CptModel,
    /// SHA-256 of the model's canonical JSON, hex encoded.
    pub digest: String,
}

/// Immutable dataset and ranges plus the model registry.
#[derive(Debug)]
pub struct SessionState {
    dataset: ProjectDataset,
    validation: ValidationReport,
    ranges: DesiredRangeTable,
    scheme: LevelScheme,
    models: Mutex<HashMap<ModelKey, Arc<BuiltModel>>>,
}

impl SessionState {
    pub fn new(dataset: ProjectDataset, ranges: DesiredRangeTable) -> Self {
        let validation = validate(&dataset);
        SessionState {
            dataset,
            validation,
            ranges,
            scheme: LevelScheme::default(),
            models: Mutex::new(HashMap::new()),
        }
    }

    pub fn load(config: &ServerConfig) -> Result<Self, ServerError> {
        let dataset = load_dataset(&config.dataset).map_err(|source| ServerError::Dataset {
            path: config.dataset.display().to_string(),
            source,
        })?;
        let ranges = match &config.ranges {
            Some(path) => DesiredRangeTable::load(path).map_err(|source| ServerError::Ranges {
                path: path.display().to_string(),
                source,
            })?,
            None => DesiredRangeTable::default(),
        };
        let state = SessionState::new(dataset, ranges);
        if !state.validation.is_clean() {
            tracing::warn!(
                violations = state.validation.violations.len(),
                "dataset has validation violations; responses will flag them"
            );
        }
        Ok(state)
    }

    pub fn dataset(&self) -> &ProjectDataset {
        &self.dataset
    }

    /// Returns the memoized model for the slice, building it on first use.
    pub fn model(
        &self,
        phase: Phase,
        size: SizeCategory,
        smoothing: f64,
    ) -> inspectkit_core::Result<Arc<BuiltModel>> {
        let key = ModelKey {
            phase,
            size,
            smoothing_bits: smoothing.to_bits(),
        };
        let mut models = self.models.lock().expect("model registry poisoned");
        if let Some(m) = models.get(&key) {
            return Ok(Arc::clone(m));
        }
        let model = build_model(&self.dataset, phase, size, &self.scheme, smoothing)?;
        let digest = Sha256::digest(model.to_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        let built = Arc::new(BuiltModel { model, digest });
        models.insert(key, Arc::clone(&built));
        Ok(built)
    }
}

pub fn router(state: Arc<SessionState>) -> Router {
    Router::new()
        .route("/projects", get(list_projects))
        .route("/projects/{id}/metrics", get(project_metrics_handler))
        .route("/projects/{id}/compliance", get(compliance_handler))
        .route("/tables/{n}", get(table_handler))
        .route("/pattern", get(pattern_handler))
        .route("/plot/di", get(plot_handler))
        .route("/ranges", get(ranges_handler))
        .route("/bbn/scheme", get(scheme_handler))
        .route("/bbn/build", post(build_handler))
        .route("/bbn/query", post(query_handler))
        .route("/bbn/recommend", post(recommend_handler))
        .fallback(|| async { Problem::not_found("route", "no such endpoint") })
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve_on(
    listener: TcpListener,
    state: Arc<SessionState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    tracing::info!("shut down");
    Ok(())
}

/// Loads the session, binds the port and serves until `shutdown`.
pub async fn serve(
    config: ServerConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let state = Arc::new(SessionState::load(&config)?);
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServerError::Bind { addr, source })?;
    serve_on(listener, state, shutdown).await
}

/// Resolves on Ctrl-C.
pub async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!("cannot listen for shutdown signal: {e}");
        std::future::pending::<()>().await;
    }
}

struct JsonBody(String);

impl IntoResponse for JsonBody {
    fn into_response(self) -> Response {
        ([(header::CONTENT_TYPE, "application/json")], self.0).into_response()
    }
}

fn json<T: Serialize>(value: &T) -> JsonBody {
    let mut s = serde_json::to_string_pretty(value).expect("response serializes");
    s.push('\n');
    JsonBody(s)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Problem> {
    serde_json::from_slice(body).map_err(|e| {
        Problem::new(
            StatusCode::BAD_REQUEST,
            "bad-request",
            e.to_string(),
            format!("body line {} column {}", e.line(), e.column()),
        )
    })
}

fn project<'a>(state: &'a SessionState, id: &str) -> Result<&'a inspectkit_core::dataset::ProjectRecord, Problem> {
    state
        .dataset
        .get(id)
        .ok_or_else(|| Problem::not_found(format!("projects/{id}"), format!("no project `{id}`")))
}

#[derive(Serialize)]
struct ProjectSummary<'a> {
    id: &'a str,
    total_hours: f64,
    size: Option<SizeCategory>,
    tc_pct: Option<f64>,
    violations: usize,
}

#[derive(Serialize)]
struct ProjectList<'a> {
    projects: Vec<ProjectSummary<'a>>,
    validation: &'a ValidationReport,
}

async fn list_projects(State(state): State<Arc<SessionState>>) -> JsonBody {
    let projects = state
        .dataset
        .iter()
        .map(|p| ProjectSummary {
            id: &p.id,
            total_hours: p.total_hours,
            size: p.size().ok(),
            tc_pct: project_metrics(p).ok().map(|m| m.tc_pct),
            violations: state.validation.for_project(&p.id).count(),
        })
        .collect();
    json(&ProjectList {
        projects,
        validation: &state.validation,
    })
}

#[derive(Serialize)]
struct Flagged<'a, T> {
    #[serde(flatten)]
    body: T,
    violations: Vec<&'a inspectkit_core::dataset::Violation>,
}

async fn project_metrics_handler(
    State(state): State<Arc<SessionState>>,
    Path(id): Path<String>,
) -> Result<JsonBody, Problem> {
    let p = project(&state, &id)?;
    let m = project_metrics(p).map_err(Problem::from_core)?;
    Ok(json(&Flagged {
        body: m,
        violations: state.validation.for_project(&id).collect(),
    }))
}

async fn compliance_handler(
    State(state): State<Arc<SessionState>>,
    Path(id): Path<String>,
) -> Result<JsonBody, Problem> {
    let p = project(&state, &id)?;
    let report = check_compliance(p, &state.ranges).map_err(Problem::from_core)?;
    Ok(json(&Flagged {
        body: report,
        violations: state.validation.for_project(&id).collect(),
    }))
}

async fn table_handler(
    State(state): State<Arc<SessionState>>,
    Path(n): Path<String>,
) -> Result<JsonBody, Problem> {
    let id: u8 = n.parse().map_err(|_| {
        Problem::new(
            StatusCode::BAD_REQUEST,
            "argument",
            format!("table id `{n}` is not a number"),
            "path",
        )
    })?;
    let t = reproduce_table(&state.dataset, id).map_err(Problem::from_core)?;
    Ok(json(&t))
}

async fn pattern_handler(State(state): State<Arc<SessionState>>) -> Result<JsonBody, Problem> {
    Ok(json(&pattern_summary(&state.dataset).map_err(Problem::from_core)?))
}

async fn plot_handler(State(state): State<Arc<SessionState>>) -> JsonBody {
    json(&serde_json::json!({ "series": di_series(&state.dataset) }))
}

async fn ranges_handler(State(state): State<Arc<SessionState>>) -> JsonBody {
    json(&state.ranges)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceQuery {
    phase: Option<Phase>,
    size: Option<SizeCategory>,
}

#[derive(Serialize)]
struct ResolvedNode<'a> {
    node: ParamNode,
    levels: &'a [String],
}

#[derive(Serialize)]
struct ResolvedScheme<'a> {
    phase: Phase,
    size: SizeCategory,
    nodes: Vec<ResolvedNode<'a>>,
}

/// Full scheme, or the levels in effect for one slice when both `phase`
/// and `size` are given.
async fn scheme_handler(
    State(state): State<Arc<SessionState>>,
    query: Result<Query<SliceQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<JsonBody, Problem> {
    let Query(q) = query.map_err(|e| {
        Problem::new(StatusCode::BAD_REQUEST, "bad-request", e.body_text(), "query")
    })?;
    match (q.phase, q.size) {
        (Some(phase), Some(size)) => {
            let nodes = ParamNode::ALL
                .into_iter()
                .map(|node| {
                    let levels = state
                        .scheme
                        .resolve(node, phase, size)
                        .map_err(Problem::from_core)?;
                    Ok(ResolvedNode {
                        node,
                        levels: levels.labels(),
                    })
                })
                .collect::<Result<Vec<_>, Problem>>()?;
            Ok(json(&ResolvedScheme { phase, size, nodes }))
        }
        (None, None) => Ok(json(&state.scheme)),
        _ => Err(Problem::new(
            StatusCode::BAD_REQUEST,
            "argument",
            "give both phase and size, or neither",
            "query",
        )),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildRequest {
    phase: Phase,
    size: SizeCategory,
    #[serde(default)]
    smoothing: f64,
}

#[derive(Serialize)]
struct BuildResponse<'a> {
    digest: &'a str,
    model: &'a CptModel,
}

async fn build_handler(
    State(state): State<Arc<SessionState>>,
    body: Bytes,
) -> Result<JsonBody, Problem> {
    let req: BuildRequest = parse_body(&body)?;
    let built = state
        .model(req.phase, req.size, req.smoothing)
        .map_err(Problem::from_core)?;
    Ok(json(&BuildResponse {
        digest: &built.digest,
        model: &built.model,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRequest {
    phase: Phase,
    size: SizeCategory,
    #[serde(default)]
    smoothing: f64,
    #[serde(default)]
    evidence: Evidence,
}

#[derive(Serialize)]
struct QueryResponse<'a> {
    phase: Phase,
    size: SizeCategory,
    digest: &'a str,
    evidence: &'a Evidence,
    posterior: inspectkit_core::bbn::DiDistribution,
}

async fn query_handler(
    State(state): State<Arc<SessionState>>,
    body: Bytes,
) -> Result<JsonBody, Problem> {
    let req: QueryRequest = parse_body(&body)?;
    let built = state
        .model(req.phase, req.size, req.smoothing)
        .map_err(Problem::from_core)?;
    let posterior = built.model.posterior(&req.evidence).map_err(Problem::from_core)?;
    Ok(json(&QueryResponse {
        phase: req.phase,
        size: req.size,
        digest: &built.digest,
        evidence: &req.evidence,
        posterior,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    phase: Phase,
    size: SizeCategory,
    #[serde(default)]
    smoothing: f64,
    target: Vec<DiLevel>,
    grid: Vec<Evidence>,
}

#[derive(Serialize)]
struct RecommendResponse<'a> {
    digest: &'a str,
    target: &'a [DiLevel],
    ranking: Vec<inspectkit_core::bbn::Recommendation>,
}

async fn recommend_handler(
    State(state): State<Arc<SessionState>>,
    body: Bytes,
) -> Result<JsonBody, Problem> {
    let req: RecommendRequest = parse_body(&body)?;
    let built = state
        .model(req.phase, req.size, req.smoothing)
        .map_err(Problem::from_core)?;
    let ranking = recommend(&built.model, &req.target, &req.grid).map_err(Problem::from_core)?;
    Ok(json(&RecommendResponse {
        digest: &built.digest,
        target: &req.target,
        ranking,
    }))
}
