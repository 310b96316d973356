//! HTTP/JSON API over one loaded artifact and its corpus.
//!
//! | route | body / query | success |
//! |---|---|---|
//! | `GET /api/health` | | `{status, artifact_digest, histogram_counts: {auto, user}}` |
//! | `GET /api/examples` | `offset`, `limit` (1..=500), `entity_id` | `{examples: [{id, text}], total, offset, limit}` |
//! | `GET /api/histograms` | `sort=total\|entropy` | `{sort, histograms: [Histogram]}` |
//! | `POST /api/search` | `{query, mode: exact\|semantic}` | `{results: [SearchResult]}` |
//! | `POST /api/categories` | `{category}` | `{id, category, llm_examples, suggestions}` |
//! | `POST /api/histograms` | `{pending_id, label, entity_ids}` | `201` + `Histogram` |
//!
//! Errors are `{"error": message}` with a 4xx/5xx status.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Query, Request, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::compression::predicate::SizeAbove;
use tower_http::compression::CompressionLayer;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use histoscope_core::config::ServerConfig;
use histoscope_core::corpus::Corpus;
use histoscope_core::extraction::EntityId;
use histoscope_core::histogram::{sort_histogram_refs, Histogram, SortKey};
use histoscope_core::pipeline::Providers;
use histoscope_core::query::{
    create_user_histogram, exact_search, generate_candidate_entities, semantic_search,
    suggest_dataset_entities, EntitySuggestion, QueryError, SearchResult,
};
use histoscope_core::store::{save_artifact, AnalysisArtifact, StoreError};

pub const MAX_PAGE: usize = 500;
const DEFAULT_PAGE: usize = 50;
const COMPRESS_ABOVE: u16 = 8 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Provider(_) | QueryError::Embedding(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())
            }
            _ => ApiError::bad_request(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PendingView {
    pub id: String,
    pub category: String,
    pub llm_examples: Vec<String>,
    pub suggestions: Vec<EntitySuggestion>,
}

struct Pending {
    view: PendingView,
    created: Instant,
}

/// Mutable session state, behind one lock so creation requests are
/// serialized.
struct Writable {
    user_histograms: Vec<Histogram>,
    next_user_sequence: u64,
    next_pending: u64,
    pending: HashMap<String, Pending>,
}

/// One loaded artifact plus its corpus and providers.
pub struct Session {
    artifact: AnalysisArtifact,
    corpus: Corpus,
    providers: Providers,
    config: ServerConfig,
    artifact_path: Option<PathBuf>,
    writable: Mutex<Writable>,
    user_snapshot: RwLock<Arc<Vec<Histogram>>>,
}

fn user_sequence(id: &str) -> Option<u64> {
    id.strip_prefix("user-")?.parse().ok()
}

impl Session {
    /// `artifact_path`, when given, receives the artifact again each time a
    /// user histogram is created.
    pub fn new(
        artifact: AnalysisArtifact,
        corpus: Corpus,
        providers: Providers,
        config: ServerConfig,
        artifact_path: Option<PathBuf>,
    ) -> Result<Self, StoreError> {
        artifact.validate_against_corpus(&corpus)?;
        if let Some(cache) = &artifact.embeddings {
            providers.embedder.preload(cache);
        }
        let user = artifact.user_histograms.clone();
        let next_user_sequence = user.iter().filter_map(|h| user_sequence(&h.id)).max().unwrap_or(0) + 1;
        Ok(Session {
            writable: Mutex::new(Writable {
                user_histograms: user.clone(),
                next_user_sequence,
                next_pending: 1,
                pending: HashMap::new(),
            }),
            user_snapshot: RwLock::new(Arc::new(user)),
            artifact,
            corpus,
            providers,
            config,
            artifact_path,
        })
    }

    fn user_histograms(&self) -> Arc<Vec<Histogram>> {
        self.user_snapshot.read().expect("snapshot lock").clone()
    }

    fn all_histograms(&self) -> Vec<Histogram> {
        let user = self.user_histograms();
        self.artifact.auto_histograms.iter().chain(user.iter()).cloned().collect()
    }
}

#[derive(Clone)]
pub struct AppState {
    session: Option<Arc<Session>>,
}

impl AppState {
    pub fn loaded(session: Session) -> Self {
        AppState {
            session: Some(Arc::new(session)),
        }
    }

    /// A server with no artifact: health reports 503, other routes likewise.
    pub fn unloaded() -> Self {
        AppState { session: None }
    }

    fn session(&self) -> Result<Arc<Session>, ApiError> {
        self.session
            .clone()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no artifact loaded"))
    }
}

pub fn router(state: AppState, config: &ServerConfig) -> Router {
    let cors = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    let cors = if config.cors_origins.is_empty() {
        cors.allow_origin(Any)
    } else {
        let origins: Vec<HeaderValue> = config
            .cors_origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        cors.allow_origin(AllowOrigin::list(origins))
    };
    Router::new()
        .route("/api/health", get(health))
        .route("/api/examples", get(examples))
        .route("/api/histograms", get(list_histograms).post(create_histogram))
        .route("/api/search", axum::routing::post(search))
        .route("/api/categories", axum::routing::post(categories))
        .fallback(|| async { ApiError::not_found("no such route") })
        .with_state(state)
        .layer(CompressionLayer::new().compress_when(SizeAbove::new(COMPRESS_ABOVE)))
        .layer(cors)
        .layer(middleware::from_fn(log_request))
}

async fn log_request(request: Request, next: Next) -> Response {
    let method = request.method().clone();
    let path = request.uri().path().to_string();
    let start = Instant::now();
    let response = next.run(request).await;
    tracing::info!(
        "{method} {path} {} {:.1}ms",
        response.status().as_u16(),
        start.elapsed().as_secs_f64() * 1000.0
    );
    response
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

/// Runs a provider-bound closure off the async workers, bounded by the
/// configured timeout.
async fn blocking<T: Send + 'static>(
    session: &Session,
    work: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let limit = Duration::from_secs(session.config.provider_timeout_secs);
    match tokio::time::timeout(limit, tokio::task::spawn_blocking(work)).await {
        Ok(Ok(result)) => result,
        Ok(Err(join)) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, join.to_string())),
        Err(_) => Err(ApiError::new(
            StatusCode::GATEWAY_TIMEOUT,
            format!("provider did not answer within {}s", limit.as_secs()),
        )),
    }
}

async fn health(State(state): State<AppState>) -> Response {
    match &state.session {
        Some(s) => Json(json!({
            "status": "ok",
            "artifact_digest": s.artifact.corpus_digest,
            "histogram_counts": {
                "auto": s.artifact.auto_histograms.len(),
                "user": s.user_histograms().len(),
            },
        }))
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({
                "status": "unavailable",
                "artifact_digest": null,
                "histogram_counts": { "auto": 0, "user": 0 },
            })),
        )
            .into_response(),
    }
}

fn int_param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    params
        .get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| ApiError::bad_request(format!("{key} must be a non-negative integer, got {v:?}")))
        })
        .transpose()
}

#[derive(Serialize)]
struct ExampleView<'a> {
    id: u32,
    text: &'a str,
}

async fn examples(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let s = state.session()?;
    let offset: usize = int_param(&params, "offset")?.unwrap_or(0);
    let limit: usize = int_param(&params, "limit")?.unwrap_or(DEFAULT_PAGE);
    if !(1..=MAX_PAGE).contains(&limit) {
        return Err(ApiError::bad_request(format!("limit must be between 1 and {MAX_PAGE}")));
    }
    let entity: Option<EntityId> = int_param(&params, "entity_id")?;

    let ids: Vec<u32> = match entity {
        Some(id) => s
            .artifact
            .entities
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown entity_id {id}")))?
            .postings
            .clone(),
        None => (0..s.corpus.len() as u32).collect(),
    };
    let page: Vec<u32> = ids.iter().skip(offset).take(limit).copied().collect();
    let examples = s
        .corpus
        .get_examples(&page)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let body = json!({
        "examples": examples.iter().map(|e| ExampleView { id: e.id, text: &e.text }).collect::<Vec<_>>(),
        "total": ids.len(),
        "offset": offset,
        "limit": limit,
    });
    Ok(Json(body).into_response())
}

async fn list_histograms(
    State(state): State<AppState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let s = state.session()?;
    let (key, name) = match params.get("sort").map(String::as_str) {
        None | Some("total") => (SortKey::TotalCount, "total"),
        Some("entropy") => (SortKey::Entropy, "entropy"),
        Some(other) => {
            return Err(ApiError::bad_request(format!(
                "unknown sort key {other:?} (expected total or entropy)"
            )))
        }
    };
    let user = s.user_histograms();
    let mut refs: Vec<&Histogram> = s.artifact.auto_histograms.iter().chain(user.iter()).collect();
    sort_histogram_refs(&mut refs, key);
    Ok(Json(json!({ "sort": name, "histograms": refs })).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum SearchMode {
    Exact,
    Semantic,
}

#[derive(Deserialize)]
struct SearchBody {
    query: String,
    #[serde(default = "default_mode")]
    mode: SearchMode,
}

fn default_mode() -> SearchMode {
    SearchMode::Exact
}

#[derive(Serialize)]
struct SearchResponse {
    results: Vec<SearchResult>,
}

async fn search(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let s = state.session()?;
    let request: SearchBody = parse_body(&body)?;
    if request.query.trim().is_empty() {
        return Err(ApiError::bad_request("query must be non-empty"));
    }
    let results = match request.mode {
        SearchMode::Exact => exact_search(&request.query, &s.all_histograms()),
        SearchMode::Semantic => {
            let session = s.clone();
            blocking(&s, move || {
                let histograms = session.all_histograms();
                Ok(semantic_search(
                    &request.query,
                    &histograms,
                    &session.providers.embedder,
                    session.config.semantic_threshold,
                )?)
            })
            .await?
        }
    };
    Ok(Json(SearchResponse { results }).into_response())
}

#[derive(Deserialize)]
struct CategoryBody {
    category: String,
}

async fn categories(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let s = state.session()?;
    let request: CategoryBody = parse_body(&body)?;
    let category = request.category.trim().to_string();
    if category.is_empty() {
        return Err(ApiError::bad_request("category must be non-empty"));
    }
    let session = s.clone();
    let query_category = category.clone();
    let (llm_examples, suggestions) = blocking(&s, move || {
        let examples = generate_candidate_entities(&query_category, session.providers.generator.as_ref())?;
        let suggestions = if examples.is_empty() {
            Vec::new()
        } else {
            suggest_dataset_entities(
                &examples,
                &session.artifact.entities,
                &session.providers.embedder,
                session.config.suggestion_limit,
                session.config.suggestion_threshold,
            )?
        };
        Ok((examples, suggestions))
    })
    .await?;

    let ttl = Duration::from_secs(s.config.pending_ttl_secs);
    let mut w = s.writable.lock().expect("session lock");
    w.pending.retain(|_, p| p.created.elapsed() < ttl);
    let id = format!("pending-{}", w.next_pending);
    w.next_pending += 1;
    let view = PendingView {
        id: id.clone(),
        category,
        llm_examples,
        suggestions,
    };
    w.pending.insert(
        id,
        Pending {
            view: view.clone(),
            created: Instant::now(),
        },
    );
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
struct CreateBody {
    pending_id: String,
    label: String,
    entity_ids: Vec<EntityId>,
}

async fn create_histogram(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let s = state.session()?;
    let request: CreateBody = parse_body(&body)?;
    let ttl = Duration::from_secs(s.config.pending_ttl_secs);

    let session = s.clone();
    let histogram = tokio::task::spawn_blocking(move || -> Result<Histogram, ApiError> {
        let s = session;
        let mut w = s.writable.lock().expect("session lock");
        w.pending.retain(|_, p| p.created.elapsed() < ttl);
        let pending = w
            .pending
            .get(&request.pending_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown or expired pending_id {:?}", request.pending_id)))?;
        if request.entity_ids.is_empty() {
            return Err(ApiError::bad_request("select at least one entity"));
        }
        let offered: std::collections::HashSet<EntityId> =
            pending.view.suggestions.iter().map(|x| x.entity_id).collect();
        if let Some(foreign) = request.entity_ids.iter().find(|id| !offered.contains(id)) {
            return Err(ApiError::bad_request(format!(
                "entity_id {foreign} was not among the suggestions for {:?}",
                request.pending_id
            )));
        }
        let histogram = create_user_histogram(
            &request.label,
            &request.entity_ids,
            &s.artifact.entities,
            &s.corpus,
            w.next_user_sequence,
        )?;

        let mut user = w.user_histograms.clone();
        user.push(histogram.clone());
        if let Some(path) = &s.artifact_path {
            let mut artifact = s.artifact.clone();
            artifact.user_histograms = user.clone();
            save_artifact(&artifact, path)
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
        }
        w.next_user_sequence += 1;
        w.pending.remove(&request.pending_id);
        *s.user_snapshot.write().expect("snapshot lock") = Arc::new(user.clone());
        w.user_histograms = user;
        Ok(histogram)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;

    Ok((StatusCode::CREATED, Json(histogram)).into_response())
}
