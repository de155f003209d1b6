//! JSON-over-HTTP service.
//!
//! Every response carries an `X-Client-Token` header. Requests without a
//! valid token get a fresh one, which clients should send back from then on.
//! Admin routes need `Authorization: Bearer <admin token>`.

mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Extension, Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::app::{BulkSpec, Engine, Scheduler};
use crate::ingest::parse_url_csv;
use crate::model::{parse_aspect, Aspect, CardId};
use crate::store::{CardFilter, CardOrder, ClientToken, ImportState, DEFAULT_PAGE_LIMIT, MAX_PAGE_LIMIT};

pub use error::ApiError;

pub const CLIENT_TOKEN_HEADER: &str = "x-client-token";
pub const DEFAULT_SEARCH_K: usize = 10;
const DEFAULT_BULK_LIMIT: usize = 20;

#[derive(Clone)]
pub struct ApiState {
    pub engine: Arc<Engine>,
    pub admin_token: Option<String>,
    pub import_budget: Duration,
}

impl ApiState {
    pub fn new(engine: Arc<Engine>, admin_token: Option<String>) -> Self {
        ApiState { engine, admin_token, import_budget: Duration::from_secs(60) }
    }
}

pub fn router(state: ApiState) -> Router {
    let admin = Router::new()
        .route("/imports", get(list_imports))
        .route("/imports/{id}/approve", post(approve_import))
        .route("/imports/{id}/reject", post(reject_import))
        .route("/admin/bulk-import", post(bulk_import))
        .route("/admin/jobs/{id}", get(job_status))
        .route("/admin/runs", get(list_runs))
        .route("/admin/update", post(run_update))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_admin));
    Router::new()
        .route("/health", get(health))
        .route("/meta/aspects", get(meta_aspects))
        .route("/meta/domains", get(meta_domains))
        .route("/cards", get(list_cards))
        .route("/cards/search", get(search_cards))
        .route("/cards/{id}", get(get_card))
        .route("/bookmarks", get(list_bookmarks))
        .route("/bookmarks/{id}", post(add_bookmark).delete(remove_bookmark))
        .route("/dismissals/{id}", post(dismiss))
        .route("/imports", post(submit_import))
        .merge(admin)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .method_not_allowed_fallback(|| async { ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route") })
        .layer(middleware::from_fn(client_token))
        .with_state(state)
}

/// Serve until ctrl-c. When `scheduler` is given, it is checked every
/// `check_every` on a blocking worker.
pub async fn serve(state: ApiState, addr: SocketAddr, scheduler: Option<(Arc<Scheduler>, Duration)>) -> std::io::Result<()> {
    if let Some((scheduler, every)) = scheduler {
        let engine = state.engine.clone();
        tokio::spawn(async move {
            let mut ticks = tokio::time::interval(every);
            ticks.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                ticks.tick().await;
                let (s, e) = (scheduler.clone(), engine.clone());
                if let Err(err) = tokio::task::spawn_blocking(move || s.tick(&e)).await {
                    tracing::error!("scheduler tick panicked: {err}");
                }
            }
        });
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn client_token(mut req: Request, next: Next) -> Response {
    let token = req
        .headers()
        .get(CLIENT_TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| ClientToken::parse(v).ok())
        .unwrap_or_else(ClientToken::generate);
    req.extensions_mut().insert(token.clone());
    let mut resp = next.run(req).await;
    if let Ok(v) = HeaderValue::from_str(token.as_str()) {
        resp.headers_mut().insert(CLIENT_TOKEN_HEADER, v);
    }
    resp
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn require_admin(State(state): State<ApiState>, req: Request, next: Next) -> Response {
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    match (&state.admin_token, presented) {
        (Some(expected), Some(given)) if !expected.is_empty() && constant_time_eq(expected.as_bytes(), given.as_bytes()) => next.run(req).await,
        _ => ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "admin credential required").into_response(),
    }
}

type Params = Query<HashMap<String, String>>;

fn param_usize(params: &HashMap<String, String>, name: &str, default: usize) -> Result<usize, ApiError> {
    match params.get(name).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(default),
        Some(raw) => raw.parse().map_err(|_| ApiError::bad_request(format!("{name} must be a non-negative integer"))),
    }
}

fn list_param(params: &HashMap<String, String>, name: &str) -> Vec<String> {
    params
        .get(name)
        .map(|raw| raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default()
}

fn filter_from(params: &HashMap<String, String>, client: &ClientToken) -> Result<CardFilter, ApiError> {
    let aspects = list_param(params, "aspects")
        .iter()
        .map(|a| parse_aspect(a).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "unknown_aspect", e.to_string())))
        .collect::<Result<Vec<Aspect>, _>>()?;
    Ok(CardFilter {
        domains: list_param(params, "domains"),
        aspects,
        query: params.get("q").cloned().filter(|q| !q.trim().is_empty()),
        exclude_for: Some(client.clone()),
    })
}

async fn health(State(state): State<ApiState>) -> Json<Value> {
    Json(json!({ "status": "ok", "cards": state.engine.store.card_count() }))
}

async fn meta_aspects() -> Json<Value> {
    let aspects: Vec<Value> = Aspect::ALL.iter().map(|a| json!({ "name": a.name(), "color": a.color(), "index": a.index() })).collect();
    Json(json!({ "aspects": aspects }))
}

async fn meta_domains(State(state): State<ApiState>) -> Json<Value> {
    let domains: Vec<Value> = state
        .engine
        .store
        .domains()
        .into_iter()
        .filter(|d| d.approved)
        .map(|d| json!({ "name": d.name, "keywords": d.keywords }))
        .collect();
    Json(json!({ "domains": domains }))
}

async fn list_cards(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, Query(params): Params) -> Result<Json<Value>, ApiError> {
    let limit = param_usize(&params, "limit", DEFAULT_PAGE_LIMIT)?;
    if limit > MAX_PAGE_LIMIT {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "limit_exceeded", format!("limit {limit} exceeds the maximum of {MAX_PAGE_LIMIT}")));
    }
    let offset = param_usize(&params, "offset", 0)?;
    let filter = filter_from(&params, &client)?;
    let (order, seed) = match params.get("order").map(String::as_str).unwrap_or("shuffled") {
        "newest" => (CardOrder::Newest, None),
        "shuffled" | "" => {
            let seed = match params.get("seed").filter(|s| !s.is_empty()) {
                Some(s) => s.parse::<u64>().map_err(|_| ApiError::bad_request("seed must be an unsigned integer"))?,
                None => rand::random::<u32>().into(),
            };
            (CardOrder::Shuffled(seed), Some(seed))
        }
        other => return Err(ApiError::bad_request(format!("unknown order {other:?}; use shuffled or newest"))),
    };
    let store = state.engine.store.clone();
    let page = blocking(move || Ok(store.list_cards(&filter, order, offset, limit)?)).await?;
    Ok(Json(json!({
        "total": page.total,
        "offset": page.offset,
        "limit": page.limit,
        "order": if seed.is_some() { "shuffled" } else { "newest" },
        "seed": seed,
        "cards": page.cards,
    })))
}

async fn search_cards(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, Query(params): Params) -> Result<Json<Value>, ApiError> {
    let query = params.get("q").map(|q| q.trim().to_string()).filter(|q| !q.is_empty()).ok_or_else(|| ApiError::bad_request("q is required"))?;
    let k = param_usize(&params, "k", DEFAULT_SEARCH_K)?;
    if k == 0 || k > MAX_PAGE_LIMIT {
        return Err(ApiError::bad_request(format!("k must be between 1 and {MAX_PAGE_LIMIT}")));
    }
    let mut filter = filter_from(&params, &client)?;
    filter.query = None;
    let engine = state.engine.clone();
    let q = query.clone();
    let results = blocking(move || Ok(engine.store.semantic_search(&q, k, &filter, &engine.gateway)?)).await?;
    Ok(Json(json!({ "query": query, "k": k, "results": results })))
}

async fn get_card(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let view = state.engine.store.card_view(&CardId(id.clone())).ok_or_else(|| ApiError::unknown_card(&id))?;
    Ok(Json(serde_json::to_value(view).expect("card view serializes")))
}

async fn list_bookmarks(State(state): State<ApiState>, Extension(client): Extension<ClientToken>) -> Result<Json<Value>, ApiError> {
    let store = state.engine.store.clone();
    let cards = blocking(move || Ok(store.list_bookmarks(&client)?)).await?;
    Ok(Json(json!({ "cards": cards })))
}

async fn add_bookmark(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = state.engine.store.clone();
    let card = CardId(id.clone());
    blocking(move || Ok(store.bookmark(&client, &card)?)).await?;
    Ok(Json(json!({ "card_id": id, "bookmarked": true })))
}

async fn remove_bookmark(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = state.engine.store.clone();
    let card = CardId(id.clone());
    blocking(move || Ok(store.unbookmark(&client, &card)?)).await?;
    Ok(Json(json!({ "card_id": id, "bookmarked": false })))
}

async fn dismiss(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let store = state.engine.store.clone();
    let card = CardId(id.clone());
    blocking(move || Ok(store.dismiss(&client, &card)?)).await?;
    Ok(Json(json!({ "card_id": id, "dismissed": true })))
}

#[derive(Deserialize)]
struct ImportBody {
    url: String,
    domain: String,
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

async fn submit_import(State(state): State<ApiState>, Extension(client): Extension<ClientToken>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let body: ImportBody = parse_json(&body)?;
    let engine = state.engine.clone();
    let work = blocking(move || Ok(engine.submit_import(&client, &body.url, &body.domain)?));
    let item = tokio::time::timeout(state.import_budget, work).await.map_err(|_| {
        ApiError::new(StatusCode::GATEWAY_TIMEOUT, "import_timeout", format!("import did not finish within {}s", state.import_budget.as_secs()))
    })??;
    Ok(Json(serde_json::to_value(item).expect("import serializes")))
}

async fn list_imports(State(state): State<ApiState>, Query(params): Params) -> Result<Json<Value>, ApiError> {
    let filter = match params.get("state").map(String::as_str) {
        None | Some("") | Some("all") => None,
        Some("pending") => Some(ImportState::Pending),
        Some("approved") => Some(ImportState::Approved),
        Some("rejected") => Some(ImportState::Rejected),
        Some(other) => return Err(ApiError::bad_request(format!("unknown state {other:?}"))),
    };
    let store = state.engine.store.clone();
    let items = blocking(move || Ok(store.list_imports(filter)?)).await?;
    Ok(Json(json!({ "imports": items })))
}

async fn approve_import(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let engine = state.engine.clone();
    let item = blocking(move || Ok(engine.approve_import(&id)?)).await?;
    Ok(Json(serde_json::to_value(item).expect("import serializes")))
}

async fn reject_import(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let engine = state.engine.clone();
    let item = blocking(move || Ok(engine.reject_import(&id)?)).await?;
    Ok(Json(serde_json::to_value(item).expect("import serializes")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeywordSpec {
    domain: String,
    keywords: Vec<String>,
    #[serde(default)]
    sources: Vec<String>,
    #[serde(default)]
    limit: Option<usize>,
}

/// `text/csv` bodies are URL lists (`url[,domain]`, `?domain=` supplies the
/// default); JSON bodies are keyword searches over configured sources.
async fn bulk_import(State(state): State<ApiState>, headers: HeaderMap, Query(params): Params, body: Bytes) -> Result<Response, ApiError> {
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("").to_ascii_lowercase();
    let spec = if content_type.starts_with("application/json") {
        let k: KeywordSpec = parse_json(&body)?;
        BulkSpec::Keywords { domain: k.domain, keywords: k.keywords, sources: k.sources, limit: k.limit.unwrap_or(DEFAULT_BULK_LIMIT) }
    } else if content_type.starts_with("text/csv") || content_type.is_empty() {
        let text = std::str::from_utf8(&body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_csv", "CSV body is not UTF-8"))?;
        let rows = parse_url_csv(text).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_csv", e.to_string()))?;
        BulkSpec::Urls { rows, default_domain: params.get("domain").cloned() }
    } else {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", "send text/csv or application/json"));
    };
    let engine = state.engine.clone();
    let id = blocking(move || Ok(engine.start_bulk(spec)?)).await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))).into_response())
}

async fn job_status(State(state): State<ApiState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let status = state.engine.job(&id)?;
    Ok(Json(serde_json::to_value(status).expect("job status serializes")))
}

async fn list_runs(State(state): State<ApiState>) -> Result<Json<Value>, ApiError> {
    let store = state.engine.store.clone();
    let runs = blocking(move || Ok(store.runs()?)).await?;
    Ok(Json(json!({ "runs": runs })))
}

async fn run_update(State(state): State<ApiState>) -> Result<Json<Value>, ApiError> {
    let engine = state.engine.clone();
    let run = blocking(move || Ok(engine.run_weekly_update()?)).await?;
    Ok(Json(serde_json::to_value(run).expect("run serializes")))
}
