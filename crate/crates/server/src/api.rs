use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use triage_core::domain::{AnnotationRecord, EntitySpan, EntityTag, HelpLabel, Tweet};
use triage_core::geoloc::BoundingBox;

use crate::error::ServerError;
use crate::pipeline::{Pipeline, PipelineStats, Stage};
use crate::store::{ResultFilter, Store};

pub const DEFAULT_LIMIT: usize = 100;
pub const MAX_LIMIT: usize = 5000;

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub store: Arc<Store>,
    pub max_batch: usize,
}

impl AppState {
    fn bbox(&self) -> Option<BoundingBox> {
        self.pipeline.geocoder.config().bbox
    }
}

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

    fn bad_request(m: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, m)
    }
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        log::error!("{e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"error": {"status": self.status.as_u16(), "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejected {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub accepted: u64,
    pub duplicates: u64,
    /// Array elements that were not valid tweets; the rest of the batch still ran.
    pub rejected: Vec<Rejected>,
    /// Funnel counts contributed by this batch.
    pub stats: PipelineStats,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/v1/tweets", post(ingest))
        .route("/api/v1/tweets/{id}", get(tweet_detail))
        .route("/api/v1/results", get(results))
        .route("/api/v1/filters", get(filters))
        .route("/api/v1/annotations", post(annotate))
        .route("/api/v1/stats", get(stats))
        .route("/config.json", get(ui_config))
        .layer(DefaultBodyLimit::max(256 * 1024 * 1024))
        .with_state(state)
}

fn parse_json(body: &[u8]) -> Result<Value, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))
}

fn run_batch(state: &AppState, items: Vec<Value>) -> Result<IngestSummary, ServerError> {
    let mut sum = IngestSummary {
        accepted: 0,
        duplicates: 0,
        rejected: Vec::new(),
        stats: PipelineStats::default(),
    };
    for (index, item) in items.into_iter().enumerate() {
        let tweet = match serde_json::from_value::<Tweet>(item) {
            Ok(t) => t,
            Err(e) => {
                sum.rejected.push(Rejected { index, error: e.to_string() });
                continue;
            }
        };
        if let Err(e) = tweet.validate() {
            sum.rejected.push(Rejected { index, error: e.to_string() });
            continue;
        }
        if state.store.contains(&tweet.id)? {
            sum.duplicates += 1;
            continue;
        }
        let result = match state.pipeline.run(&tweet) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("tweet {}: {e}", tweet.id);
                sum.rejected.push(Rejected { index, error: e.to_string() });
                continue;
            }
        };
        // a concurrent batch may have stored the same id meanwhile
        if state.store.insert(&tweet, &result)? {
            sum.accepted += 1;
            sum.stats.count(result.stage, 1);
        } else {
            sum.duplicates += 1;
        }
    }
    Ok(sum)
}

async fn ingest(State(state): State<AppState>, body: Bytes) -> ApiResult<IngestSummary> {
    let Value::Array(items) = parse_json(&body)? else {
        return Err(ApiError::bad_request("body must be a JSON array of tweets"));
    };
    if items.len() > state.max_batch {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("batch of {} exceeds the limit of {}", items.len(), state.max_batch),
        ));
    }
    let st = state.clone();
    let sum = tokio::task::spawn_blocking(move || run_batch(&st, items))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    log::info!(
        "batch: accepted={} duplicates={} rejected={} delta={}",
        sum.accepted,
        sum.duplicates,
        sum.rejected.len(),
        serde_json::to_string(&sum.stats).unwrap_or_default()
    );
    Ok(Json(sum))
}

fn parse_usize(q: &HashMap<String, String>, key: &str, default: usize) -> Result<usize, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ApiError::bad_request(format!("{key}={v:?} is not a non-negative integer"))),
    }
}

fn non_empty(q: &HashMap<String, String>, key: &str) -> Option<String> {
    q.get(key).filter(|v| !v.trim().is_empty()).cloned()
}

async fn results(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Value> {
    let stage = match non_empty(&q, "stage") {
        None => None,
        Some(s) => Some(s.parse::<Stage>().map_err(ApiError::bad_request)?),
    };
    let limit = parse_usize(&q, "limit", DEFAULT_LIMIT)?;
    if limit > MAX_LIMIT {
        return Err(ApiError::bad_request(format!("limit must be <= {MAX_LIMIT}")));
    }
    let filter = ResultFilter {
        name: non_empty(&q, "name"),
        status: non_empty(&q, "status"),
        stage,
        limit,
        offset: parse_usize(&q, "offset", 0)?,
    };
    let page = state.store.query_results(&filter)?;
    Ok(Json(serde_json::to_value(page).map_err(ServerError::from)?))
}

async fn filters(State(state): State<AppState>) -> ApiResult<Value> {
    Ok(Json(serde_json::to_value(state.store.filters()?).map_err(ServerError::from)?))
}

async fn tweet_detail(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    match state.store.detail(&id)? {
        Some(d) => Ok(Json(serde_json::to_value(d).map_err(ServerError::from)?)),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("no tweet {id:?}"))),
    }
}

#[derive(Debug, Deserialize)]
struct SpanInput {
    tag: EntityTag,
    start: usize,
    end: usize,
    surface: Option<String>,
}

#[derive(Debug, Deserialize)]
struct AnnotationInput {
    tweet_id: String,
    label: HelpLabel,
    #[serde(default)]
    spans: Vec<SpanInput>,
    annotator: String,
}

async fn annotate(State(state): State<AppState>, body: Bytes) -> ApiResult<AnnotationRecord> {
    let unprocessable = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, m);
    let input: AnnotationInput = serde_json::from_value(parse_json(&body)?).map_err(|e| unprocessable(e.to_string()))?;
    if input.annotator.trim().is_empty() {
        return Err(unprocessable("annotator must not be empty".into()));
    }
    let Some(tweet) = state.store.tweet(&input.tweet_id)? else {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("no tweet {:?}", input.tweet_id),
        ));
    };
    let mut spans = Vec::with_capacity(input.spans.len());
    for s in &input.spans {
        let span = EntitySpan::from_text(&tweet.text, s.tag, s.start, s.end).map_err(|e| unprocessable(e.to_string()))?;
        if s.surface.as_ref().is_some_and(|given| *given != span.surface) {
            return Err(unprocessable(format!(
                "surface {:?} does not match text [{}, {})",
                s.surface.as_deref().unwrap_or_default(),
                s.start,
                s.end
            )));
        }
        spans.push(span);
    }
    spans.sort_by_key(|s| (s.start, s.end));
    let rec = AnnotationRecord {
        tweet_id: input.tweet_id,
        label: input.label,
        spans,
        annotator: input.annotator,
        created_at: Utc::now(),
    };
    rec.validate_against(&tweet.text).map_err(|e| unprocessable(e.to_string()))?;
    state.store.upsert_annotation(&rec)?;
    Ok(Json(rec))
}

async fn stats(State(state): State<AppState>) -> ApiResult<PipelineStats> {
    Ok(Json(state.store.stats()?))
}

async fn ui_config(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"api_base": "/api/v1", "bbox": state.bbox()}))
}
