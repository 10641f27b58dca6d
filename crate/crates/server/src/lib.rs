//! HTTP API for the review console.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/health` | liveness |
//! | GET | `/segments?sort=&order=&page=&page_size=` | paged segment summaries |
//! | GET | `/segments/{id}/candidates` | regenerated candidates with scores |
//! | POST | `/segments/{id}/override` | record a reviewer decision |
//! | GET | `/layers?bbox=minx,miny,maxx,maxy` | street and measurement layers |
//!
//! The service has no authentication and is meant for a trusted host.

mod state;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lowres_match::criteria::{CriterionId, CriterionScores};
use lowres_match::matcher::{compare_candidates, MatchResult, MatchStatus};
use lowres_match::overrides::Decision;
use lowres_match::report::{measurement_layer, street_layer, worst_first, BBox, ScoreTable};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

pub use state::{AppState, StateError, View};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;

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
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StateError> for ApiError {
    fn from(e: StateError) -> Self {
        let status = match e {
            StateError::UnknownSegment(_) => StatusCode::NOT_FOUND,
            StateError::InvalidFingerprint { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            StateError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

/// Routes of the API; when `static_dir` is given its files are served for
/// every other path.
pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/segments", get(list_segments))
        .route("/segments/{id}/candidates", get(get_candidates))
        .route("/segments/{id}/override", post(post_override))
        .route("/layers", get(get_layers))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves `app` until ctrl-c. Overrides are synced to disk as they are
/// posted, so nothing is pending at shutdown.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    let view = state.view();
    Json(json!({
        "status": "ok",
        "run_id": state.run.run_id,
        "criterion": state.run.criterion,
        "k": state.run.k,
        "segments": view.results.len(),
        "overrides": view.history_len,
    }))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentSummary {
    pub seg_id: String,
    pub sensor_id: String,
    pub status: String,
    pub reason: Option<String>,
    pub scores: Option<CriterionScores>,
    pub normalized: Option<CriterionScores>,
    pub overridden: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentPage {
    pub sort: CriterionId,
    pub order: String,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub items: Vec<SegmentSummary>,
}

fn status_parts(r: &MatchResult) -> (String, Option<String>) {
    match r.status {
        MatchStatus::Matched => ("matched".into(), None),
        MatchStatus::Unmatched(reason) => ("unmatched".into(), Some(reason.as_str().into())),
    }
}

fn parse_param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| ApiError::bad_request(format!("invalid value {v:?} for {key}"))),
    }
}

/// Matched segments sorted by the requested raw score (worst first for
/// `desc`, ties by segment id), then unmatched segments by id.
async fn list_segments(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> ApiResult<SegmentPage> {
    let sort: CriterionId = parse_param(&q, "sort", state.run.criterion)?;
    let order = q.get("order").map_or("desc", |s| s.as_str());
    if order != "asc" && order != "desc" {
        return Err(ApiError::bad_request(format!("order must be asc or desc, got {order:?}")));
    }
    let page: usize = parse_param(&q, "page", 1)?;
    let page_size: usize = parse_param(&q, "page_size", DEFAULT_PAGE_SIZE)?;
    if page == 0 || page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page starts at 1 and page_size must be in 1..={MAX_PAGE_SIZE}"
        )));
    }

    let view = state.view();
    let table = ScoreTable::from_results(&view.results);
    let normalized: BTreeMap<&str, CriterionScores> = table.rows.iter().map(|r| (r.seg_id.as_str(), r.normalized())).collect();
    let mut ordered: Vec<&MatchResult> = worst_first(&view.results, sort).into_iter().map(|(r, _)| r).collect();
    if order == "asc" {
        ordered.sort_by(|x, y| {
            let (a, b) = (x.scores.unwrap().get(sort), y.scores.unwrap().get(sort));
            a.total_cmp(&b).then_with(|| x.seg_id.cmp(&y.seg_id))
        });
    }
    let mut rest: Vec<&MatchResult> = view.results.iter().filter(|r| !r.is_matched()).collect();
    rest.sort_by(|x, y| x.seg_id.cmp(&y.seg_id));
    ordered.extend(rest);

    let total = ordered.len();
    let items = ordered
        .into_iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|r| {
            let (status, reason) = status_parts(r);
            SegmentSummary {
                seg_id: r.seg_id.clone(),
                sensor_id: r.sensor_id.clone(),
                status,
                reason,
                scores: r.scores,
                normalized: normalized.get(r.seg_id.as_str()).copied(),
                overridden: r.overridden,
            }
        })
        .collect();
    Ok(Json(SegmentPage {
        sort,
        order: order.to_string(),
        page,
        page_size,
        total,
        items,
    }))
}

/// Every candidate the matcher evaluates for the segment, best first under
/// the run's criterion. `chosen` marks the path currently in effect.
async fn get_candidates(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Value> {
    let seg = state
        .prepared
        .measurements
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown segment {id:?}")))?;
    let view = state.view();
    let current = view
        .results
        .iter()
        .find(|r| r.seg_id == id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown segment {id:?}")))?;
    let (status, reason) = status_parts(current);

    let m = state.matcher()?;
    let mut scored = m.evaluate(seg, &mut m.search_space());
    let criterion = state.run.criterion;
    scored.sort_by(|x, y| compare_candidates(criterion, x, y));
    let coords = state.coords();
    let chosen = current.chosen.as_ref();
    let candidates: Vec<Value> = scored
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let rec = c.path.record(m.network());
            let is_chosen = chosen.is_some_and(|p| p.nodes == rec.nodes && p.orientation == rec.orientation);
            let line: Vec<Value> = rec
                .geometry
                .iter()
                .map(|xy| {
                    let p = coords.point(lowres_match::geometry::Point::new(xy[0], xy[1]));
                    json!([p.x, p.y])
                })
                .collect();
            json!({
                "rank": i + 1,
                "fingerprint": rec.nodes,
                "orientation": rec.orientation,
                "street_edges": rec.street_edges,
                "geometry": { "type": "LineString", "coordinates": line },
                "path_length_m": rec.path_length_m,
                "anchor_start_m": rec.anchor_start_m,
                "anchor_end_m": rec.anchor_end_m,
                "scores": c.scores,
                "chosen": is_chosen,
            })
        })
        .collect();
    Ok(Json(json!({
        "seg_id": id,
        "sensor_id": current.sensor_id,
        "status": status,
        "reason": reason,
        "criterion_used": criterion,
        "overridden": current.overridden,
        "candidates": candidates,
    })))
}

#[derive(Debug, Deserialize)]
pub struct OverrideRequest {
    #[serde(flatten)]
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
}

async fn post_override(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<OverrideRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Value> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let record = state.record(&id, req.decision, req.note).await?;
    Ok(Json(json!({ "ok": true, "override": record })))
}

async fn get_layers(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Value> {
    let bbox = match q.get("bbox") {
        Some(s) => Some(s.parse::<BBox>().map_err(ApiError::bad_request)?),
        None => None,
    };
    let coords = state.coords();
    Ok(Json(json!({
        "streets": street_layer(&state.prepared.network, coords, bbox.as_ref()),
        "measurements": measurement_layer(&state.prepared.measurements, coords, bbox.as_ref()),
    })))
}
