use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use cpc_core::edit::Tooltip;
use cpc_core::{
    compute_layout, edit_mode_emphasis, from_automl_log, from_flat_csv, geometry_to_json, hit_test, parse_column_kinds,
    parse_cpc_json, to_cpc_json, to_svg, trace_values, AxisPath, BranchPath, Canvas, Dataset, EditOrigin, EditSession,
    Emphasis, ExpansionState, HighlightRequest, HitTarget, LayoutOptions, Point, Style, Value,
};
use serde::{Deserialize, Serialize};

use crate::error::{parse_json, ApiError};
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;

fn body(bytes: Result<Bytes, BytesRejection>) -> ApiResult<Bytes> {
    bytes.map_err(|e| ApiError::new(e.status(), "invalid_request", e.body_text()))
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<Dataset>> {
    state
        .store
        .dataset(id)
        .ok_or_else(|| ApiError::not_found("dataset", id))
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Cpc,
    Automl,
    Csv,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Upload {
    format: Format,
    payload: String,
    #[serde(default)]
    kinds: Option<String>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSummary {
    pub dataset_id: String,
    pub dimensions: usize,
    pub observations: usize,
    pub depth: usize,
}

fn summary(id: String, ds: &Dataset) -> DatasetSummary {
    DatasetSummary {
        dataset_id: id,
        dimensions: ds.schema().axis_paths().len(),
        observations: ds.observations().len(),
        depth: ds.schema().depth(),
    }
}

fn ingest(bytes: &[u8]) -> ApiResult<Dataset> {
    let is_upload = serde_json::from_slice::<serde_json::Value>(bytes)
        .ok()
        .is_some_and(|v| v.get("format").is_some());
    if !is_upload {
        return Ok(parse_cpc_json(bytes)?);
    }
    let upload: Upload = parse_json(bytes)?;
    let payload = upload.payload.as_bytes();
    Ok(match upload.format {
        Format::Cpc => parse_cpc_json(payload)?,
        Format::Automl => from_automl_log(payload)?,
        Format::Csv => {
            let spec = upload.kinds.ok_or_else(|| {
                ApiError::bad_request("invalid_request", "csv uploads need `kinds`").with_path("kinds")
            })?;
            from_flat_csv(payload, &parse_column_kinds(&spec)?)?
        }
    })
}

pub async fn create_dataset(
    State(state): State<AppState>,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<(StatusCode, Json<DatasetSummary>)> {
    let ds = ingest(&body(bytes)?)?;
    let depth = ds.schema().depth();
    if depth > state.config.max_depth {
        return Err(ApiError::bad_request(
            "limit_exceeded",
            format!("branch nesting {depth} exceeds the limit of {}", state.config.max_depth),
        ));
    }
    if ds.observations().len() > state.config.max_observations {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "limit_exceeded",
            format!(
                "{} observations exceed the limit of {}",
                ds.observations().len(),
                state.config.max_observations
            ),
        ));
    }
    let id = state.store.insert(ds.clone());
    tracing::info!(dataset = %id, "dataset loaded");
    Ok((StatusCode::CREATED, Json(summary(id, &ds))))
}

pub async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetSummary>> {
    Json(
        state
            .store
            .list()
            .into_iter()
            .map(|(id, ds)| summary(id, &ds))
            .collect(),
    )
}

pub async fn schema(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    let ds = lookup(&state, &id)?;
    let mut value = serde_json::to_value(ds.schema()).expect("schema serializes");
    let branches: Vec<String> = ds.schema().branch_paths().iter().map(ToString::to_string).collect();
    value["expandable"] = branches.into();
    Ok(Json(value))
}

/// Expansion, canvas and layout options: everything a view depends on
/// besides the dataset itself.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct View {
    pub expansion: Vec<BranchPath>,
    pub canvas: Canvas,
    pub options: LayoutOptions,
}

impl View {
    fn expansion(&self, ds: &Dataset) -> ApiResult<ExpansionState> {
        Ok(ExpansionState::from_paths(ds.schema(), &self.expansion)?)
    }
}

pub async fn layout(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let ds = lookup(&state, &id)?;
    let bytes = body(bytes)?;
    let view: View = if bytes.is_empty() {
        View::default()
    } else {
        parse_json(&bytes)?
    };
    let geometry = compute_layout(&ds, &view.expansion(&ds)?, view.canvas, view.options)?;
    Ok(json_text(geometry_to_json(&geometry)))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HighlightBody {
    #[serde(flatten)]
    request: HighlightRequest,
    #[serde(default)]
    session_id: Option<String>,
}

fn session_for(state: &AppState, dataset_id: &str, session_id: &str) -> ApiResult<EditSession> {
    let entry = state
        .store
        .session(session_id)
        .ok_or_else(|| ApiError::not_found("edit session", session_id))?;
    let entry = entry.lock();
    if entry.dataset_id != dataset_id {
        return Err(ApiError::not_found("edit session", session_id));
    }
    Ok(entry.session.clone())
}

pub async fn highlight(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<Json<Emphasis>> {
    let ds = lookup(&state, &id)?;
    let req: HighlightBody = parse_json(&body(bytes)?)?;
    let session = req.session_id.map(|s| session_for(&state, &id, &s)).transpose()?;
    Ok(Json(edit_mode_emphasis(session.as_ref(), &ds, &req.request)?))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct HitTestBody {
    #[serde(flatten)]
    view: HitView,
    point: [f64; 2],
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default)]
    session_id: Option<String>,
}

// Flattened structs cannot deny unknown fields, so the view is repeated
// here without that attribute.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", default)]
struct HitView {
    expansion: Vec<BranchPath>,
    canvas: Canvas,
    options: LayoutOptions,
}

fn default_tolerance() -> f64 {
    4.0
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct HitTestResponse {
    target: HitTarget,
    #[serde(flatten)]
    emphasis: Emphasis,
}

pub async fn hittest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let ds = lookup(&state, &id)?;
    let req: HitTestBody = parse_json(&body(bytes)?)?;
    let expansion = ExpansionState::from_paths(ds.schema(), &req.view.expansion)?;
    let geometry = compute_layout(&ds, &expansion, req.view.canvas, req.view.options)?;
    let [x, y] = req.point;
    let target = hit_test(&geometry, Point::new(x, y), req.tolerance);
    let session = req.session_id.map(|s| session_for(&state, &id, &s)).transpose()?;
    let emphasis = edit_mode_emphasis(session.as_ref(), &ds, &HighlightRequest::Target(target.clone()))?;
    Ok(Json(HitTestResponse { target, emphasis }).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(
    tag = "action",
    rename_all = "camelCase",
    rename_all_fields = "camelCase",
    deny_unknown_fields
)]
enum EditAction {
    Begin {
        #[serde(default)]
        duplicate_of: Option<String>,
        #[serde(default)]
        view: Option<View>,
    },
    Select {
        session_id: String,
        path: AxisPath,
        value: Value,
        #[serde(default)]
        view: Option<View>,
    },
    Clear {
        session_id: String,
        path: AxisPath,
        #[serde(default)]
        view: Option<View>,
    },
    Commit {
        session_id: String,
    },
    Cancel {
        session_id: String,
    },
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionState {
    pub session_id: String,
    pub dataset_id: String,
    pub active: bool,
    pub origin: EditOrigin,
    pub selections: BTreeMap<AxisPath, Value>,
    pub missing: Vec<AxisPath>,
    pub tooltips: Vec<Tooltip>,
    /// Flat `[x0, y0, x1, y1, ...]`, present when the request carried a view.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub working_line: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CommitResult {
    pub session_id: String,
    pub dataset_id: String,
    pub observation_id: String,
    pub active: bool,
}

fn session_state(
    session_id: String,
    dataset_id: &str,
    ds: &Dataset,
    session: &EditSession,
    view: Option<&View>,
) -> ApiResult<SessionState> {
    let schema = ds.schema();
    let working_line = match view {
        Some(v) => {
            let pts = trace_values(schema, &v.expansion(ds)?, v.canvas, v.options, session.selections())?;
            Some(pts.iter().flat_map(|p| [p.x, p.y]).collect())
        }
        None => None,
    };
    Ok(SessionState {
        session_id,
        dataset_id: dataset_id.to_owned(),
        active: session.is_active(),
        origin: session.origin().clone(),
        selections: session.selections().clone(),
        missing: session.missing_paths(schema),
        tooltips: session.tooltips(schema),
        working_line,
    })
}

pub async fn edit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let ds = lookup(&state, &id)?;
    let action: EditAction = parse_json(&body(bytes)?)?;
    let sid = match &action {
        EditAction::Begin { duplicate_of, view } => {
            let origin = duplicate_of
                .clone()
                .map_or(EditOrigin::Scratch, EditOrigin::DuplicateOf);
            let session = EditSession::begin(None, &ds, origin)?;
            let sid = state.store.open_session(&id, session.clone());
            let out = session_state(sid, &id, &ds, &session, view.as_ref())?;
            return Ok((StatusCode::CREATED, Json(out)).into_response());
        }
        EditAction::Select { session_id, .. }
        | EditAction::Clear { session_id, .. }
        | EditAction::Commit { session_id }
        | EditAction::Cancel { session_id } => session_id.clone(),
    };
    let entry = state
        .store
        .session(&sid)
        .ok_or_else(|| ApiError::not_found("edit session", &sid))?;
    // Held for the whole action: one writer per session.
    let mut entry = entry.lock();
    if entry.dataset_id != id {
        return Err(ApiError::not_found("edit session", &sid));
    }
    let schema = ds.schema();
    let (next, view) = match action {
        EditAction::Select { path, value, view, .. } => (entry.session.select(schema, &path, value)?, view),
        EditAction::Clear { path, view, .. } => (entry.session.clear(schema, &path)?, view),
        EditAction::Cancel { .. } => {
            if !entry.session.is_active() {
                return Err(ApiError::conflict("no active edit session"));
            }
            (entry.session.cancel(), None)
        }
        EditAction::Commit { .. } => {
            let session = entry.session.clone();
            let committed = state
                .store
                .update(&id, |current| {
                    session
                        .commit(current)
                        .map(|c| (c.dataset, (c.observation_id, c.session)))
                })
                .ok_or_else(|| ApiError::not_found("dataset", &id))??;
            let (observation_id, closed) = committed;
            entry.session = closed;
            tracing::info!(dataset = %id, observation = %observation_id, "edit committed");
            return Ok(Json(CommitResult {
                session_id: sid,
                dataset_id: id,
                observation_id,
                active: false,
            })
            .into_response());
        }
        EditAction::Begin { .. } => unreachable!("handled above"),
    };
    entry.session = next;
    let out = session_state(sid, &id, &ds, &entry.session, view.as_ref())?;
    Ok(Json(out).into_response())
}

pub async fn export_svg(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let ds = lookup(&state, &id)?;
    let expansion = ExpansionState::parse_spec(ds.schema(), query.get("expansion").map_or("", String::as_str))?;
    let number = |key: &'static str, default: f64| -> ApiResult<f64> {
        query.get(key).map_or(Ok(default), |v| {
            v.parse().map_err(|_| {
                ApiError::bad_request("invalid_request", format!("`{key}` must be a number")).with_path(key)
            })
        })
    };
    let fallback = Canvas::default();
    let canvas = Canvas::new(
        number("width", fallback.width)?,
        number("height", fallback.height)?,
        number("margin", fallback.margin)?,
    );
    let geometry = compute_layout(&ds, &expansion, canvas, LayoutOptions::default())?;
    let svg = to_svg(&geometry, None, None, &Style::default())?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

pub async fn export_observations(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let ds = lookup(&state, &id)?;
    Ok(json_text(to_cpc_json(&ds)))
}
