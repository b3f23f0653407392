use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use cardex_core::imaging::io::decode;
use cardex_core::{ExtractionResult, ImageBuffer};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::history::{
    format_time, HistoryEntry, HistoryStore, HistorySummary, SideResults, Status,
};
use crate::pipeline::Pipeline;
use crate::ApiError;

/// The published schema document, also served at `/api/v1/openapi.json`.
pub const OPENAPI: &str = include_str!("../../../docs/openapi.json");

const MAX_BODY_BYTES: usize = 32 * 1024 * 1024;
const DEFAULT_LIMIT: usize = 50;

pub struct AppState {
    pub pipeline: Pipeline,
    pub history: HistoryStore,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(
            "/api/v1/health",
            get(|| async { Json(serde_json::json!({"status": "ok"})) }),
        )
        .route("/api/v1/openapi.json", get(openapi))
        .route("/api/v1/extract", post(extract))
        .route("/api/v1/history", get(list_history))
        .route("/api/v1/history/{id}", get(get_entry).patch(patch_entry))
        .route("/api/v1/history/{id}/save", post(save_entry))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtractResponse {
    pub id: String,
    pub created_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub front: ExtractionResult,
    pub back: ExtractionResult,
    /// Both sides' warnings, prefixed with the side name.
    pub warnings: Vec<String>,
}

impl From<&HistoryEntry> for ExtractResponse {
    fn from(e: &HistoryEntry) -> Self {
        let SideResults { front, back } = e.results.clone();
        let warnings = [&front, &back]
            .iter()
            .flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.side)))
            .collect();
        ExtractResponse {
            id: e.id.clone(),
            created_at: format_time(&e.created_at),
            request_id: e.request_id.clone(),
            front,
            back,
            warnings,
        }
    }
}

/// A history entry plus the merged current value of every field.
#[derive(Debug, Serialize, Deserialize)]
pub struct EntryView {
    #[serde(flatten)]
    pub entry: HistoryEntry,
    pub values: BTreeMap<String, String>,
}

impl From<HistoryEntry> for EntryView {
    fn from(entry: HistoryEntry) -> Self {
        let values = entry
            .values()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        EntryView { entry, values }
    }
}

async fn openapi() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI)
}

fn json_object(body: &[u8]) -> Result<serde_json::Map<String, Value>, ApiError> {
    match serde_json::from_slice(body) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(ApiError::bad_request(
            "bad_json",
            "body must be a JSON object",
        )),
        Err(e) => Err(ApiError::bad_request(
            "bad_json",
            format!("invalid JSON: {e}"),
        )),
    }
}

fn image_field(body: &serde_json::Map<String, Value>, name: &str) -> Result<ImageBuffer, ApiError> {
    let text = match body.get(name) {
        None | Some(Value::Null) => {
            return Err(ApiError::bad_request(
                "missing_field",
                format!("{name} is required"),
            ))
        }
        Some(Value::String(s)) => s.as_str(),
        Some(_) => {
            return Err(ApiError::bad_request(
                "bad_request",
                format!("{name} must be a string"),
            ))
        }
    };
    // Accept data URLs as produced by browser file readers.
    let payload = match text.strip_prefix("data:") {
        Some(rest) => rest.split_once(',').map_or(rest, |(_, b64)| b64),
        None => text,
    };
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(payload.trim())
        .map_err(|e| ApiError::bad_request("bad_base64", format!("{name}: {e}")))?;
    decode(&bytes).map_err(|e| ApiError::bad_request("bad_image", format!("{name}: {e}")))
}

async fn extract(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<ExtractResponse>, ApiError> {
    let body = json_object(&body)?;
    let front = image_field(&body, "front_image")?;
    let back = image_field(&body, "back_image")?;
    let request_id = match body.get("request_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(ApiError::bad_request(
                "bad_request",
                "request_id must be a string",
            ))
        }
    };
    let entry = tokio::task::spawn_blocking(move || -> Result<HistoryEntry, ApiError> {
        let (f, b) = state.pipeline.extract(&front, &back);
        let results = SideResults {
            front: f?,
            back: b?,
        };
        Ok(state
            .history
            .create(request_id, state.pipeline.field_names(), results)?)
    })
    .await
    .map_err(|e| ApiError::internal(format!("extraction task failed: {e}")))??;
    Ok(Json(ExtractResponse::from(&entry)))
}

#[derive(Debug, Deserialize)]
struct ListQuery {
    limit: Option<usize>,
}

async fn list_history(
    State(state): State<Arc<AppState>>,
    query: Result<Query<ListQuery>, QueryRejection>,
) -> Result<Json<Vec<HistorySummary>>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request("bad_request", e.body_text()))?;
    Ok(Json(state.history.list(q.limit.unwrap_or(DEFAULT_LIMIT))))
}

async fn get_entry(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<EntryView>, ApiError> {
    state
        .history
        .get(&id)
        .map(|e| Json(e.into()))
        .ok_or_else(|| ApiError::not_found(&id))
}

async fn patch_entry(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EntryView>, ApiError> {
    let body = json_object(&body)?;
    let mut edits = BTreeMap::new();
    for (k, v) in body {
        match v {
            Value::String(s) => edits.insert(k, s),
            _ => {
                return Err(ApiError::bad_request(
                    "bad_request",
                    format!("value of {k:?} must be a string"),
                ))
            }
        };
    }
    let updated = tokio::task::spawn_blocking(move || {
        state
            .history
            .update(&id, |entry| {
                if let Some(unknown) = edits.keys().find(|k| !entry.knows_field(k)) {
                    return Err(ApiError::bad_request(
                        "unknown_field",
                        format!("no field named {unknown:?}"),
                    ));
                }
                entry.edited_fields.extend(edits);
                entry.status = Status::Edited;
                Ok(())
            })
            .and_then(|e| e.ok_or_else(|| ApiError::not_found(&id)))
    })
    .await
    .map_err(|e| ApiError::internal(format!("history task failed: {e}")))??;
    Ok(Json(updated.into()))
}

async fn save_entry(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let saved = tokio::task::spawn_blocking(move || {
        state
            .history
            .update::<ApiError>(&id, |entry| {
                entry.status = Status::Saved;
                Ok(())
            })
            .and_then(|e| e.ok_or_else(|| ApiError::not_found(&id)))
    })
    .await
    .map_err(|e| ApiError::internal(format!("history task failed: {e}")))??;
    let disposition = format!("attachment; filename=\"{}.txt\"", saved.id);
    Ok((
        [
            (
                header::CONTENT_TYPE,
                "text/plain; charset=utf-8".to_string(),
            ),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        saved.to_text(),
    ))
}
