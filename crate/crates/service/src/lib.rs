//! HTTP front end for the extraction pipeline.
//!
//! Clients post both card photos as base64 JSON, receive the extracted
//! fields, and may then edit and export them. Every extraction and edit is
//! kept in an append-only JSON-lines history.

mod api;
mod config;
mod error;
pub mod history;
mod pipeline;

use std::sync::Arc;

pub use api::{router, AppState, EntryView, ExtractResponse, OPENAPI};
pub use config::ServiceConfig;
pub use error::{ApiError, ServiceError};
pub use history::{HistoryEntry, HistoryStore, HistorySummary, Status};
pub use pipeline::Pipeline;

/// Builds the application state described by `cfg`.
pub fn build_state(cfg: &ServiceConfig) -> Result<Arc<AppState>, ServiceError> {
    Ok(Arc::new(AppState {
        pipeline: Pipeline::from_service_config(cfg)?,
        history: HistoryStore::open(&cfg.history_path)?,
    }))
}

/// Serves on an already bound listener until ctrl-c.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
) -> Result<(), ServiceError> {
    log::info!(
        "listening on {} (history {})",
        listener.local_addr()?,
        state.history.path().display()
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
