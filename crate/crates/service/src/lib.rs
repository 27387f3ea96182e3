//! HTTP API and build job queue for the segmentation workbench.
//!
//! All routes live under `/api/v1`. Builds are accepted as jobs and executed one at
//! a time by a background worker; `POST` requests honour an `Idempotency-Key`
//! header.

pub mod api;
pub mod error;
pub mod idempotency;
pub mod jobs;
pub mod store;

use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::response::IntoResponse;
use axum::{middleware, Router};

pub use error::{ApiError, ApiResult, ErrorBody};
pub use jobs::{JobBoard, JobId, JobState, JobStatus};
pub use store::Store;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub jobs: Arc<JobBoard>,
    pub idempotency: Arc<idempotency::IdempotencyCache>,
}

impl AppState {
    /// Opens the workspace and starts the build worker; needs a running tokio runtime.
    pub fn open(workspace: impl Into<PathBuf>) -> seglab_core::Result<Self> {
        let store = Arc::new(Store::open(workspace)?);
        Ok(Self {
            jobs: JobBoard::start(store.clone()),
            store,
            idempotency: Arc::default(),
        })
    }
}

pub fn router(state: AppState) -> Router {
    let api = api::routes()
        .layer(middleware::from_fn_with_state(state.clone(), idempotency::middleware))
        .layer(DefaultBodyLimit::max(api::BODY_LIMIT))
        .with_state(state);
    Router::new()
        .nest("/api/v1", api)
        .fallback(|| async { ApiError::not_found("no such route").into_response() })
}
