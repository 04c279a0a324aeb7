//! HTTP facade over the cinemagraph engine for the interactive authoring UI.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /sessions` | multipart `image`, `depth` | 201 `{id, width, height}` |
//! | `POST /sessions/{id}/motion` | hints document | `{mean, max, iterations, converged, revision}` |
//! | `POST /sessions/{id}/preview` | `{t, N, camera?, overrides?}` | `image/png` + `x-content-hash` |
//! | `POST /sessions/{id}/render` | `{frames?, trajectory?, amplitude?, overrides?}` | 202 `{job}` |
//! | `GET /jobs/{job}` | | `{done, total, frames, error}` |
//! | `GET /jobs/{job}/frames/{k}` | | `image/png` |
//! | `GET /healthz` | | 200 |
//!
//! Errors are JSON `{code, message}`. Sessions live in memory and expire
//! after a period without requests.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;

pub mod api;
pub mod error;
pub mod state;

pub use api::{CameraSpec, PreviewRequest, RenderJobRequest, RenderOverrides, CONTENT_HASH_HEADER};
pub use error::ApiError;
pub use state::{AppState, ServiceConfig};

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_upload;
    Router::new()
        .route("/healthz", get(api::healthz))
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}/motion", post(api::set_motion))
        .route("/sessions/{id}/preview", post(api::preview))
        .route("/sessions/{id}/render", post(api::start_render))
        .route("/jobs/{job}", get(api::job_status))
        .route("/jobs/{job}/frames/{k}", get(api::job_frame))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves until the process is stopped, sweeping expired sessions once a
/// minute.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(config));
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(std::time::Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.purge_expired();
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

/// [`serve`] on a fresh multi-threaded runtime, for synchronous callers.
pub fn serve_blocking(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(serve(addr, config))
}
