//! HTTP/JSON service over the conditional parallel coordinates engine.
//!
//! Layout and highlight requests are stateless: the client sends its
//! expansion state with every call. Only datasets and edit sessions live on
//! the server.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub mod api;
pub mod error;
pub mod store;

pub use error::{ApiError, ErrorBody};
pub use store::SessionStore;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    /// Request bodies above this many bytes are refused with 413.
    pub max_body_bytes: usize,
    pub max_observations: usize,
    /// Maximum branch nesting accepted on upload.
    pub max_depth: usize,
    pub static_dir: Option<PathBuf>,
    /// CPC-JSON files loaded at startup.
    pub data_dir: Option<PathBuf>,
    /// Where datasets are written on shutdown.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            max_body_bytes: 16 * 1024 * 1024,
            max_observations: 100_000,
            max_depth: cpc_core::DEFAULT_MAX_DEPTH,
            static_dir: None,
            data_dir: None,
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<SessionStore>,
    pub config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        Self {
            store: Arc::new(SessionStore::new()),
            config: Arc::new(config),
        }
    }
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/datasets", post(api::create_dataset).get(api::list_datasets))
        .route("/api/datasets/{id}/schema", get(api::schema))
        .route("/api/datasets/{id}/layout", post(api::layout))
        .route("/api/datasets/{id}/highlight", post(api::highlight))
        .route("/api/datasets/{id}/hittest", post(api::hittest))
        .route("/api/datasets/{id}/edit", post(api::edit))
        .route("/api/datasets/{id}/export.svg", get(api::export_svg))
        .route("/api/datasets/{id}/observations/export", get(api::export_observations))
        .layer(DefaultBodyLimit::max(state.config.max_body_bytes));
    let app = match &state.config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

#[derive(Debug)]
pub enum ServeError {
    Load(store::LoadError),
    Io(std::io::Error),
}

impl std::fmt::Display for ServeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Load(e) => write!(f, "loading datasets: {e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ServeError {}

impl From<std::io::Error> for ServeError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Binds, serves until Ctrl-C, then writes a snapshot if configured.
pub async fn serve(config: ServerConfig) -> Result<(), ServeError> {
    let state = AppState::new(config.clone());
    if let Some(dir) = &config.data_dir {
        for (path, id) in state.store.load_dir(dir).map_err(ServeError::Load)? {
            tracing::info!(dataset = %id, file = %path.display(), "preloaded");
        }
    }
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    let addr: SocketAddr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = &config.snapshot_dir {
        let n = state.store.snapshot(dir)?;
        tracing::info!(datasets = n, dir = %dir.display(), "snapshot written");
    }
    Ok(())
}
