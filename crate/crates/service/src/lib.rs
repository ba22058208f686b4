//! HTTP annotation service: mention queues, ranked suggestions, decision
//! recording and statistics.

pub mod api;
pub mod config;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use tower_http::services::ServeDir;

pub use config::{ConfigError, ServiceConfig};
pub use state::{CommitError, Live, Service, ServiceError, StoreDigest};

pub fn router(service: Arc<Service>) -> Router {
    let static_dir = service.config.static_dir.clone();
    let api = Router::new()
        .route("/api/session/next", get(api::session_next))
        .route("/api/decision", post(api::post_decision))
        .route("/api/frames/search", get(api::frames_search))
        .route("/api/frames/{id}", get(api::frames_get))
        .route("/api/stats", get(api::stats))
        .route("/api/mention/{id}", get(api::get_mention))
        .route("/api/annotations/export", get(api::export))
        .route("/api/store/digest", get(api::store_digest))
        .route("/healthz", get(api::healthz))
        .with_state(service);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}

/// Binds the configured address and serves until interrupted.
pub async fn serve(service: Service) -> std::io::Result<()> {
    let addr: SocketAddr = format!("{}:{}", service.config.bind, service.config.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    serve_on(listener, Arc::new(service), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}
