//! REST service for preference-guided hyperparameter optimization sessions.
//!
//! A session samples a pool of fronts, collects pairwise choices between
//! them, learns a utility from those choices and then optimizes the
//! benchmark's configuration space against that utility in the background.

pub mod api;
pub mod error;
pub mod session;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;

pub use api::{router, AppState};
pub use error::ApiError;
pub use store::Store;

/// Environment variable naming the directory that holds session files.
pub const DATA_DIR_ENV: &str = "PREFPARETO_DATA_DIR";

/// Binds `addr` and serves until the process is stopped. Interrupted
/// optimizations found in `data_dir` are restarted first.
pub async fn serve(addr: SocketAddr, data_dir: Option<PathBuf>) -> std::io::Result<()> {
    let store = match data_dir.or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)) {
        Some(dir) => Store::open(dir)?,
        None => Store::in_memory(),
    };
    let state = AppState::new(store);
    state.resume_jobs();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
