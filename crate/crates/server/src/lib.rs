//! REST service around the triage pipeline.
//!
//! Tweets posted to `/api/v1/tweets` are classified, tagged, geocoded and
//! stored; the remaining endpoints read the store.

pub mod api;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod store;

use std::future::Future;
use std::path::Path;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;
use tower_http::services::ServeDir;
use triage_core::geoloc::{CityList, Geocoder, HttpProvider, MockProvider, Provider};
use triage_core::models::ModelBundle;

pub use api::{router, AppState, IngestSummary};
pub use config::{ProviderChoice, ServerConfig};
pub use error::ServerError;
pub use pipeline::{Outcome, Pipeline, PipelineStats, Stage, TriageResult};
pub use store::Store;

fn read(path: &Path) -> Result<String, ServerError> {
    std::fs::read_to_string(path).map_err(|source| ServerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_provider(choice: &ProviderChoice) -> Result<Arc<dyn Provider>, ServerError> {
    Ok(match choice {
        ProviderChoice::Mock { table } => Arc::new(
            MockProvider::from_json(&read(table)?)
                .map_err(|e| ServerError::Config(format!("{}: {e}", table.display())))?
                .with_suffix_match(true),
        ),
        ProviderChoice::Http(cfg) => Arc::new(HttpProvider::new(cfg.clone())?),
    })
}

/// Loads models, city list, provider and store. Any missing artifact fails here.
pub fn build_state(cfg: &ServerConfig) -> Result<AppState, ServerError> {
    cfg.validate()?;
    let models = ModelBundle::load(&cfg.model_dir)?;
    let cities = CityList::from_file(&cfg.cities_path)?;
    let store = Arc::new(Store::open(&cfg.store_path)?);
    let geocoder = Geocoder::new(load_provider(&cfg.provider)?, store.clone(), cfg.geocoder)?;
    Ok(AppState {
        pipeline: Arc::new(Pipeline {
            models,
            cities,
            geocoder,
        }),
        store,
        max_batch: cfg.max_batch,
    })
}

/// API routes plus the static UI bundle, when the directory exists.
pub fn app(state: AppState, ui_dir: Option<&Path>) -> Router {
    let api = router(state);
    match ui_dir {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api,
    }
}

pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServerError> {
    let addr = listener.local_addr().ok();
    log::info!("listening on {addr:?}");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| ServerError::Io {
            path: "listener".into(),
            source,
        })
}
