use std::path::PathBuf;

use serde::Serialize;
use triage_core::geoloc::{BoundingBox, GeocoderConfig, HttpProviderConfig};

use crate::error::ServerError;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_BATCH: usize = 5000;

/// Where geocoding answers come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ProviderChoice {
    /// Fixed table `{"address": {"lat", "lon"}}` with suffix matching.
    Mock { table: PathBuf },
    Http(HttpProviderConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerConfig {
    pub port: u16,
    pub store_path: PathBuf,
    pub model_dir: PathBuf,
    pub cities_path: PathBuf,
    pub ui_dir: Option<PathBuf>,
    pub max_batch: usize,
    pub provider: ProviderChoice,
    pub geocoder: GeocoderConfig,
}

impl ServerConfig {
    /// Defaults rooted at `data_dir`, then `SERVER_PORT`, `STORE_PATH`,
    /// `BBOX`, `GEOCODER_RPS` and `GEOCODER_URL`/`GEOCODER_KEY` from the
    /// environment. Without `GEOCODER_URL` the mock table is used.
    pub fn from_env(data_dir: impl Into<PathBuf>) -> Result<Self, ServerError> {
        let root = data_dir.into();
        let mut cfg = ServerConfig {
            port: DEFAULT_PORT,
            store_path: root.join("triage.db"),
            model_dir: root.join("models"),
            cities_path: root.join("cities.txt"),
            ui_dir: Some(root.join("ui")),
            max_batch: DEFAULT_MAX_BATCH,
            provider: ProviderChoice::Mock {
                table: root.join("geocoder_mock.json"),
            },
            geocoder: GeocoderConfig::from_env()?,
        };
        if let Ok(v) = std::env::var("SERVER_PORT") {
            cfg.port = v
                .parse()
                .map_err(|_| ServerError::Config(format!("SERVER_PORT={v:?} is not a port")))?;
        }
        if let Ok(v) = std::env::var("STORE_PATH") {
            cfg.store_path = v.into();
        }
        if let Ok(v) = std::env::var("BBOX") {
            cfg.geocoder.bbox = Some(v.parse::<BoundingBox>()?);
        }
        if let Some(http) = HttpProviderConfig::from_env() {
            cfg.provider = ProviderChoice::Http(http);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ServerError> {
        if self.max_batch == 0 {
            return Err(ServerError::Config("max_batch must be >= 1".into()));
        }
        self.geocoder.validate()?;
        Ok(())
    }
}
