use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::geocode::{GeoPoint, Provider, ProviderError};
use crate::error::{Error, Result};

/// Where to send requests and how to read the candidate list back.
///
/// Paths are dot-separated object keys into the JSON response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub address_param: String,
    pub key_param: String,
    pub results_path: String,
    pub lat_path: String,
    pub lon_path: String,
    pub timeout_secs: u64,
}

impl HttpProviderConfig {
    pub fn new(url: impl Into<String>) -> Self {
        HttpProviderConfig {
            url: url.into(),
            api_key: None,
            address_param: "address".into(),
            key_param: "key".into(),
            results_path: "results".into(),
            lat_path: "geometry.location.lat".into(),
            lon_path: "geometry.location.lng".into(),
            timeout_secs: 10,
        }
    }

    /// `GEOCODER_URL` (required) and `GEOCODER_KEY`.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var("GEOCODER_URL").ok().filter(|u| !u.is_empty())?;
        let mut cfg = Self::new(url);
        cfg.api_key = std::env::var("GEOCODER_KEY").ok().filter(|k| !k.is_empty());
        Some(cfg)
    }
}

fn walk<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.')
        .filter(|p| !p.is_empty())
        .try_fold(v, |cur, key| cur.get(key))
}

/// Extracts candidate points from a provider response body.
pub fn parse_candidates(body: &str, cfg: &HttpProviderConfig) -> std::result::Result<Vec<GeoPoint>, ProviderError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ProviderError(format!("malformed response: {e}")))?;
    let arr = walk(&v, &cfg.results_path)
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError(format!("response has no array at {:?}", cfg.results_path)))?;
    arr.iter()
        .map(|c| {
            let lat = walk(c, &cfg.lat_path).and_then(Value::as_f64);
            let lon = walk(c, &cfg.lon_path).and_then(Value::as_f64);
            match (lat, lon) {
                (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).map_err(|e| ProviderError(e.to_string())),
                _ => Err(ProviderError("candidate without lat/lon".into())),
            }
        })
        .collect()
}

pub struct HttpProvider {
    cfg: HttpProviderConfig,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    /// Must not be constructed or used from inside an async runtime thread.
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::invalid(format!("http client: {e}")))?;
        Ok(HttpProvider { cfg, client })
    }
}

impl Provider for HttpProvider {
    fn lookup(&self, address: &str) -> std::result::Result<Vec<GeoPoint>, ProviderError> {
        let mut query = vec![(self.cfg.address_param.as_str(), address)];
        if let Some(k) = &self.cfg.api_key {
            query.push((self.cfg.key_param.as_str(), k.as_str()));
        }
        let resp = self
            .client
            .get(&self.cfg.url)
            .query(&query)
            .send()
            .map_err(|e| ProviderError(format!("request failed: {e}")))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| ProviderError(format!("reading body: {e}")))?;
        if !status.is_success() {
            return Err(ProviderError(format!("provider returned {status}")));
        }
        parse_candidates(&body, &self.cfg)
    }
}
