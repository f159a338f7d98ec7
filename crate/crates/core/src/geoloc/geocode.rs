use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.is_finite() && lon.is_finite()) || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::invalid(format!("coordinates out of range: ({lat}, {lon})")));
        }
        Ok(GeoPoint { lat, lon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn new(min_lat: f64, max_lat: f64, min_lon: f64, max_lon: f64) -> Result<Self> {
        let finite = [min_lat, max_lat, min_lon, max_lon].iter().all(|v| v.is_finite());
        if !finite || min_lat >= max_lat || min_lon >= max_lon {
            return Err(Error::invalid(format!(
                "invalid bounding box ({min_lat}, {max_lat}, {min_lon}, {max_lon})"
            )));
        }
        Ok(BoundingBox {
            min_lat,
            max_lat,
            min_lon,
            max_lon,
        })
    }

    /// Inclusive on all four edges.
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// The earthquake zone of southern Turkey and northern Syria.
impl Default for BoundingBox {
    fn default() -> Self {
        BoundingBox {
            min_lat: 35.5,
            max_lat: 39.5,
            min_lon: 35.0,
            max_lon: 41.5,
        }
    }
}

/// `min_lat,max_lat,min_lon,max_lon`
impl FromStr for BoundingBox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::invalid(format!("bbox {s:?}: {e}")))?;
        match v.as_slice() {
            [a, b, c, d] => BoundingBox::new(*a, *b, *c, *d),
            _ => Err(Error::invalid(format!("bbox {s:?} needs four comma-separated numbers"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum GeocodeOutcome {
    Located(GeoPoint),
    NotFound,
    OutOfScope(GeoPoint),
    ProviderError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderError(pub String);

impl fmt::Display for ProviderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ProviderError {}

/// Something that turns an address into candidate points, best first.
pub trait Provider: Send + Sync {
    fn lookup(&self, address: &str) -> std::result::Result<Vec<GeoPoint>, ProviderError>;
}

impl<F> Provider for F
where
    F: Fn(&str) -> std::result::Result<Vec<GeoPoint>, ProviderError> + Send + Sync,
{
    fn lookup(&self, address: &str) -> std::result::Result<Vec<GeoPoint>, ProviderError> {
        self(address)
    }
}

/// Cached provider answer. Provider errors are never cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum CacheEntry {
    Found(GeoPoint),
    NotFound,
}

pub trait GeocodeCache: Send + Sync {
    fn get(&self, address: &str) -> Option<CacheEntry>;
    fn put(&self, address: &str, entry: CacheEntry);
}

#[derive(Debug, Default)]
pub struct MemoryCache {
    map: Mutex<HashMap<String, CacheEntry>>,
}

impl GeocodeCache for MemoryCache {
    fn get(&self, address: &str) -> Option<CacheEntry> {
        self.map.lock().unwrap().get(address).copied()
    }

    fn put(&self, address: &str, entry: CacheEntry) {
        self.map.lock().unwrap().insert(address.to_string(), entry);
    }
}

/// Table-driven provider for tests and offline demos.
///
/// Lookups are case-insensitive. With suffix matching on, an address that
/// ends with a table key (at a word boundary) resolves to it; the longest
/// such key wins.
#[derive(Debug, Default)]
pub struct MockProvider {
    table: HashMap<String, GeoPoint>,
    suffix_match: bool,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(entries: impl IntoIterator<Item = (String, GeoPoint)>) -> Self {
        MockProvider {
            table: entries
                .into_iter()
                .map(|(k, v)| (crate::textfeat::turkish_lower(&k), v))
                .collect(),
            suffix_match: false,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_suffix_match(mut self, on: bool) -> Self {
        self.suffix_match = on;
        self
    }

    /// Parses `{"address": {"lat": .., "lon": ..}, ...}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let table: HashMap<String, GeoPoint> = serde_json::from_str(s)?;
        for p in table.values() {
            GeoPoint::new(p.lat, p.lon)?;
        }
        Ok(Self::new(table))
    }

    /// Number of lookups served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn lookup(&self, address: &str) -> std::result::Result<Vec<GeoPoint>, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = crate::textfeat::turkish_lower(address.trim());
        if let Some(p) = self.table.get(&key) {
            return Ok(vec![*p]);
        }
        if self.suffix_match {
            let hit = self
                .table
                .iter()
                .filter(|(k, _)| {
                    key.ends_with(k.as_str())
                        && key[..key.len() - k.len()]
                            .chars()
                            .last()
                            .is_none_or(|c| !c.is_alphanumeric())
                })
                .max_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| b.0.cmp(a.0)));
            if let Some((_, p)) = hit {
                return Ok(vec![*p]);
            }
        }
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeocoderConfig {
    pub max_in_flight: usize,
    pub rps: f64,
    pub bbox: Option<BoundingBox>,
}

impl Default for GeocoderConfig {
    fn default() -> Self {
        GeocoderConfig {
            max_in_flight: 4,
            rps: 10.0,
            bbox: Some(BoundingBox::default()),
        }
    }
}

impl GeocoderConfig {
    /// Reads `GEOCODER_RPS` on top of the defaults.
    pub fn from_env() -> Result<Self> {
        let mut cfg = GeocoderConfig::default();
        if let Ok(v) = std::env::var("GEOCODER_RPS") {
            cfg.rps = v
                .parse()
                .map_err(|_| Error::invalid(format!("GEOCODER_RPS={v:?} is not a number")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(Error::invalid("max_in_flight must be >= 1"));
        }
        if !(self.rps > 0.0 && self.rps.is_finite()) {
            return Err(Error::invalid("rps must be > 0"));
        }
        Ok(())
    }
}

struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        TokenBucket {
            rate,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.rate).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Cached, rate-limited front end to a [`Provider`].
///
/// Concurrent lookups of the same address are serialized so the provider
/// is queried at most once per address.
pub struct Geocoder {
    provider: Arc<dyn Provider>,
    cache: Arc<dyn GeocodeCache>,
    cfg: GeocoderConfig,
    bucket: TokenBucket,
    in_flight: Semaphore,
    key_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl fmt::Debug for Geocoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Geocoder").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Geocoder {
    pub fn new(provider: Arc<dyn Provider>, cache: Arc<dyn GeocodeCache>, cfg: GeocoderConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Geocoder {
            provider,
            cache,
            bucket: TokenBucket::new(cfg.rps),
            in_flight: Semaphore::new(cfg.max_in_flight),
            cfg,
            key_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &GeocoderConfig {
        &self.cfg
    }

    fn classify(&self, p: GeoPoint) -> GeocodeOutcome {
        match self.cfg.bbox {
            Some(b) if !b.contains(p) => GeocodeOutcome::OutOfScope(p),
            _ => GeocodeOutcome::Located(p),
        }
    }

    fn from_entry(&self, e: CacheEntry) -> GeocodeOutcome {
        match e {
            CacheEntry::Found(p) => self.classify(p),
            CacheEntry::NotFound => GeocodeOutcome::NotFound,
        }
    }

    /// Resolves an address to the first provider candidate. Never fails;
    /// failures come back as [`GeocodeOutcome::ProviderError`].
    pub fn geocode(&self, address: &str) -> GeocodeOutcome {
        if address.trim().is_empty() {
            return GeocodeOutcome::ProviderError("empty address".into());
        }
        if let Some(e) = self.cache.get(address) {
            return self.from_entry(e);
        }

        let key_lock = {
            let mut locks = self.key_locks.lock().unwrap();
            locks.entry(address.to_string()).or_default().clone()
        };
        let outcome = {
            let _writer = key_lock.lock().unwrap();
            // another writer may have filled it while we waited
            if let Some(e) = self.cache.get(address) {
                self.from_entry(e)
            } else {
                let _permit = self.in_flight.acquire();
                self.bucket.acquire();
                match self.provider.lookup(address) {
                    Ok(cands) => {
                        let entry = match cands.first() {
                            Some(p) => CacheEntry::Found(*p),
                            None => CacheEntry::NotFound,
                        };
                        self.cache.put(address, entry);
                        self.from_entry(entry)
                    }
                    Err(e) => GeocodeOutcome::ProviderError(e.0),
                }
            }
        };

        let mut locks = self.key_locks.lock().unwrap();
        if Arc::strong_count(&key_lock) == 2 {
            locks.remove(address);
        }
        outcome
    }
}

pub fn within_bbox(p: GeoPoint, bbox: &BoundingBox) -> bool {
    bbox.contains(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock() -> Arc<MockProvider> {
        Arc::new(MockProvider::new([
            ("Adana".to_string(), GeoPoint::new(37.0, 35.32).unwrap()),
            ("İstanbul".to_string(), GeoPoint::new(41.0, 29.0).unwrap()),
        ]))
    }

    fn geocoder(p: Arc<MockProvider>) -> Geocoder {
        Geocoder::new(
            p,
            Arc::new(MemoryCache::default()),
            GeocoderConfig { rps: 1000.0, ..Default::default() },
        )
        .unwrap()
    }

    #[test]
    fn bbox_examples() {
        let b = BoundingBox::new(35.5, 39.5, 35.0, 41.5).unwrap();
        assert_eq!(b, BoundingBox::default());
        assert!(within_bbox(GeoPoint::new(37.0, 37.0).unwrap(), &b));
        assert!(!within_bbox(GeoPoint::new(41.0, 29.0).unwrap(), &b));
        assert!(within_bbox(GeoPoint::new(35.5, 38.0).unwrap(), &b));
        assert!(within_bbox(GeoPoint::new(39.5, 41.5).unwrap(), &b));
        assert!(BoundingBox::new(1.0, 1.0, 0.0, 2.0).is_err());
        assert_eq!("35.5, 39.5,35,41.5".parse::<BoundingBox>().unwrap(), b);
        assert!("1,2,3".parse::<BoundingBox>().is_err());
    }

    #[test]
    fn point_ranges() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn mock_outcomes() {
        let g = geocoder(mock());
        assert_eq!(g.geocode("Adana"), GeocodeOutcome::Located(GeoPoint { lat: 37.0, lon: 35.32 }));
        assert_eq!(g.geocode("Nowhere"), GeocodeOutcome::NotFound);
        assert_eq!(
            g.geocode("İstanbul"),
            GeocodeOutcome::OutOfScope(GeoPoint { lat: 41.0, lon: 29.0 })
        );
        assert!(matches!(g.geocode("  "), GeocodeOutcome::ProviderError(_)));
    }

    #[test]
    fn cache_is_idempotent() {
        let p = mock();
        let g = geocoder(p.clone());
        let first = g.geocode("Adana");
        assert_eq!(p.calls(), 1);
        assert_eq!(g.geocode("Adana"), first);
        assert_eq!(p.calls(), 1);
        g.geocode("Nowhere");
        g.geocode("Nowhere");
        assert_eq!(p.calls(), 2);
    }

    #[test]
    fn provider_errors_not_cached() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let failing = move |_: &str| -> std::result::Result<Vec<GeoPoint>, ProviderError> {
            c.fetch_add(1, Ordering::SeqCst);
            Err(ProviderError("malformed payload".into()))
        };
        let g = Geocoder::new(Arc::new(failing), Arc::new(MemoryCache::default()), GeocoderConfig::default()).unwrap();
        assert_eq!(g.geocode("x"), GeocodeOutcome::ProviderError("malformed payload".into()));
        g.geocode("x");
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn concurrent_same_key_single_request() {
        let p = mock();
        let g = geocoder(p.clone());
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| assert!(matches!(g.geocode("Adana"), GeocodeOutcome::Located(_))));
            }
        });
        assert_eq!(p.calls(), 1);
        assert!(g.key_locks.lock().unwrap().is_empty());
    }

    #[test]
    fn suffix_matching() {
        let p = MockProvider::new([
            ("Hatay".to_string(), GeoPoint::new(36.2, 36.16).unwrap()),
            ("Kadıköy".to_string(), GeoPoint::new(40.99, 29.03).unwrap()),
        ])
        .with_suffix_match(true);
        assert_eq!(p.lookup("Atatürk Cad. No 12 Hatay").unwrap().len(), 1);
        assert_eq!(p.lookup("Bağdat Cad. Kadıköy").unwrap()[0].lat, 40.99);
        assert!(p.lookup("Antakyahatay").unwrap().is_empty());
        assert!(p.lookup("Cad. No 3").unwrap().is_empty());
    }

    #[test]
    fn rate_limit_paces_requests() {
        let g = Geocoder::new(
            mock(),
            Arc::new(MemoryCache::default()),
            GeocoderConfig { rps: 20.0, max_in_flight: 2, bbox: None },
        )
        .unwrap();
        let start = Instant::now();
        for i in 0..30 {
            g.geocode(&format!("addr {i}"));
        }
        // 20 burst tokens, the remaining 10 at 20/s
        assert!(start.elapsed() >= Duration::from_millis(400), "{:?}", start.elapsed());
    }

    #[test]
    fn outcome_json_shape() {
        let js = serde_json::to_string(&GeocodeOutcome::Located(GeoPoint { lat: 1.0, lon: 2.0 })).unwrap();
        assert_eq!(js, r#"{"kind":"Located","value":{"lat":1.0,"lon":2.0}}"#);
        let js = serde_json::to_string(&GeocodeOutcome::NotFound).unwrap();
        assert_eq!(js, r#"{"kind":"NotFound"}"#);
    }
}
