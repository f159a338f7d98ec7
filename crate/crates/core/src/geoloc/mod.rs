//! Address post-processing and geocoding.

mod address;
mod distance;
mod geocode;
mod http;

pub use address::{match_city, match_city_with_distance, normalize_address, CityList};
pub use distance::damerau_levenshtein;
pub use geocode::{
    BoundingBox, CacheEntry, GeoPoint, GeocodeCache, GeocodeOutcome, Geocoder, GeocoderConfig,
    MemoryCache, MockProvider, Provider, ProviderError, within_bbox,
};
pub use http::{parse_candidates, HttpProvider, HttpProviderConfig};
