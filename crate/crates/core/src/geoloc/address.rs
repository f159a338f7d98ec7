use std::collections::HashSet;
use std::fs;
use std::path::Path;

use super::distance::damerau_levenshtein;
use crate::domain::{EntitySpan, EntityTag};
use crate::error::{Error, Result};
use crate::textfeat::{turkish_lower, turkish_title};

/// Canonical city names; list order breaks matching ties.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CityList {
    cities: Vec<String>,
    folded: Vec<String>,
}

impl CityList {
    pub fn new<S: AsRef<str>>(cities: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut folded = Vec::new();
        for c in cities {
            let c = c.as_ref().trim();
            if c.is_empty() {
                continue;
            }
            let f = turkish_lower(c);
            if !seen.insert(f.clone()) {
                return Err(Error::invalid(format!("duplicate city {c:?}")));
            }
            out.push(c.to_string());
            folded.push(f);
        }
        if out.is_empty() {
            return Err(Error::invalid("city list is empty"));
        }
        Ok(CityList { cities: out, folded })
    }

    /// One city per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::new(text.lines().filter(|l| !l.trim_start().starts_with('#')))
    }

    pub fn cities(&self) -> &[String] {
        &self.cities
    }
}

/// Closest city and its distance, if within `max(1, ceil(len/4))` edits.
pub fn match_city_with_distance<'a>(raw: &str, cities: &'a CityList) -> Option<(&'a str, usize)> {
    let raw = turkish_lower(raw.trim());
    let len = raw.chars().count();
    if len == 0 {
        return None;
    }
    let threshold = 1.max(len.div_ceil(4));
    let mut best: Option<(usize, usize)> = None;
    for (i, c) in cities.folded.iter().enumerate() {
        let d = damerau_levenshtein(&raw, c);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.filter(|&(_, d)| d <= threshold)
        .map(|(i, d)| (cities.cities[i].as_str(), d))
}

pub fn match_city<'a>(raw: &str, cities: &'a CityList) -> Option<&'a str> {
    match_city_with_distance(raw, cities).map(|m| m.0)
}

fn allowed(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '.' | ',' | '-')
}

/// ADDR surfaces in text order followed by the city, restricted to
/// alphanumerics, `.`, `,` and `-`, whitespace-collapsed and title-cased.
pub fn normalize_address(addr_spans: &[EntitySpan], city: Option<&str>) -> Result<String> {
    let mut addrs: Vec<&EntitySpan> = addr_spans.iter().filter(|s| s.tag == EntityTag::Addr).collect();
    addrs.sort_by_key(|s| s.start);
    let mut parts: Vec<&str> = addrs.iter().map(|s| s.surface.as_str()).collect();
    if let Some(c) = city {
        parts.push(c);
    }
    let joined = parts.join(" ");
    let cleaned: String = joined.chars().map(|c| if allowed(c) { c } else { ' ' }).collect();
    let out = cleaned
        .split_whitespace()
        .map(turkish_title)
        .collect::<Vec<_>>()
        .join(" ");
    if out.is_empty() {
        return Err(Error::invalid("no address or city to normalize"));
    }
    Ok(out)
}
