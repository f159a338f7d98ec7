use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use triage_core::domain::{EntitySpan, EntityTag, HelpLabel, Tweet};
use triage_core::geoloc::{match_city, normalize_address, CityList, GeoPoint, GeocodeOutcome, Geocoder};
use triage_core::models::ModelBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    ClassifiedNegative,
    TagFailed,
    Unlocated,
    Located,
    FilteredOutOfScope,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::ClassifiedNegative,
        Stage::TagFailed,
        Stage::Unlocated,
        Stage::Located,
        Stage::FilteredOutOfScope,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::ClassifiedNegative => "ClassifiedNegative",
            Stage::TagFailed => "TagFailed",
            Stage::Unlocated => "Unlocated",
            Stage::Located => "Located",
            Stage::FilteredOutOfScope => "FilteredOutOfScope",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Geocoding result of a tweet; `NotApplicable` when no lookup was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum Outcome {
    NotApplicable,
    Located(GeoPoint),
    NotFound,
    OutOfScope(GeoPoint),
    ProviderError(String),
}

impl From<GeocodeOutcome> for Outcome {
    fn from(o: GeocodeOutcome) -> Self {
        match o {
            GeocodeOutcome::Located(p) => Outcome::Located(p),
            GeocodeOutcome::NotFound => Outcome::NotFound,
            GeocodeOutcome::OutOfScope(p) => Outcome::OutOfScope(p),
            GeocodeOutcome::ProviderError(m) => Outcome::ProviderError(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageResult {
    pub tweet_id: String,
    pub label: HelpLabel,
    pub margin: f64,
    pub spans: Vec<EntitySpan>,
    pub matched_city: Option<String>,
    pub normalized_address: Option<String>,
    pub outcome: Outcome,
    pub stage: Stage,
}

impl TriageResult {
    pub fn point(&self) -> Option<GeoPoint> {
        match self.outcome {
            Outcome::Located(p) => Some(p),
            _ => None,
        }
    }

    pub fn surfaces(&self, tag: EntityTag) -> impl Iterator<Item = &str> {
        self.spans.iter().filter(move |s| s.tag == tag).map(|s| s.surface.as_str())
    }
}

/// Funnel counters. Conservation: `ingested = classified_negative + tagged +
/// tag_failed` and `geocode_attempted = tagged = located + unlocated + filtered`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub ingested: u64,
    pub classified_negative: u64,
    pub tagged: u64,
    pub tag_failed: u64,
    pub geocode_attempted: u64,
    pub located: u64,
    pub unlocated: u64,
    pub filtered: u64,
}

impl PipelineStats {
    pub fn count(&mut self, stage: Stage, n: u64) {
        self.ingested += n;
        match stage {
            Stage::ClassifiedNegative => self.classified_negative += n,
            Stage::TagFailed => self.tag_failed += n,
            Stage::Located | Stage::Unlocated | Stage::FilteredOutOfScope => {
                self.tagged += n;
                self.geocode_attempted += n;
                match stage {
                    Stage::Located => self.located += n,
                    Stage::Unlocated => self.unlocated += n,
                    _ => self.filtered += n,
                }
            }
        }
    }

    pub fn is_conserved(&self) -> bool {
        self.ingested == self.classified_negative + self.tagged + self.tag_failed
            && self.geocode_attempted == self.tagged
            && self.geocode_attempted == self.located + self.unlocated + self.filtered
    }
}

impl AddAssign for PipelineStats {
    fn add_assign(&mut self, o: Self) {
        self.ingested += o.ingested;
        self.classified_negative += o.classified_negative;
        self.tagged += o.tagged;
        self.tag_failed += o.tag_failed;
        self.geocode_attempted += o.geocode_attempted;
        self.located += o.located;
        self.unlocated += o.unlocated;
        self.filtered += o.filtered;
    }
}

impl Add for PipelineStats {
    type Output = Self;

    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

/// The immutable pieces shared by every request.
pub struct Pipeline {
    pub models: ModelBundle<f64>,
    pub cities: CityList,
    pub geocoder: Geocoder,
}

impl Pipeline {
    /// classify, tag, post-process, geocode, filter.
    pub fn run(&self, tweet: &Tweet) -> triage_core::Result<TriageResult> {
        let (label, margin) = self.models.classify(&tweet.text)?;
        let mut r = TriageResult {
            tweet_id: tweet.id.clone(),
            label,
            margin,
            spans: Vec::new(),
            matched_city: None,
            normalized_address: None,
            outcome: Outcome::NotApplicable,
            stage: Stage::ClassifiedNegative,
        };
        if !label.is_positive() {
            return Ok(r);
        }

        r.spans = self.models.tag(&tweet.text);
        let usable = r
            .spans
            .iter()
            .any(|s| matches!(s.tag, EntityTag::City | EntityTag::Addr));
        if !usable {
            r.stage = Stage::TagFailed;
            return Ok(r);
        }

        let city = r
            .surfaces(EntityTag::City)
            .find_map(|c| match_city(c, &self.cities))
            .map(str::to_string);
        r.matched_city = city;
        r.outcome = match normalize_address(&r.spans, r.matched_city.as_deref()) {
            Ok(addr) => {
                let o = self.geocoder.geocode(&addr).into();
                r.normalized_address = Some(addr);
                o
            }
            Err(e) => Outcome::ProviderError(e.to_string()),
        };
        r.stage = match r.outcome {
            Outcome::Located(_) => Stage::Located,
            Outcome::OutOfScope(_) => Stage::FilteredOutOfScope,
            _ => Stage::Unlocated,
        };
        Ok(r)
    }
}
