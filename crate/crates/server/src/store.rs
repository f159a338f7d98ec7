//! Embedded single-file store: tweets, results, annotations and the geocode cache.

use std::collections::HashSet;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, SecondsFormat, Utc};
use rusqlite::{params, Connection, OptionalExtension};
use serde::Serialize;
use triage_core::domain::{AnnotationRecord, EntityTag, Tweet};
use triage_core::geoloc::{CacheEntry, GeoPoint, GeocodeCache};
use triage_core::textfeat::turkish_lower;

use crate::error::ServerError;
use crate::pipeline::{PipelineStats, Stage, TriageResult};

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS tweets (
    id TEXT PRIMARY KEY,
    text TEXT NOT NULL,
    created_at TEXT NOT NULL,
    created_ms INTEGER NOT NULL,
    author TEXT
);
CREATE TABLE IF NOT EXISTS results (
    tweet_id TEXT PRIMARY KEY REFERENCES tweets(id),
    stage TEXT NOT NULL,
    body TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS results_stage ON results(stage);
CREATE INDEX IF NOT EXISTS tweets_order ON tweets(created_ms DESC, id);
CREATE TABLE IF NOT EXISTS annotations (
    tweet_id TEXT NOT NULL REFERENCES tweets(id),
    annotator TEXT NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (tweet_id, annotator)
);
CREATE TABLE IF NOT EXISTS geocode_cache (
    address TEXT PRIMARY KEY,
    lat REAL,
    lon REAL
);
";

#[derive(Debug, Clone, Default)]
pub struct ResultFilter {
    pub name: Option<String>,
    pub status: Option<String>,
    pub stage: Option<Stage>,
    pub limit: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultItem {
    pub tweet: Tweet,
    pub result: TriageResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultPage {
    pub total: usize,
    pub items: Vec<ResultItem>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FilterLists {
    pub names: Vec<String>,
    pub statuses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TweetDetail {
    pub tweet: Tweet,
    pub result: Option<TriageResult>,
    pub annotations: Vec<AnnotationRecord>,
}

/// One connection behind a mutex: writes are serialized, and each read sees
/// a consistent snapshot.
pub struct Store {
    conn: Mutex<Connection>,
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_ts(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn json_col<T: serde::de::DeserializeOwned>(s: &str) -> rusqlite::Result<T> {
    serde_json::from_str(s)
        .map_err(|e| rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e)))
}

fn tweet_row(row: &rusqlite::Row<'_>) -> rusqlite::Result<Tweet> {
    Ok(Tweet {
        id: row.get("id")?,
        text: row.get("text")?,
        created_at: parse_ts(&row.get::<_, String>("created_at")?)?,
        author: row.get("author")?,
    })
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServerError> {
        let conn = Connection::open(path.as_ref())?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn)
    }

    pub fn in_memory() -> Result<Self, ServerError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, ServerError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(SCHEMA)?;
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn contains(&self, id: &str) -> Result<bool, ServerError> {
        let n: i64 = self
            .conn()
            .query_row("SELECT COUNT(*) FROM tweets WHERE id = ?1", [id], |r| r.get(0))?;
        Ok(n > 0)
    }

    /// Stores a tweet with its result in one transaction. Returns false and
    /// writes nothing when the id is already present.
    pub fn insert(&self, tweet: &Tweet, result: &TriageResult) -> Result<bool, ServerError> {
        let body = serde_json::to_string(result)?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let n = tx.execute(
            "INSERT OR IGNORE INTO tweets (id, text, created_at, created_ms, author) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![tweet.id, tweet.text, ts(&tweet.created_at), tweet.created_at.timestamp_millis(), tweet.author],
        )?;
        if n == 0 {
            return Ok(false);
        }
        tx.execute(
            "INSERT INTO results (tweet_id, stage, body) VALUES (?1, ?2, ?3)",
            params![tweet.id, result.stage.as_str(), body],
        )?;
        tx.commit()?;
        Ok(true)
    }

    pub fn stats(&self) -> Result<PipelineStats, ServerError> {
        let conn = self.conn();
        let mut q = conn.prepare("SELECT stage, COUNT(*) FROM results GROUP BY stage")?;
        let mut st = PipelineStats::default();
        for row in q.query_map([], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i64>(1)?)))? {
            let (stage, n) = row?;
            let stage: Stage = stage.parse().map_err(ServerError::Corrupt)?;
            st.count(stage, n as u64);
        }
        Ok(st)
    }

    fn items(&self, stages: &[Stage]) -> Result<Vec<ResultItem>, ServerError> {
        let conn = self.conn();
        let mut sql = String::from(
            "SELECT t.id, t.text, t.created_at, t.author, r.body FROM tweets t JOIN results r ON r.tweet_id = t.id",
        );
        if !stages.is_empty() {
            let list: Vec<String> = stages.iter().map(|s| format!("'{}'", s.as_str())).collect();
            sql.push_str(&format!(" WHERE r.stage IN ({})", list.join(",")));
        }
        sql.push_str(" ORDER BY t.created_ms DESC, t.id ASC");
        let mut q = conn.prepare(&sql)?;
        let rows = q.query_map([], |row| {
            Ok(ResultItem {
                tweet: tweet_row(row)?,
                result: json_col(&row.get::<_, String>("body")?)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Newest first, ties broken by id. `name` and `status` match a PER or
    /// STATUS surface case-insensitively.
    pub fn query_results(&self, f: &ResultFilter) -> Result<ResultPage, ServerError> {
        let stages: Vec<Stage> = f.stage.into_iter().collect();
        let fold = |s: &Option<String>| s.as_deref().map(|v| turkish_lower(v.trim()));
        let (name, status) = (fold(&f.name), fold(&f.status));
        let has = |item: &ResultItem, tag: EntityTag, want: &Option<String>| match want {
            None => true,
            Some(w) => item.result.surfaces(tag).any(|s| turkish_lower(s.trim()) == *w),
        };
        let matching: Vec<ResultItem> = self
            .items(&stages)?
            .into_iter()
            .filter(|it| has(it, EntityTag::Per, &name) && has(it, EntityTag::Status, &status))
            .collect();
        Ok(ResultPage {
            total: matching.len(),
            items: matching.into_iter().skip(f.offset).take(f.limit).collect(),
        })
    }

    /// Distinct PER and STATUS surfaces over located and unlocated results,
    /// sorted; case variants collapse onto the first one seen.
    pub fn filters(&self) -> Result<FilterLists, ServerError> {
        let mut items = self.items(&[Stage::Located, Stage::Unlocated])?;
        items.sort_by(|a, b| (a.tweet.created_at, &a.tweet.id).cmp(&(b.tweet.created_at, &b.tweet.id)));
        let collect = |tag: EntityTag| {
            let mut seen = HashSet::new();
            let mut out: Vec<(String, String)> = Vec::new();
            for it in &items {
                for s in it.result.surfaces(tag) {
                    let key = turkish_lower(s.trim());
                    if seen.insert(key.clone()) {
                        out.push((key, s.trim().to_string()));
                    }
                }
            }
            out.sort();
            out.into_iter().map(|p| p.1).collect()
        };
        Ok(FilterLists {
            names: collect(EntityTag::Per),
            statuses: collect(EntityTag::Status),
        })
    }

    pub fn tweet(&self, id: &str) -> Result<Option<Tweet>, ServerError> {
        Ok(self
            .conn()
            .query_row("SELECT id, text, created_at, author FROM tweets WHERE id = ?1", [id], tweet_row)
            .optional()?)
    }

    pub fn detail(&self, id: &str) -> Result<Option<TweetDetail>, ServerError> {
        let Some(tweet) = self.tweet(id)? else {
            return Ok(None);
        };
        let conn = self.conn();
        let result = conn
            .query_row("SELECT body FROM results WHERE tweet_id = ?1", [id], |r| {
                json_col::<TriageResult>(&r.get::<_, String>(0)?)
            })
            .optional()?;
        let mut q = conn.prepare("SELECT body FROM annotations WHERE tweet_id = ?1 ORDER BY annotator")?;
        let annotations = q
            .query_map([id], |r| json_col::<AnnotationRecord>(&r.get::<_, String>(0)?))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        Ok(Some(TweetDetail {
            tweet,
            result,
            annotations,
        }))
    }

    /// Inserts or replaces the annotation of `(tweet_id, annotator)`.
    pub fn upsert_annotation(&self, rec: &AnnotationRecord) -> Result<(), ServerError> {
        self.conn().execute(
            "INSERT INTO annotations (tweet_id, annotator, body) VALUES (?1, ?2, ?3)
             ON CONFLICT (tweet_id, annotator) DO UPDATE SET body = excluded.body",
            params![rec.tweet_id, rec.annotator, serde_json::to_string(rec)?],
        )?;
        Ok(())
    }

    pub fn annotations(&self) -> Result<Vec<AnnotationRecord>, ServerError> {
        let conn = self.conn();
        let mut q = conn.prepare("SELECT body FROM annotations ORDER BY tweet_id, annotator")?;
        let rows = q.query_map([], |r| json_col::<AnnotationRecord>(&r.get::<_, String>(0)?))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    fn cache_get(&self, address: &str) -> Result<Option<CacheEntry>, ServerError> {
        let row: Option<(Option<f64>, Option<f64>)> = self
            .conn()
            .query_row(
                "SELECT lat, lon FROM geocode_cache WHERE address = ?1",
                [address],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?;
        Ok(row.map(|(lat, lon)| match (lat, lon) {
            (Some(lat), Some(lon)) => CacheEntry::Found(GeoPoint { lat, lon }),
            _ => CacheEntry::NotFound,
        }))
    }

    fn cache_put(&self, address: &str, entry: CacheEntry) -> Result<(), ServerError> {
        let (lat, lon) = match entry {
            CacheEntry::Found(p) => (Some(p.lat), Some(p.lon)),
            CacheEntry::NotFound => (None, None),
        };
        self.conn().execute(
            "INSERT OR REPLACE INTO geocode_cache (address, lat, lon) VALUES (?1, ?2, ?3)",
            params![address, lat, lon],
        )?;
        Ok(())
    }
}

impl GeocodeCache for Store {
    fn get(&self, address: &str) -> Option<CacheEntry> {
        self.cache_get(address).unwrap_or_else(|e| {
            log::warn!("geocode cache read failed: {e}");
            None
        })
    }

    fn put(&self, address: &str, entry: CacheEntry) {
        if let Err(e) = self.cache_put(address, entry) {
            log::warn!("geocode cache write failed: {e}");
        }
    }
}
