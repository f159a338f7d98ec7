//! Tweet files, keyword filtering, deduplication and stream replay.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::domain::Tweet;
use crate::error::{Error, Result};
use crate::textfeat::turkish_lower;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeywordSetName {
    General,
    Help,
}

/// A named set of lowercase keyword phrases. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    name: KeywordSetName,
    keywords: Vec<String>,
}

impl KeywordSet {
    pub fn new<S: AsRef<str>>(name: KeywordSetName, keywords: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for k in keywords {
            let k = turkish_lower(k.as_ref().trim());
            if k.is_empty() {
                continue;
            }
            if !seen.insert(k.clone()) {
                return Err(Error::invalid(format!("duplicate keyword {k:?}")));
            }
            out.push(k);
        }
        if out.is_empty() {
            return Err(Error::invalid("keyword set is empty"));
        }
        Ok(KeywordSet { name, keywords: out })
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn from_file(name: KeywordSetName, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::new(
            name,
            text.lines().filter(|l| !l.trim_start().starts_with('#')),
        )
    }

    pub fn name(&self) -> KeywordSetName {
        self.name
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn matches(&self, text: &str) -> bool {
        let folded = turkish_lower(text);
        self.keywords.iter().any(|k| folded.contains(k.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestBatch {
    pub source: String,
    pub tweets: Vec<Tweet>,
    pub matched_set: Vec<Option<KeywordSetName>>,
    pub skipped: usize,
}

impl IngestBatch {
    pub fn from_tweets(source: impl Into<String>, tweets: Vec<Tweet>) -> Self {
        let tweets = dedupe(tweets);
        let matched_set = vec![None; tweets.len()];
        IngestBatch {
            source: source.into(),
            tweets,
            matched_set,
            skipped: 0,
        }
    }

    /// Records which keyword set (first match wins) each tweet falls under.
    pub fn tag_matches(&mut self, sets: &[KeywordSet]) {
        self.matched_set = self
            .tweets
            .iter()
            .map(|t| sets.iter().find(|s| s.matches(&t.text)).map(|s| s.name()))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }
}

/// Reads a JSON Lines tweet file, skipping and counting malformed lines.
/// Repeated ids keep their first occurrence.
pub fn read_tweets(path: impl AsRef<Path>) -> Result<IngestBatch> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(source.clone(), e))?;
    let (tweets, skipped) = parse_tweet_lines(&text);
    if tweets.is_empty() {
        return Err(Error::EmptyBatch { path: source, skipped });
    }
    let mut batch = IngestBatch::from_tweets(source, tweets);
    batch.skipped = skipped;
    Ok(batch)
}

pub fn parse_tweet_lines(text: &str) -> (Vec<Tweet>, usize) {
    let mut tweets = Vec::new();
    let mut skipped = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Tweet>(line) {
            Ok(t) if t.validate().is_ok() => tweets.push(t),
            Ok(_) | Err(_) => {
                log::debug!("skipping malformed tweet line");
                skipped += 1;
            }
        }
    }
    (tweets, skipped)
}

pub fn keyword_filter(tweets: &[Tweet], set: &KeywordSet) -> Vec<Tweet> {
    tweets.iter().filter(|t| set.matches(&t.text)).cloned().collect()
}

pub fn dedupe(tweets: Vec<Tweet>) -> Vec<Tweet> {
    let mut seen = HashSet::new();
    tweets.into_iter().filter(|t| seen.insert(t.id.clone())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplaySummary {
    pub count: usize,
    pub duration: Duration,
}

/// Delivers the batch to `sink` in timestamp order (ties by id), pacing at
/// `rate` tweets per second. The first tweet goes out immediately.
pub fn replay<S, E>(batch: &IngestBatch, rate: f64, mut sink: S) -> Result<ReplaySummary>
where
    S: FnMut(&Tweet) -> std::result::Result<(), E>,
    E: std::fmt::Display,
{
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("replay rate must be > 0, got {rate}")));
    }
    let mut order: Vec<&Tweet> = batch.tweets.iter().collect();
    order.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));

    let started = Instant::now();
    let interval = Duration::from_secs_f64(1.0 / rate);
    for (i, tweet) in order.iter().enumerate() {
        let due = interval.mul_f64(i as f64);
        if let Some(wait) = due.checked_sub(started.elapsed()) {
            std::thread::sleep(wait);
        }
        sink(tweet).map_err(|e| Error::Sink {
            delivered: i,
            message: e.to_string(),
        })?;
    }
    // the last tweet's slot still counts towards pacing
    if !order.is_empty() {
        if let Some(wait) = interval.mul_f64(order.len() as f64).checked_sub(started.elapsed()) {
            std::thread::sleep(wait);
        }
    }
    Ok(ReplaySummary {
        count: order.len(),
        duration: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use std::io::Write;

    fn tw(id: &str, text: &str, secs: i64) -> Tweet {
        Tweet {
            id: id.into(),
            text: text.into(),
            created_at: Utc.timestamp_opt(1_675_656_000 + secs, 0).unwrap(),
            author: None,
        }
    }

    #[test]
    fn read_single_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"1","text":"enkaz altında","created_at":"2023-02-06T04:17:00Z"}}"#).unwrap();
        let b = read_tweets(f.path()).unwrap();
        assert_eq!(b.tweets.len(), 1);
        assert_eq!(b.tweets[0].id, "1");
        assert_eq!(b.tweets[0].text, "enkaz altında");
        assert_eq!(b.tweets[0].created_at, Utc.with_ymd_and_hms(2023, 2, 6, 4, 17, 0).unwrap());
    }

    #[test]
    fn read_skips_malformed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":"1","text":"a","created_at":"2023-02-06T04:17:00Z"}}"#).unwrap();
        writeln!(f, "{{not json").unwrap();
        writeln!(f, r#"{{"id":"2","text":"b","created_at":"2023-02-06T04:18:00Z","author":"x"}}"#).unwrap();
        let b = read_tweets(f.path()).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.skipped, 1);
        assert_eq!(b.tweets[1].author.as_deref(), Some("x"));
    }

    #[test]
    fn read_empty_file_errors() {
        let f = tempfile::NamedTempFile::new().unwrap();
        assert!(matches!(read_tweets(f.path()), Err(Error::EmptyBatch { .. })));
        assert!(matches!(read_tweets("/nonexistent/x.jsonl"), Err(Error::Io { .. })));
    }

    #[test]
    fn keyword_examples() {
        let t = vec![tw("1", "ENKAZ ALTINDAYIZ yardım", 0)];
        let phrase = KeywordSet::new(KeywordSetName::Help, ["enkaz altında"]).unwrap();
        assert_eq!(keyword_filter(&t, &phrase).len(), 1);
        let other = KeywordSet::new(KeywordSetName::Help, ["enkaz altinda"]).unwrap();
        assert!(keyword_filter(&t, &other).is_empty());
        let word = KeywordSet::new(KeywordSetName::Help, ["enkaz"]).unwrap();
        assert_eq!(keyword_filter(&t, &word).len(), 1);

        let general = KeywordSet::new(KeywordSetName::General, ["deprem"]).unwrap();
        assert_eq!(keyword_filter(&[tw("2", "deprem oldu", 0)], &general).len(), 1);

        assert!(KeywordSet::new(KeywordSetName::General, Vec::<String>::new()).is_err());
        assert!(KeywordSet::new(KeywordSetName::General, ["Deprem", "deprem"]).is_err());
    }

    #[test]
    fn turkish_folding_in_match() {
        let set = KeywordSet::new(KeywordSetName::Help, ["altında"]).unwrap();
        assert!(set.matches("ENKAZ ALTINDA"));
        let set = KeywordSet::new(KeywordSetName::Help, ["İstanbul"]).unwrap();
        assert!(set.matches("istanbul"));
    }

    #[test]
    fn keyword_file_skips_comments() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# help\nenkaz altında\n\nyardım").unwrap();
        let s = KeywordSet::from_file(KeywordSetName::Help, f.path()).unwrap();
        assert_eq!(s.keywords(), ["enkaz altında", "yardım"]);
    }

    #[test]
    fn dedupe_examples() {
        let out = dedupe(vec![tw("1", "a", 0), tw("2", "b", 0), tw("1", "c", 0)]);
        assert_eq!(out.iter().map(|t| t.id.as_str()).collect::<Vec<_>>(), ["1", "2"]);
        assert_eq!(out[0].text, "a");
        assert!(dedupe(vec![]).is_empty());
    }

    #[test]
    fn replay_paces_and_orders() {
        let tweets: Vec<Tweet> = (0..10).rev().map(|i| tw(&format!("{i}"), "x", i)).collect();
        let batch = IngestBatch::from_tweets("mem", tweets);
        let mut got = Vec::new();
        let s = replay(&batch, 10.0, |t| {
            got.push(t.id.clone());
            Ok::<_, String>(())
        })
        .unwrap();
        assert_eq!(s.count, 10);
        let d = s.duration.as_secs_f64();
        assert!((0.5..=1.5).contains(&d), "duration {d}");
        assert_eq!(got, (0..10).map(|i| i.to_string()).collect::<Vec<_>>());
    }

    #[test]
    fn replay_ties_by_id_and_rejects_bad_rate() {
        let batch = IngestBatch::from_tweets("mem", vec![tw("b", "x", 0), tw("a", "x", 0)]);
        let mut got = Vec::new();
        replay(&batch, 1000.0, |t| {
            got.push(t.id.clone());
            Ok::<_, String>(())
        })
        .unwrap();
        assert_eq!(got, ["a", "b"]);
        assert!(replay(&batch, 0.0, |_| Ok::<_, String>(())).is_err());
        assert!(replay(&batch, -1.0, |_| Ok::<_, String>(())).is_err());

        let empty = IngestBatch::from_tweets("mem", vec![]);
        let s = replay(&empty, 1.0, |_| Ok::<_, String>(())).unwrap();
        assert_eq!(s.count, 0);
        assert!(s.duration < Duration::from_millis(50));
    }

    #[test]
    fn replay_sink_failure_reports_delivered() {
        let batch = IngestBatch::from_tweets("mem", (0..5).map(|i| tw(&i.to_string(), "x", i)).collect());
        let mut n = 0;
        let err = replay(&batch, 1e6, |_| {
            n += 1;
            if n == 3 {
                Err("boom")
            } else {
                Ok(())
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Sink { delivered: 2, .. }));
    }

    proptest! {
        #[test]
        fn filter_subset_idempotent(texts in prop::collection::vec("[a-zA-Zıİ ]{0,20}", 0..10)) {
            let tweets: Vec<Tweet> = texts.iter().enumerate().map(|(i, t)| tw(&i.to_string(), t, 0)).collect();
            let set = KeywordSet::new(KeywordSetName::Help, ["a", "ık"]).unwrap();
            let once = keyword_filter(&tweets, &set);
            prop_assert!(once.iter().all(|t| tweets.contains(t)));
            prop_assert_eq!(keyword_filter(&once, &set), once);
        }

        #[test]
        fn dedupe_distinct(ids in prop::collection::vec(0u8..5, 0..20)) {
            let tweets: Vec<Tweet> = ids.iter().map(|i| tw(&i.to_string(), "x", 0)).collect();
            let out = dedupe(tweets.clone());
            let distinct: HashSet<_> = out.iter().map(|t| t.id.clone()).collect();
            prop_assert_eq!(distinct.len(), out.len());
            prop_assert!(out.len() <= tweets.len());
        }

        #[test]
        fn replay_delivers_multiset(secs in prop::collection::vec(0i64..100, 0..15)) {
            let tweets: Vec<Tweet> = secs.iter().enumerate().map(|(i, s)| tw(&i.to_string(), "x", *s)).collect();
            let batch = IngestBatch::from_tweets("mem", tweets.clone());
            let mut got = Vec::new();
            replay(&batch, 1e6, |t| { got.push(t.id.clone()); Ok::<_, String>(()) }).unwrap();
            let mut want: Vec<String> = tweets.iter().map(|t| t.id.clone()).collect();
            got.sort();
            want.sort();
            prop_assert_eq!(got, want);
        }
    }
}
