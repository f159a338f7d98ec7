//! Replays a tweet file against a running server in paced batches.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::Serialize;
use triage_core::domain::Tweet;
use triage_core::ingest::{replay, IngestBatch};
use triage_server::api::Rejected;
use triage_server::{IngestSummary, PipelineStats};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub sent: usize,
    pub batches: usize,
    pub accepted: u64,
    pub duplicates: u64,
    pub rejected: Vec<Rejected>,
    pub seconds: f64,
    /// Server-wide counters after the replay.
    pub stats: PipelineStats,
}

pub struct ApiClient {
    base: String,
    http: Client,
}

impl ApiClient {
    pub fn new(base: &str) -> Result<Self, CliError> {
        let http = Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(ApiClient {
            base: base.trim_end_matches('/').to_string(),
            http,
        })
    }

    fn check(resp: reqwest::blocking::Response) -> Result<String, CliError> {
        let status = resp.status();
        let body = resp.text().map_err(|e| CliError::Runtime(e.to_string()))?;
        if !status.is_success() {
            return Err(CliError::Runtime(format!("server answered {status}: {body}")));
        }
        Ok(body)
    }

    pub fn post_tweets(&self, tweets: &[Tweet]) -> Result<IngestSummary, CliError> {
        let body = serde_json::to_vec(tweets).map_err(|e| CliError::Runtime(e.to_string()))?;
        let resp = self
            .http
            .post(format!("{}/api/v1/tweets", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .map_err(|e| CliError::Runtime(format!("POST {}: {e}", self.base)))?;
        serde_json::from_str(&Self::check(resp)?).map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn stats(&self) -> Result<PipelineStats, CliError> {
        let resp = self
            .http
            .get(format!("{}/api/v1/stats", self.base))
            .send()
            .map_err(|e| CliError::Runtime(format!("GET {}: {e}", self.base)))?;
        serde_json::from_str(&Self::check(resp)?).map_err(|e| CliError::Runtime(e.to_string()))
    }
}

pub fn simulate(url: &str, batch: &IngestBatch, rate: f64, batch_size: usize) -> Result<SimulationReport, CliError> {
    let client = ApiClient::new(url)?;
    client.stats()?; // fail fast when nothing is listening

    let mut report = SimulationReport {
        sent: 0,
        batches: 0,
        accepted: 0,
        duplicates: 0,
        rejected: Vec::new(),
        seconds: 0.0,
        stats: PipelineStats::default(),
    };
    let mut pending: Vec<Tweet> = Vec::with_capacity(batch_size);
    let flush = |pending: &mut Vec<Tweet>, report: &mut SimulationReport| -> Result<(), CliError> {
        if pending.is_empty() {
            return Ok(());
        }
        let s = client.post_tweets(pending)?;
        let offset = report.sent;
        report.sent += pending.len();
        report.batches += 1;
        report.accepted += s.accepted;
        report.duplicates += s.duplicates;
        report.rejected.extend(s.rejected.into_iter().map(|r| Rejected {
            index: offset + r.index,
            error: r.error,
        }));
        log::info!("batch {}: {} tweets", report.batches, pending.len());
        pending.clear();
        Ok(())
    };

    let summary = replay(batch, rate, |t: &Tweet| {
        pending.push(t.clone());
        if pending.len() >= batch_size {
            flush(&mut pending, &mut report)
        } else {
            Ok(())
        }
    })
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    flush(&mut pending, &mut report)?;
    report.seconds = summary.duration.as_secs_f64();
    report.stats = client.stats()?;
    Ok(report)
}
