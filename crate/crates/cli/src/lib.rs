//! The `triage` command line.

pub mod simulate;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use triage_core::classify::TrainConfig;
use triage_core::domain::{read_labeled, write_jsonl, Tweet};
use triage_core::evalkit::{cross_validate, generate_synthetic_corpus, CvConfig};
use triage_core::ingest::{read_tweets, KeywordSet, KeywordSetName};
use triage_core::models::{ModelBundle, ModelConfig};
use triage_core::nertag::CrfTrainConfig;
use triage_server::{ProviderChoice, ServerConfig, ServerError};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "triage", version, about = "Crisis-tweet triage: train, evaluate, serve and replay")]
pub struct Cli {
    /// Root for every relative path below.
    #[arg(long, global = true, default_value = "data")]
    pub data_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the vectorizer, classifier and tagger.
    Train(TrainArgs),
    /// Stratified k-fold evaluation of both models.
    Eval(EvalArgs),
    /// Run the REST service.
    Serve(ServeArgs),
    /// Replay a tweet file against a running server.
    Simulate(SimulateArgs),
    /// Write a synthetic labeled corpus.
    GenCorpus(GenArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimum document frequency of a vocabulary term.
    #[arg(long, default_value_t = 1)]
    pub min_df: usize,
    /// Classifier regularization.
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    /// Classifier passes over the data.
    #[arg(long, default_value_t = 50)]
    pub svm_epochs: usize,
    /// Maximum tagger passes over the data.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
}

impl ModelArgs {
    pub fn config(&self) -> ModelConfig<f64> {
        ModelConfig {
            min_df: self.min_df,
            svm: TrainConfig {
                lambda: self.lambda,
                epochs: self.svm_epochs,
                ..TrainConfig::default()
            },
            crf: CrfTrainConfig {
                iterations: self.iterations,
                l2: self.l2,
                learning_rate: self.learning_rate,
                ..CrfTrainConfig::default()
            },
        }
        .with_seed(self.seed)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Labeled data (annotation JSONL).
    #[arg(long, default_value = "synthetic.jsonl")]
    pub data: PathBuf,
    /// Output directory for the model files.
    #[arg(long, default_value = "models")]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, default_value = "synthetic.jsonl")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Overrides SERVER_PORT.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub cities: Option<PathBuf>,
    /// Overrides STORE_PATH.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Mock geocoder table; ignored when GEOCODER_URL is set.
    #[arg(long)]
    pub geocoder_table: Option<PathBuf>,
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long)]
    pub max_batch: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "demo_tweets.jsonl")]
    pub file: PathBuf,
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    pub url: String,
    /// Tweets per second.
    #[arg(long, default_value_t = 100.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    /// Only send tweets matching this keyword file.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic.jsonl")]
    pub out: PathBuf,
    /// Write bare tweets (the stream format) instead of labeled records.
    #[arg(long)]
    pub tweets_only: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<triage_core::Error> for CliError {
    fn from(e: triage_core::Error) -> Self {
        use triage_core::Error::*;
        match e {
            InvalidArgument(_) | EmptyBatch { .. } | SingleClass | EmptyVocabulary { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ServerError> for CliError {
    fn from(e: ServerError) -> Self {
        match e {
            ServerError::Core(c) => c.into(),
            ServerError::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn resolve(root: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn print_config(command: &str, value: serde_json::Value) {
    eprintln!("{}", json!({ "command": command, "config": value }));
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let root = cli.data_dir.as_path();
    match cli.command {
        Command::Train(a) => train(root, &a),
        Command::Eval(a) => eval(root, &a),
        Command::Serve(a) => serve(root, &a),
        Command::Simulate(a) => simulate_cmd(root, &a),
        Command::GenCorpus(a) => gen_corpus(root, &a),
    }
}

fn train(root: &Path, a: &TrainArgs) -> Result<(), CliError> {
    let data_path = resolve(root, &a.data);
    let out = resolve(root, &a.out);
    let cfg = a.model.config();
    print_config("train", json!({"data": data_path, "out": out, "models": cfg}));
    cfg.validate()?;
    let data = read_labeled(&data_path)?;
    let (bundle, summary) = ModelBundle::train(&data, &cfg)?;
    bundle.save(&out)?;
    println!("{}", to_json(&json!({
        "summary": summary,
        "vectorizer_fingerprint": bundle.vectorizer.fingerprint(),
        "files": ModelBundle::<f64>::paths(&out),
    }))?);
    Ok(())
}

fn eval(root: &Path, a: &EvalArgs) -> Result<(), CliError> {
    let data_path = resolve(root, &a.data);
    let cfg = CvConfig {
        k: a.k,
        seed: a.model.seed,
        models: a.model.config(),
    };
    print_config("eval", json!({"data": data_path, "cv": cfg}));
    if a.k < 2 {
        return Err(CliError::Usage("k must be >= 2".into()));
    }
    cfg.models.validate()?;
    let data = read_labeled(&data_path)?;
    let report = cross_validate(&data, &cfg)?;
    let body = to_json(&report)?;
    if let Some(p) = &a.out {
        let p = resolve(root, p);
        std::fs::write(&p, &body).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
    }
    println!("{body}");
    Ok(())
}

pub fn server_config(root: &Path, a: &ServeArgs) -> Result<ServerConfig, CliError> {
    let mut cfg = ServerConfig::from_env(root)?;
    if let Some(p) = a.port {
        cfg.port = p;
    }
    if let Some(p) = &a.models {
        cfg.model_dir = resolve(root, p);
    }
    if let Some(p) = &a.cities {
        cfg.cities_path = resolve(root, p);
    }
    if let Some(p) = &a.store {
        cfg.store_path = resolve(root, p);
    }
    if let Some(p) = &a.ui_dir {
        cfg.ui_dir = Some(resolve(root, p));
    }
    if let Some(n) = a.max_batch {
        cfg.max_batch = n;
    }
    if let (Some(p), ProviderChoice::Mock { .. }) = (&a.geocoder_table, &cfg.provider) {
        cfg.provider = ProviderChoice::Mock { table: resolve(root, p) };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn serve(root: &Path, a: &ServeArgs) -> Result<(), CliError> {
    let cfg = server_config(root, a)?;
    let mut shown = serde_json::to_value(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(key) = shown.pointer_mut("/provider/api_key").filter(|k| !k.is_null()) {
        *key = json!("***");
    }
    print_config("serve", json!({"host": a.host, "server": shown}));

    let state = triage_server::build_state(&cfg)?;
    let app = triage_server::app(state, cfg.ui_dir.as_deref());
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    rt.block_on(async {
        let addr = format!("{}:{}", a.host, cfg.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        };
        triage_server::serve(listener, app, shutdown).await.map_err(CliError::from)
    })
}

fn simulate_cmd(root: &Path, a: &SimulateArgs) -> Result<(), CliError> {
    let file = resolve(root, &a.file);
    let keywords = a.keywords.as_ref().map(|p| resolve(root, p));
    print_config(
        "simulate",
        json!({"file": file, "url": a.url, "rate": a.rate, "batch_size": a.batch_size, "keywords": keywords}),
    );
    if !(a.rate > 0.0 && a.rate.is_finite()) {
        return Err(CliError::Usage(format!("--rate must be > 0, got {}", a.rate)));
    }
    if a.batch_size == 0 {
        return Err(CliError::Usage("--batch-size must be >= 1".into()));
    }
    let mut batch = read_tweets(&file)?;
    if let Some(p) = keywords {
        let set = KeywordSet::from_file(KeywordSetName::Help, p)?;
        batch.tweets.retain(|t| set.matches(&t.text));
    }
    let report = simulate::simulate(&a.url, &batch, a.rate, a.batch_size)?;
    println!("{}", to_json(&report)?);
    Ok(())
}

fn gen_corpus(root: &Path, a: &GenArgs) -> Result<(), CliError> {
    let out = resolve(root, &a.out);
    print_config(
        "gen-corpus",
        json!({"n": a.n, "seed": a.seed, "out": out, "tweets_only": a.tweets_only}),
    );
    let corpus = generate_synthetic_corpus(a.n, a.seed)?;
    if a.tweets_only {
        let tweets: Vec<Tweet> = corpus.into_iter().map(|e| e.tweet).collect();
        write_jsonl(&out, &tweets)?;
    } else {
        write_jsonl(&out, &corpus)?;
    }
    eprintln!("wrote {} records to {}", a.n, out.display());
    Ok(())
}
