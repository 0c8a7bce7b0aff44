use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use chrono::{DateTime, Utc};
use msrbot_core::dialogue::{Bot, ConversationLog};
use msrbot_core::nlu::{read_training_file, IntentClassifier, WordVectorTable, DEFAULT_THRESHOLD};
use msrbot_core::{szz, KnowledgeBase, NowClock, QueryEngine};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_VECTORS: &str = "data/nlu/vectors.txt";
pub const DEFAULT_TRAINING: &str = "data/nlu/training.json";

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_true() -> bool {
    true
}

fn default_vectors() -> PathBuf {
    DEFAULT_VECTORS.into()
}

fn default_training() -> PathBuf {
    DEFAULT_TRAINING.into()
}

/// Everything the bot needs at startup. Read from TOML, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub kb_path: PathBuf,
    #[serde(default = "default_vectors")]
    pub vectors_path: PathBuf,
    #[serde(default = "default_training")]
    pub nlu_path: PathBuf,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_true")]
    pub szz_filter_report_date: bool,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
    /// Pins "now" for relative dates. Meant for tests.
    #[serde(default)]
    pub fixed_now: Option<DateTime<Utc>>,
}

impl ServiceConfig {
    pub fn new(kb_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            kb_path: kb_path.into(),
            vectors_path: default_vectors(),
            nlu_path: default_training(),
            threshold: DEFAULT_THRESHOLD,
            port: DEFAULT_PORT,
            szz_filter_report_date: true,
            log_path: None,
            fixed_now: None,
        }
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.threshold > 0.0 && self.threshold <= 1.0,
            "threshold must be in (0, 1], got {}",
            self.threshold
        );
        for (what, path) in [
            ("knowledge base", &self.kb_path),
            ("word vectors", &self.vectors_path),
            ("training file", &self.nlu_path),
        ] {
            if !path.is_file() {
                bail!("{what} not found at {}", path.display());
            }
        }
        Ok(())
    }

    pub fn clock(&self) -> NowClock {
        self.fixed_now.map(NowClock::fixed).unwrap_or_else(NowClock::system)
    }
}

/// Opens the store and re-mines in memory when its mined section is missing
/// or was produced with the other filter setting.
pub fn load_engine(kb_path: &Path, filter_report_date: bool) -> Result<QueryEngine> {
    let kb = Arc::new(
        KnowledgeBase::open(kb_path)
            .with_context(|| format!("cannot load knowledge base {}", kb_path.display()))?,
    );
    let mined = match kb.mined() {
        Some(m) if m.filter_report_date == filter_report_date => m.clone(),
        _ => szz::mine(&kb, filter_report_date).context("mining fix-inducing commits")?,
    };
    Ok(QueryEngine::with_mined(kb, mined))
}

pub fn load_classifier(vectors: &Path, training: &Path, threshold: f64) -> Result<IntentClassifier> {
    let table = WordVectorTable::read(BufReader::new(
        File::open(vectors).with_context(|| format!("cannot open {}", vectors.display()))?,
    ))
    .with_context(|| format!("invalid vector file {}", vectors.display()))?;
    let training_file = read_training_file(BufReader::new(
        File::open(training).with_context(|| format!("cannot open {}", training.display()))?,
    ))
    .with_context(|| format!("invalid training file {}", training.display()))?;
    IntentClassifier::new(table, &training_file, threshold).context("building the intent classifier")
}

pub fn load_bot(config: &ServiceConfig) -> Result<Bot> {
    config.validate()?;
    let engine = load_engine(&config.kb_path, config.szz_filter_report_date)?;
    let classifier = load_classifier(&config.vectors_path, &config.nlu_path, config.threshold)?;
    let mut bot = Bot::new(engine, classifier);
    if let Some(path) = &config.log_path {
        let log = ConversationLog::open(path)
            .with_context(|| format!("cannot open conversation log {}", path.display()))?;
        bot = bot.with_log(log);
    }
    Ok(bot)
}
