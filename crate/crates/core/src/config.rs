//! Flat TOML run configuration shared by every command.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{Optimizer, TrainConfig};
use crate::embedding::DEFAULT_HASH_SEED;
use crate::error::{Error, Result};
use crate::fusion::{default_grid, DEFAULT_THRESHOLD};

/// Where embeddings come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Hash,
    /// `host:port` of a running encoder service.
    External(String),
}

impl FromStr for ProviderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "hash" {
            return Ok(ProviderSpec::Hash);
        }
        match s.strip_prefix("external:") {
            Some(addr) if addr.rsplit_once(':').is_some_and(|(h, p)| !h.is_empty() && p.parse::<u16>().is_ok()) => {
                Ok(ProviderSpec::External(addr.to_string()))
            }
            _ => Err(Error::Config(format!(
                "provider `{s}` is neither `hash` nor `external:<host>:<port>`"
            ))),
        }
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Hash => f.write_str("hash"),
            ProviderSpec::External(a) => write!(f, "external:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub api_db_path: PathBuf,
    pub labels_path: PathBuf,
    pub output_dir: PathBuf,
    /// Trained model; defaults to `model.bin` in the output directory.
    pub model_path: Option<PathBuf>,
    pub provider: String,
    pub hash_seed: u64,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_width: usize,
    pub optimizer: Optimizer,
    pub x: f64,
    pub t: f64,
    pub grid: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            corpus_path: "corpus.jsonl".into(),
            api_db_path: "apis.jsonl".into(),
            labels_path: "labels.jsonl".into(),
            output_dir: "out".into(),
            model_path: None,
            provider: "hash".into(),
            hash_seed: DEFAULT_HASH_SEED,
            seed: train.seed,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            hidden_width: train.hidden_width,
            optimizer: train.optimizer,
            x: 0.5,
            t: DEFAULT_THRESHOLD,
            grid: default_grid(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative paths in the file are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_path);
        fix(&mut self.api_db_path);
        fix(&mut self.labels_path);
        fix(&mut self.output_dir);
        if let Some(m) = self.model_path.as_mut() {
            fix(m);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.provider_spec()?;
        for (name, v) in [("x", self.x), ("t", self.t)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::Config("grid must be a non-empty list of values in [0, 1]".into()));
        }
        self.train_config().validate(true)
    }

    pub fn provider_spec(&self) -> Result<ProviderSpec> {
        self.provider.parse()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            hidden_width: self.hidden_width,
            optimizer: self.optimizer,
        }
    }

    pub fn model_file(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("model.bin"))
    }
}
