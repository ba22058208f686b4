//! Service configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use xamr_core::suggest::store::{StoreScope, DEFAULT_K};
use xamr_core::SplitConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Example:
///
/// ```toml
/// corpus = "data/ECB+"          # corpus directory or mention manifest (JSONL)
/// frames = "data/frames"        # directory of frame XML files
/// decision_log = "decisions.jsonl"
/// annotators = ["ann1", "ann2"]
/// dev_topics = [2, 5, 12]       # optional; defaults to the standard dev topics
/// scope = "topic"               # "topic" or "global"
/// bind = "127.0.0.1"
/// port = 8080
/// k = 10
/// double_annotation = false
/// interleave_phases = false
/// shuffle_seed = 7              # optional; default order is topic, document, sentence
/// static_dir = "webui/dist"     # optional
/// ```
///
/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub corpus: PathBuf,
    pub frames: PathBuf,
    pub decision_log: PathBuf,
    pub annotators: Vec<String>,
    #[serde(default)]
    pub dev_topics: Option<Vec<u32>>,
    #[serde(default)]
    pub scope: StoreScope,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub double_annotation: bool,
    #[serde(default)]
    pub interleave_phases: bool,
    #[serde(default)]
    pub shuffle_seed: Option<u64>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

fn default_k() -> usize {
    DEFAULT_K
}

impl ServiceConfig {
    pub fn new(corpus: &Path, frames: &Path, decision_log: &Path, annotators: &[&str]) -> Self {
        ServiceConfig {
            corpus: corpus.to_path_buf(),
            frames: frames.to_path_buf(),
            decision_log: decision_log.to_path_buf(),
            annotators: annotators.iter().map(|a| a.to_string()).collect(),
            dev_topics: None,
            scope: StoreScope::default(),
            bind: default_bind(),
            port: default_port(),
            k: default_k(),
            double_annotation: false,
            interleave_phases: false,
            shuffle_seed: None,
            static_dir: None,
        }
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: ServiceConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base.to_path_buf(),
            message: e.to_string(),
        })?;
        for p in [&mut config.corpus, &mut config.frames, &mut config.decision_log] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = config.static_dir.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        ServiceConfig::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.annotators.is_empty() {
            return Err(ConfigError::Invalid("annotator roster is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.annotators.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(ConfigError::Invalid(format!("annotator {dup:?} listed twice")));
        }
        if self.k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn split_config(&self) -> SplitConfig {
        match &self.dev_topics {
            Some(topics) => SplitConfig::with_dev_topics(topics.iter().copied()),
            None => SplitConfig::default(),
        }
    }
}
