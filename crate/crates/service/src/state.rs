//! Server state: the static corpus and frames, and the live store rebuilt
//! from the decision log.

use std::collections::{HashMap, HashSet};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use xamr_core::corpus::CorpusError;
use xamr_core::frames::FrameParseError;
use xamr_core::suggest::decision::{annotations_from_decisions, apply_decision, LogError};
use xamr_core::suggest::embed::fnv1a64;
use xamr_core::suggest::{ArgumentStore, Decision, DecisionError, DecisionLog, Embedding, EmbeddingProvider, HashingEmbedder, Slot};
use xamr_core::{load_corpus, load_frames, Corpus, FrameIndex, Mention, Split, XAmr};

use crate::config::{ConfigError, ServiceConfig};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Frames(#[from] FrameParseError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("decision log entry {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: DecisionError,
    },
}

#[derive(Debug, Error)]
pub enum CommitError {
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("{annotator} already decided {slot} for {mention_id}")]
    Duplicate {
        mention_id: String,
        slot: Slot,
        annotator: String,
    },
    #[error(transparent)]
    Invalid(#[from] DecisionError),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// Everything derived from the decision log.
pub struct Live {
    pub store: ArgumentStore,
    pub log: Vec<Decision>,
    decided: HashSet<(String, Slot, String)>,
}

impl Live {
    pub fn version(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn is_decided(&self, mention_id: &str, slot: Slot, annotator: &str) -> bool {
        self.decided
            .contains(&(mention_id.to_string(), slot, annotator.to_string()))
    }

    pub fn annotations(&self) -> Vec<XAmr> {
        annotations_from_decisions(&self.log)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoreDigest {
    pub version: u64,
    pub entries: usize,
    pub digest: String,
}

pub struct Service {
    pub config: ServiceConfig,
    pub corpus: Corpus,
    pub frames: FrameIndex,
    embedder: HashingEmbedder,
    embeddings: Vec<Embedding>,
    index: HashMap<String, usize>,
    /// Mention indices in serving order.
    queue: Vec<usize>,
    live: RwLock<Live>,
    writer: Mutex<DecisionLog>,
}

impl Service {
    pub fn load(config: ServiceConfig) -> Result<Service, ServiceError> {
        config.validate()?;
        let corpus = load_corpus(&config.corpus, &config.split_config())?;
        let frames = load_frames(&config.frames)?;
        Service::from_parts(config, corpus, frames)
    }

    /// Builds the service and replays the decision log, dropping a torn
    /// final line.
    pub fn from_parts(config: ServiceConfig, corpus: Corpus, frames: FrameIndex) -> Result<Service, ServiceError> {
        let embedder = HashingEmbedder::default();
        let texts: Vec<String> = corpus.mentions.iter().map(|m| m.sentence_text.clone()).collect();
        let embeddings = embedder.embed_batch(&texts, xamr_core::Execution::default());
        let index = corpus
            .mentions
            .iter()
            .enumerate()
            .map(|(i, m)| (m.mention_id.clone(), i))
            .collect();
        let mut queue: Vec<usize> = (0..corpus.mentions.len()).collect();
        if let Some(seed) = config.shuffle_seed {
            queue.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let (writer, log) = DecisionLog::open(&config.decision_log)?;
        let mut service = Service {
            live: RwLock::new(Live {
                store: ArgumentStore::new(config.scope),
                log: Vec::new(),
                decided: HashSet::new(),
            }),
            config,
            corpus,
            frames,
            embedder,
            embeddings,
            index,
            queue,
            writer: Mutex::new(writer),
        };
        {
            let live = service.live.get_mut().expect("fresh lock");
            for (i, d) in log.into_iter().enumerate() {
                let m = service
                    .index
                    .get(&d.mention_id)
                    .copied()
                    .ok_or_else(|| DecisionError::UnknownMention(d.mention_id.clone()))
                    .map_err(|source| ServiceError::Replay { index: i, source })?;
                apply(live, d, &service.embeddings[m], service.corpus.mentions[m].topic_id)
                    .map_err(|source| ServiceError::Replay { index: i, source })?;
            }
        }
        log::info!(
            "loaded {} mentions, {} rolesets, {} logged decisions",
            service.corpus.mentions.len(),
            service.frames.len(),
            service.live().version()
        );
        Ok(service)
    }

    pub fn live(&self) -> std::sync::RwLockReadGuard<'_, Live> {
        self.live.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn mention(&self, mention_id: &str) -> Option<&Mention> {
        self.index.get(mention_id).map(|&i| &self.corpus.mentions[i])
    }

    pub fn embedding(&self, mention_id: &str) -> Option<&Embedding> {
        self.index.get(mention_id).map(|&i| &self.embeddings[i])
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        &self.embedder
    }

    pub fn is_annotator(&self, annotator: &str) -> bool {
        self.config.annotators.iter().any(|a| a == annotator)
    }

    /// Round-robin assignment over the roster; double annotation also gives
    /// each mention to the next annotator.
    pub fn is_assigned(&self, mention_pos: usize, annotator: &str) -> bool {
        let n = self.config.annotators.len();
        let Some(a) = self.config.annotators.iter().position(|x| x == annotator) else {
            return false;
        };
        let first = mention_pos % n;
        a == first || (self.config.double_annotation && n > 1 && a == (first + 1) % n)
    }

    /// Mentions assigned to `annotator` in serving order, optionally
    /// restricted to one split.
    pub fn queue_for<'a>(&'a self, annotator: &'a str, split: Option<Split>) -> impl Iterator<Item = &'a Mention> + 'a {
        self.queue
            .iter()
            .filter(move |&&i| self.is_assigned(i, annotator))
            .map(|&i| &self.corpus.mentions[i])
            .filter(move |m| split.is_none_or(|s| m.split == s))
    }

    /// Validates, appends and applies one decision. The timestamp is
    /// assigned here so that log order and time order agree.
    pub fn commit(&self, mut d: Decision) -> Result<(u64, Option<u64>), CommitError> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if !self.is_annotator(&d.annotator) {
            return Err(CommitError::UnknownAnnotator(d.annotator));
        }
        let m = *self
            .index
            .get(&d.mention_id)
            .ok_or_else(|| DecisionError::UnknownMention(d.mention_id.clone()))?;
        d.check()?;
        {
            let live = self.live();
            if live.is_decided(&d.mention_id, d.slot, &d.annotator) {
                return Err(CommitError::Duplicate {
                    mention_id: d.mention_id,
                    slot: d.slot,
                    annotator: d.annotator,
                });
            }
            d.ts = next_timestamp(live.log.last().map(|last| last.ts));
        }
        writer.append(&d)?;
        let mut live = self.live.write().unwrap_or_else(|e| e.into_inner());
        let ordinal = apply(&mut live, d, &self.embeddings[m], self.corpus.mentions[m].topic_id)?;
        Ok((live.version(), ordinal))
    }

    pub fn digest(&self) -> StoreDigest {
        let live = self.live();
        store_digest(&live.store, live.version())
    }
}

pub fn store_digest(store: &ArgumentStore, version: u64) -> StoreDigest {
    let json = serde_json::to_string(store).expect("store serializes");
    StoreDigest {
        version,
        entries: store.len(),
        digest: format!("{:016x}", fnv1a64(json.as_bytes())),
    }
}

fn next_timestamp(last: Option<DateTime<Utc>>) -> DateTime<Utc> {
    let now = Utc::now();
    match last {
        Some(last) if last >= now => last + chrono::Duration::microseconds(1),
        _ => now,
    }
}

fn apply(live: &mut Live, d: Decision, embedding: &Embedding, topic_id: u32) -> Result<Option<u64>, DecisionError> {
    let ordinal = apply_decision(&mut live.store, &d, embedding, topic_id)?;
    live.decided
        .insert((d.mention_id.clone(), d.slot, d.annotator.clone()));
    live.log.push(d);
    Ok(ordinal)
}
