//! Per-slot store of previously accepted argument values.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::roleset::RolesetId;
use crate::suggest::embed::{cosine, Embedding};
use crate::time::TimeRef;
use crate::xamr::ArgValue;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    #[serde(rename = "ROLESET")]
    Roleset,
    #[serde(rename = "ARG0")]
    Arg0,
    #[serde(rename = "ARG1")]
    Arg1,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "TIME")]
    Time,
}

impl Slot {
    pub const ALL: [Slot; 5] = [Slot::Roleset, Slot::Arg0, Slot::Arg1, Slot::Loc, Slot::Time];
    pub const ARGUMENTS: [Slot; 4] = [Slot::Arg0, Slot::Arg1, Slot::Loc, Slot::Time];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::Roleset => "ROLESET",
            Slot::Arg0 => "ARG0",
            Slot::Arg1 => "ARG1",
            Slot::Loc => "LOC",
            Slot::Time => "TIME",
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Slot::ALL
            .into_iter()
            .find(|slot| slot.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown slot {s:?}"))
    }
}

/// A value that can fill a slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Roleset(RolesetId),
    Time(TimeRef),
    Arg(ArgValue),
}

impl SlotValue {
    pub fn fits(&self, slot: Slot) -> bool {
        match (slot, self) {
            (Slot::Roleset, SlotValue::Roleset(_)) => true,
            (Slot::Time, SlotValue::Time(_)) => true,
            (Slot::Arg0 | Slot::Loc, SlotValue::Arg(v)) => !matches!(v, ArgValue::NestedEvent { .. }),
            (Slot::Arg1, SlotValue::Arg(_)) => true,
            _ => false,
        }
    }

    /// Empty values are legal decisions but never enter the store.
    pub fn is_empty(&self) -> bool {
        match self {
            SlotValue::Roleset(_) => false,
            SlotValue::Time(t) => t.is_empty(),
            SlotValue::Arg(v) => v.is_empty(),
        }
    }

    pub fn coreferent(&self, other: &SlotValue) -> bool {
        match (self, other) {
            (SlotValue::Roleset(a), SlotValue::Roleset(b)) => a == b,
            (SlotValue::Time(a), SlotValue::Time(b)) => a == b,
            (SlotValue::Arg(a), SlotValue::Arg(b)) => a.coreferent(b),
            _ => false,
        }
    }

    /// Text used for the final lexicographic tie-break and for display.
    pub fn sort_key(&self) -> String {
        match self {
            SlotValue::Roleset(id) => id.to_string(),
            SlotValue::Time(t) => t.canonical(),
            SlotValue::Arg(ArgValue::Entity(e)) => {
                format!("{}\u{1f}{}", e.normalized, e.wiki.as_deref().unwrap_or(""))
            }
            SlotValue::Arg(ArgValue::NestedEvent { roleset, .. }) => format!("\u{1e}{roleset}"),
            SlotValue::Arg(ArgValue::Empty) => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("value {value} is not legal for slot {slot}")]
    SlotValueMismatch { slot: Slot, value: String },
    #[error("empty values are not stored")]
    EmptyValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StoreScope {
    /// Candidates come only from the target's topic.
    #[default]
    #[serde(rename = "topic")]
    PerTopic,
    #[serde(rename = "global")]
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredArgument {
    pub slot: Slot,
    pub value: SlotValue,
    /// One embedding per source mention, in insertion order.
    pub embeddings: Vec<Embedding>,
    pub source_mentions: Vec<String>,
    pub ordinal: u64,
    pub topic_id: u32,
}

impl StoredArgument {
    /// Best cosine over this entry's embeddings.
    pub fn score(&self, target: &Embedding) -> f64 {
        self.embeddings
            .iter()
            .map(|e| cosine(e, target).unwrap_or(0.0))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub value: SlotValue,
    pub score: f64,
    pub rank: usize,
    pub ordinal: u64,
}

/// Append-only store of argument values. Ordinals increase strictly across
/// the whole store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentStore {
    scope: StoreScope,
    entries: Vec<StoredArgument>,
    next_ordinal: u64,
}

impl Default for ArgumentStore {
    fn default() -> Self {
        ArgumentStore::new(StoreScope::default())
    }
}

impl ArgumentStore {
    pub fn new(scope: StoreScope) -> Self {
        ArgumentStore {
            scope,
            entries: Vec::new(),
            next_ordinal: 1,
        }
    }

    pub fn scope(&self) -> StoreScope {
        self.scope
    }

    pub fn entries(&self) -> &[StoredArgument] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn in_scope(&self, entry: &StoredArgument, slot: Slot, topic_id: u32) -> bool {
        entry.slot == slot && (self.scope == StoreScope::Global || entry.topic_id == topic_id)
    }

    /// Adds a value, or reinforces the first coreferent entry already in
    /// scope. Returns the ordinal of the entry that holds the value.
    pub fn add(
        &mut self,
        slot: Slot,
        value: SlotValue,
        sentence_embedding: Embedding,
        mention_id: &str,
        topic_id: u32,
    ) -> Result<u64, StoreError> {
        if !value.fits(slot) {
            return Err(StoreError::SlotValueMismatch {
                slot,
                value: value.sort_key(),
            });
        }
        if value.is_empty() {
            return Err(StoreError::EmptyValue);
        }
        let scope = self.scope;
        if let Some(entry) = self.entries.iter_mut().find(|e| {
            e.slot == slot
                && (scope == StoreScope::Global || e.topic_id == topic_id)
                && e.value.coreferent(&value)
        }) {
            entry.embeddings.push(sentence_embedding);
            entry.source_mentions.push(mention_id.to_string());
            return Ok(entry.ordinal);
        }
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        self.entries.push(StoredArgument {
            slot,
            value,
            embeddings: vec![sentence_embedding],
            source_mentions: vec![mention_id.to_string()],
            ordinal,
            topic_id,
        });
        Ok(ordinal)
    }

    pub fn rank(&self, slot: Slot, target: &Embedding, topic_id: u32, k: usize) -> Vec<Suggestion> {
        self.rank_with(slot, target, topic_id, k, Execution::default())
    }

    /// Scores every in-scope candidate and returns the best `k`, ordered by
    /// score descending, then ordinal ascending, then value.
    pub fn rank_with(
        &self,
        slot: Slot,
        target: &Embedding,
        topic_id: u32,
        k: usize,
        exec: Execution,
    ) -> Vec<Suggestion> {
        if k == 0 {
            return Vec::new();
        }
        let candidates: Vec<&StoredArgument> = self
            .entries
            .iter()
            .filter(|e| self.in_scope(e, slot, topic_id))
            .collect();
        let scores = exec.map(&candidates, |e| e.score(target));
        let mut scored: Vec<(f64, &StoredArgument)> = scores.into_iter().zip(candidates).collect();
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then(a.ordinal.cmp(&b.ordinal))
                .then_with(|| a.value.sort_key().cmp(&b.value.sort_key()))
        });
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (score, e))| Suggestion {
                value: e.value.clone(),
                score,
                rank: i + 1,
                ordinal: e.ordinal,
            })
            .collect()
    }

    /// The set of (slot, topic, value key) triples held by the store.
    pub fn value_set(&self) -> std::collections::BTreeSet<(Slot, u32, String)> {
        self.entries
            .iter()
            .map(|e| (e.slot, e.topic_id, e.value.sort_key()))
            .collect()
    }

    pub fn find(&self, slot: Slot, value: &SlotValue, topic_id: u32) -> Option<&StoredArgument> {
        self.entries
            .iter()
            .find(|e| self.in_scope(e, slot, topic_id) && e.value.coreferent(value))
    }
}

pub fn default_selection(suggestions: &[Suggestion]) -> Option<&SlotValue> {
    suggestions.first().map(|s| &s.value)
}
