//! Annotator decisions, their effect on the argument store, and the
//! append-only decision log.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::corpus::Mention;
use crate::roleset::RolesetId;
use crate::suggest::embed::{Embedding, EmbeddingProvider};
use crate::suggest::store::{ArgumentStore, Slot, SlotValue, StoreError, StoreScope};
use crate::time::TimeRef;
use crate::xamr::{is_valid_wiki, ArgValue, EntityRef, XAmr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Accept,
    Modify,
    RejectCreate,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Accept, Action::Modify, Action::RejectCreate];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub mention_id: String,
    pub slot: Slot,
    pub suggested: Option<SlotValue>,
    pub action: Action,
    pub final_value: SlotValue,
    pub annotator: String,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecisionError {
    #[error("ACCEPT requires the final value to equal the suggestion")]
    AcceptChanged,
    #[error("{0:?} without a suggestion; only REJECT_CREATE is allowed")]
    MissingSuggestion(Action),
    #[error("value does not fit slot {0}")]
    WrongSlot(Slot),
    #[error("malformed {slot} value: {message}")]
    BadValue { slot: Slot, message: String },
    #[error("unknown mention {0}")]
    UnknownMention(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl Decision {
    pub fn check(&self) -> Result<(), DecisionError> {
        for v in std::iter::once(&self.final_value).chain(self.suggested.as_ref()) {
            if !v.fits(self.slot) {
                return Err(DecisionError::WrongSlot(self.slot));
            }
        }
        match (&self.suggested, self.action) {
            (None, Action::RejectCreate) => Ok(()),
            (None, action) => Err(DecisionError::MissingSuggestion(action)),
            (Some(s), Action::Accept) if *s != self.final_value => Err(DecisionError::AcceptChanged),
            _ => Ok(()),
        }
    }
}

/// Applies one decision. ACCEPT reinforces the suggested value, MODIFY adds
/// the corrected value, REJECT_CREATE adds the annotator's value indexed by
/// the rejected sentence's embedding. Empty final values leave the store
/// unchanged.
pub fn apply_decision(
    store: &mut ArgumentStore,
    d: &Decision,
    target_embedding: &Embedding,
    topic_id: u32,
) -> Result<Option<u64>, DecisionError> {
    d.check()?;
    let value = match d.action {
        Action::Accept => d.suggested.as_ref().expect("checked"),
        Action::Modify | Action::RejectCreate => &d.final_value,
    };
    if value.is_empty() {
        return Ok(None);
    }
    let ordinal = store.add(d.slot, value.clone(), target_embedding.clone(), &d.mention_id, topic_id)?;
    Ok(Some(ordinal))
}

/// Rebuilds a store by folding [`apply_decision`] over the log.
pub fn replay(
    log: &[Decision],
    mentions: &HashMap<&str, &Mention>,
    embedder: &dyn EmbeddingProvider,
    scope: StoreScope,
) -> Result<ArgumentStore, DecisionError> {
    let mut store = ArgumentStore::new(scope);
    let mut cache: HashMap<&str, Embedding> = HashMap::new();
    for d in log {
        let m = mentions
            .get(d.mention_id.as_str())
            .ok_or_else(|| DecisionError::UnknownMention(d.mention_id.clone()))?;
        let emb = cache
            .entry(m.mention_id.as_str())
            .or_insert_with(|| embedder.embed(&m.sentence_text));
        apply_decision(&mut store, d, emb, m.topic_id)?;
    }
    Ok(store)
}

/// Folds the final values of a log into one annotation per (mention,
/// annotator) that has a roleset decision, in order of first decision. A
/// later decision for the same slot replaces an earlier one.
pub fn annotations_from_decisions(log: &[Decision]) -> Vec<XAmr> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut slots: HashMap<(&str, &str), HashMap<Slot, &SlotValue>> = HashMap::new();
    for d in log {
        let key = (d.mention_id.as_str(), d.annotator.as_str());
        let entry = slots.entry(key).or_insert_with(|| {
            order.push(key);
            HashMap::new()
        });
        entry.insert(d.slot, &d.final_value);
    }
    order
        .into_iter()
        .filter_map(|key| {
            let values = &slots[&key];
            let Some(SlotValue::Roleset(roleset)) = values.get(&Slot::Roleset) else {
                return None;
            };
            let mut x = XAmr::new(key.0, roleset.clone(), key.1);
            let arg = |slot| match values.get(&slot) {
                Some(SlotValue::Arg(v)) => v.clone(),
                _ => ArgValue::Empty,
            };
            x.arg0 = arg(Slot::Arg0);
            x.arg1 = arg(Slot::Arg1);
            x.arg_loc = arg(Slot::Loc);
            x.arg_time = match values.get(&Slot::Time) {
                Some(SlotValue::Time(t)) if !t.is_empty() => Some(*t),
                _ => None,
            };
            Some(x)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

fn entity_json(e: &EntityRef) -> Value {
    json!({ "surface": e.surface, "wiki": e.wiki })
}

/// Slot-aware JSON encoding shared by the decision log and the HTTP API.
pub fn value_to_json(slot: Slot, value: &SlotValue) -> Value {
    match (slot, value) {
        (_, SlotValue::Roleset(id)) => Value::String(id.to_string()),
        (_, SlotValue::Time(t)) => Value::String(t.canonical()),
        (_, SlotValue::Arg(ArgValue::Empty)) => Value::Null,
        (Slot::Arg1, SlotValue::Arg(ArgValue::Entity(e))) => json!({
            "kind": "entity", "surface": e.surface, "wiki": e.wiki,
            "roleset_id": null, "linked_mention": null,
        }),
        (_, SlotValue::Arg(ArgValue::Entity(e))) => entity_json(e),
        (_, SlotValue::Arg(ArgValue::NestedEvent { roleset, linked_mention })) => json!({
            "kind": "event", "surface": null, "wiki": null,
            "roleset_id": roleset.to_string(), "linked_mention": linked_mention,
        }),
    }
}

fn bad(slot: Slot, message: impl Into<String>) -> DecisionError {
    DecisionError::BadValue {
        slot,
        message: message.into(),
    }
}

fn entity_from_json(slot: Slot, v: &Value) -> Result<EntityRef, DecisionError> {
    let surface = v
        .get("surface")
        .and_then(Value::as_str)
        .ok_or_else(|| bad(slot, "missing surface"))?;
    match v.get("wiki").and_then(Value::as_str) {
        Some(w) if !is_valid_wiki(w) => Err(bad(slot, format!("bad wiki link {w:?}"))),
        Some(w) => Ok(EntityRef::with_wiki(surface, w).expect("validated")),
        None => Ok(EntityRef::new(surface)),
    }
}

pub fn value_from_json(slot: Slot, v: &Value) -> Result<SlotValue, DecisionError> {
    match slot {
        Slot::Roleset => {
            let text = v.as_str().ok_or_else(|| bad(slot, "expected a roleset id string"))?;
            RolesetId::parse(text)
                .map(SlotValue::Roleset)
                .map_err(|e| bad(slot, e.to_string()))
        }
        Slot::Time => {
            if v.is_null() {
                return Ok(SlotValue::Time(TimeRef::default()));
            }
            let text = v.as_str().ok_or_else(|| bad(slot, "expected a date string"))?;
            let parsed = crate::time::parse_time(text);
            match parsed.unparsed {
                None => Ok(SlotValue::Time(parsed.time)),
                Some(u) => Err(bad(slot, format!("unparseable date {u:?}"))),
            }
        }
        _ if v.is_null() => Ok(SlotValue::Arg(ArgValue::Empty)),
        Slot::Arg1 if v.get("kind").and_then(Value::as_str) == Some("event") => {
            let id = v
                .get("roleset_id")
                .and_then(Value::as_str)
                .ok_or_else(|| bad(slot, "event without roleset_id"))?;
            Ok(SlotValue::Arg(ArgValue::NestedEvent {
                roleset: RolesetId::parse(id).map_err(|e| bad(slot, e.to_string()))?,
                linked_mention: v.get("linked_mention").and_then(Value::as_str).map(str::to_string),
            }))
        }
        _ => {
            if let Some(kind) = v.get("kind").and_then(Value::as_str) {
                if kind != "entity" {
                    return Err(bad(slot, format!("{kind} values are not allowed here")));
                }
            }
            Ok(SlotValue::Arg(ArgValue::Entity(entity_from_json(slot, v)?)))
        }
    }
}

/// One JSONL line of the decision log. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub mention_id: String,
    pub slot: Slot,
    pub suggested: Value,
    pub action: Action,
    #[serde(rename = "final")]
    pub final_value: Value,
    pub annotator: String,
    pub ts: String,
}

impl From<&Decision> for DecisionRecord {
    fn from(d: &Decision) -> Self {
        DecisionRecord {
            mention_id: d.mention_id.clone(),
            slot: d.slot,
            suggested: d
                .suggested
                .as_ref()
                .map_or(Value::Null, |v| value_to_json(d.slot, v)),
            action: d.action,
            final_value: value_to_json(d.slot, &d.final_value),
            annotator: d.annotator.clone(),
            ts: d.ts.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        }
    }
}

impl TryFrom<&DecisionRecord> for Decision {
    type Error = DecisionError;

    fn try_from(r: &DecisionRecord) -> Result<Self, Self::Error> {
        let suggested = if r.suggested.is_null() {
            None
        } else {
            Some(value_from_json(r.slot, &r.suggested)?)
        };
        let ts = DateTime::parse_from_rfc3339(&r.ts)
            .map_err(|e| bad(r.slot, format!("bad timestamp {:?}: {e}", r.ts)))?
            .with_timezone(&Utc);
        let d = Decision {
            mention_id: r.mention_id.clone(),
            slot: r.slot,
            suggested,
            action: r.action,
            final_value: value_from_json(r.slot, &r.final_value)?,
            annotator: r.annotator.clone(),
            ts,
        };
        d.check()?;
        Ok(d)
    }
}

impl Decision {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&DecisionRecord::from(self)).expect("decision serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Decision, LogError> {
        let record: DecisionRecord = serde_json::from_str(line).map_err(|e| LogError::Line {
            line: 0,
            message: e.to_string(),
        })?;
        Decision::try_from(&record).map_err(|e| LogError::Line {
            line: 0,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("decision log line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Reads a decision log. A final line without a trailing newline that does
/// not parse is treated as a torn write and dropped; `truncated_at` reports
/// the byte length of the valid prefix in that case.
pub struct LoadedLog {
    pub decisions: Vec<Decision>,
    pub truncated_at: Option<u64>,
}

pub fn read_log(path: &Path) -> Result<LoadedLog, LogError> {
    let io = |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    };
    if !path.exists() {
        return Ok(LoadedLog {
            decisions: Vec::new(),
            truncated_at: None,
        });
    }
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut decisions = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf).map_err(io)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            offset += n as u64;
            continue;
        }
        match Decision::from_json_line(text) {
            Ok(d) => decisions.push(d),
            Err(_) if !complete => {
                return Ok(LoadedLog {
                    decisions,
                    truncated_at: Some(offset),
                })
            }
            Err(LogError::Line { message, .. }) => return Err(LogError::Line { line: line_no, message }),
            Err(e) => return Err(e),
        }
        offset += n as u64;
    }
    Ok(LoadedLog {
        decisions,
        truncated_at: None,
    })
}

/// Append-only JSONL writer. Each append is flushed and synced before it
/// returns.
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

impl DecisionLog {
    /// Opens (creating if needed) the log, dropping a torn final line.
    pub fn open(path: &Path) -> Result<(DecisionLog, Vec<Decision>), LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let loaded = read_log(path)?;
        if let Some(len) = loaded.truncated_at {
            let f = OpenOptions::new().write(true).open(path).map_err(io)?;
            f.set_len(len).map_err(io)?;
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok((
            DecisionLog {
                path: path.to_path_buf(),
                file,
            },
            loaded.decisions,
        ))
    }

    pub fn append(&mut self, d: &Decision) -> Result<(), LogError> {
        let mut line = d.to_json_line();
        line.push('\n');
        let io = |source| LogError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.flush().map_err(io)?;
        self.file.sync_data().map_err(io)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
