//! The X-AMR annotation unit: a roleset plus four arguments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::FrameIndex;
use crate::roleset::RolesetId;
use crate::time::{parse_time, TimeRef};

pub const WIKI_PREFIX: &str = "/wiki/";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("wiki link {0:?} must look like /wiki/<ID>")]
pub struct WikiFormatError(pub String);

pub fn normalize_surface(surface: &str) -> String {
    surface
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn is_valid_wiki(link: &str) -> bool {
    link.strip_prefix(WIKI_PREFIX)
        .is_some_and(|id| !id.is_empty() && !id.chars().any(char::is_whitespace))
}

/// An entity argument. `normalized` is always derived from `surface`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub surface: String,
    pub normalized: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wiki: Option<String>,
}

impl EntityRef {
    pub fn new(surface: &str) -> Self {
        EntityRef {
            surface: surface.to_string(),
            normalized: normalize_surface(surface),
            wiki: None,
        }
    }

    pub fn with_wiki(surface: &str, wiki: &str) -> Result<Self, WikiFormatError> {
        if !is_valid_wiki(wiki) {
            return Err(WikiFormatError(wiki.to_string()));
        }
        Ok(EntityRef {
            wiki: Some(wiki.to_string()),
            ..EntityRef::new(surface)
        })
    }

    /// Builds an entity from an optional link without validating it.
    pub(crate) fn unchecked(surface: &str, wiki: Option<&str>) -> Self {
        EntityRef {
            wiki: wiki.map(str::to_string),
            ..EntityRef::new(surface)
        }
    }

    /// Coreference equality: the wiki links decide when both carry one,
    /// otherwise the normalized surfaces do.
    pub fn coreferent(&self, other: &EntityRef) -> bool {
        match (&self.wiki, &other.wiki) {
            (Some(a), Some(b)) => a == b,
            _ => self.normalized == other.normalized,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArgValue {
    Entity(EntityRef),
    NestedEvent {
        roleset: RolesetId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linked_mention: Option<String>,
    },
    #[default]
    Empty,
}

impl ArgValue {
    pub fn entity(surface: &str) -> Self {
        ArgValue::Entity(EntityRef::new(surface))
    }

    pub fn nested(roleset: RolesetId) -> Self {
        ArgValue::NestedEvent {
            roleset,
            linked_mention: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ArgValue::Empty)
    }

    pub fn as_entity(&self) -> Option<&EntityRef> {
        match self {
            ArgValue::Entity(e) => Some(e),
            _ => None,
        }
    }

    /// Coreference equality lifted to argument values. Nested events agree
    /// on roleset; empty values never overlap.
    pub fn coreferent(&self, other: &ArgValue) -> bool {
        match (self, other) {
            (ArgValue::Entity(a), ArgValue::Entity(b)) => a.coreferent(b),
            (ArgValue::NestedEvent { roleset: a, .. }, ArgValue::NestedEvent { roleset: b, .. }) => {
                a == b
            }
            _ => false,
        }
    }
}

/// One annotated event mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XAmr {
    pub mention_id: String,
    pub roleset: RolesetId,
    #[serde(default)]
    pub arg0: ArgValue,
    #[serde(default)]
    pub arg1: ArgValue,
    #[serde(default)]
    pub arg_loc: ArgValue,
    #[serde(default)]
    pub arg_time: Option<TimeRef>,
    pub annotator_id: String,
}

impl XAmr {
    pub fn new(mention_id: &str, roleset: RolesetId, annotator_id: &str) -> Self {
        XAmr {
            mention_id: mention_id.to_string(),
            roleset,
            arg0: ArgValue::Empty,
            arg1: ArgValue::Empty,
            arg_loc: ArgValue::Empty,
            arg_time: None,
            annotator_id: annotator_id.to_string(),
        }
    }

    pub fn time(&self) -> Option<&TimeRef> {
        self.arg_time.as_ref().filter(|t| !t.is_empty())
    }

    /// True when at least one of the four argument slots is filled.
    pub fn has_xamr(&self) -> bool {
        !self.arg0.is_empty() || !self.arg1.is_empty() || !self.arg_loc.is_empty() || self.time().is_some()
    }

    pub fn has_nested_arg1(&self) -> bool {
        matches!(self.arg1, ArgValue::NestedEvent { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArgSlot {
    #[serde(rename = "ARG-0")]
    Arg0,
    #[serde(rename = "ARG-1")]
    Arg1,
    #[serde(rename = "ARG-Loc")]
    ArgLoc,
    #[serde(rename = "ARG-Time")]
    ArgTime,
}

impl ArgSlot {
    pub const ALL: [ArgSlot; 4] = [ArgSlot::Arg0, ArgSlot::Arg1, ArgSlot::ArgLoc, ArgSlot::ArgTime];

    pub fn name(self) -> &'static str {
        match self {
            ArgSlot::Arg0 => "ARG-0",
            ArgSlot::Arg1 => "ARG-1",
            ArgSlot::ArgLoc => "ARG-Loc",
            ArgSlot::ArgTime => "ARG-Time",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    UnknownRoleset { roleset: String },
    NestedEventOutsideArg1 { slot: ArgSlot },
    WikiFormatError { slot: ArgSlot, link: String },
    TimeFormatError { value: String },
}

fn check_wiki(slot: ArgSlot, value: &ArgValue, out: &mut Vec<Violation>) {
    if let ArgValue::Entity(EntityRef { wiki: Some(link), .. }) = value {
        if !is_valid_wiki(link) {
            out.push(Violation::WikiFormatError {
                slot,
                link: link.clone(),
            });
        }
    }
}

/// Checks an annotation against the frame index and the type constraints.
/// An empty result means the annotation is valid.
pub fn validate_xamr(x: &XAmr, index: &FrameIndex) -> Vec<Violation> {
    let mut out = Vec::new();
    if index.get(&x.roleset).is_none() {
        out.push(Violation::UnknownRoleset {
            roleset: x.roleset.to_string(),
        });
    }
    if let ArgValue::NestedEvent { roleset, .. } = &x.arg1 {
        if index.get(roleset).is_none() {
            out.push(Violation::UnknownRoleset {
                roleset: roleset.to_string(),
            });
        }
    }
    for (slot, value) in [(ArgSlot::Arg0, &x.arg0), (ArgSlot::ArgLoc, &x.arg_loc)] {
        if matches!(value, ArgValue::NestedEvent { .. }) {
            out.push(Violation::NestedEventOutsideArg1 { slot });
        }
    }
    for (slot, value) in [
        (ArgSlot::Arg0, &x.arg0),
        (ArgSlot::Arg1, &x.arg1),
        (ArgSlot::ArgLoc, &x.arg_loc),
    ] {
        check_wiki(slot, value, &mut out);
    }
    if let Some(t) = &x.arg_time {
        if t.check().is_err() {
            out.push(Violation::TimeFormatError {
                value: t.canonical(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotOverlap {
    pub arg0: bool,
    pub arg1: bool,
    pub arg_loc: bool,
    pub arg_time: bool,
}

impl SlotOverlap {
    pub fn get(&self, slot: ArgSlot) -> bool {
        match slot {
            ArgSlot::Arg0 => self.arg0,
            ArgSlot::Arg1 => self.arg1,
            ArgSlot::ArgLoc => self.arg_loc,
            ArgSlot::ArgTime => self.arg_time,
        }
    }

    pub fn count(&self) -> usize {
        ArgSlot::ALL.iter().filter(|s| self.get(**s)).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub roleset_match: bool,
    pub arg_overlap: SlotOverlap,
}

pub fn time_overlap(a: Option<&TimeRef>, b: Option<&TimeRef>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a.overlaps(b),
        _ => false,
    }
}

/// Compares two annotations slot by slot under coreference equality.
pub fn xamr_match(a: &XAmr, b: &XAmr) -> MatchReport {
    MatchReport {
        roleset_match: a.roleset == b.roleset,
        arg_overlap: SlotOverlap {
            arg0: a.arg0.coreferent(&b.arg0),
            arg1: a.arg1.coreferent(&b.arg1),
            arg_loc: a.arg_loc.coreferent(&b.arg_loc),
            arg_time: time_overlap(a.time(), b.time()),
        },
    }
}

// ---------------------------------------------------------------------------
// Annotation JSONL
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub surface: String,
    pub wiki: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arg1Record {
    pub kind: String,
    pub surface: Option<String>,
    pub wiki: Option<String>,
    pub roleset_id: Option<String>,
    pub linked_mention: Option<String>,
}

/// One line of the annotation JSONL export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub mention_id: String,
    pub annotator: String,
    pub roleset_id: String,
    pub arg0: Option<EntityRecord>,
    pub arg1: Option<Arg1Record>,
    pub arg_loc: Option<EntityRecord>,
    pub arg_time: Option<String>,
}

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn entity_record(value: &ArgValue) -> Option<EntityRecord> {
    value.as_entity().map(|e| EntityRecord {
        surface: e.surface.clone(),
        wiki: e.wiki.clone(),
    })
}

impl From<&XAmr> for AnnotationRecord {
    fn from(x: &XAmr) -> Self {
        let arg1 = match &x.arg1 {
            ArgValue::Entity(e) => Some(Arg1Record {
                kind: "entity".into(),
                surface: Some(e.surface.clone()),
                wiki: e.wiki.clone(),
                roleset_id: None,
                linked_mention: None,
            }),
            ArgValue::NestedEvent {
                roleset,
                linked_mention,
            } => Some(Arg1Record {
                kind: "event".into(),
                surface: None,
                wiki: None,
                roleset_id: Some(roleset.to_string()),
                linked_mention: linked_mention.clone(),
            }),
            ArgValue::Empty => None,
        };
        AnnotationRecord {
            mention_id: x.mention_id.clone(),
            annotator: x.annotator_id.clone(),
            roleset_id: x.roleset.to_string(),
            arg0: entity_record(&x.arg0),
            arg1,
            arg_loc: entity_record(&x.arg_loc),
            arg_time: x.time().map(TimeRef::canonical),
        }
    }
}

impl AnnotationRecord {
    /// Converts back to an [`XAmr`]. Wiki links are carried over unchecked so
    /// that [`validate_xamr`] can report them.
    pub fn to_xamr(&self) -> Result<XAmr, String> {
        let roleset = RolesetId::parse(&self.roleset_id).map_err(|e| e.to_string())?;
        let entity = |r: &Option<EntityRecord>| match r {
            Some(r) => ArgValue::Entity(EntityRef::unchecked(&r.surface, r.wiki.as_deref())),
            None => ArgValue::Empty,
        };
        let arg1 = match &self.arg1 {
            None => ArgValue::Empty,
            Some(r) if r.kind == "event" => {
                let id = r
                    .roleset_id
                    .as_deref()
                    .ok_or("event ARG-1 without roleset_id")?;
                ArgValue::NestedEvent {
                    roleset: RolesetId::parse(id).map_err(|e| e.to_string())?,
                    linked_mention: r.linked_mention.clone(),
                }
            }
            Some(r) if r.kind == "entity" => ArgValue::Entity(EntityRef::unchecked(
                r.surface.as_deref().unwrap_or_default(),
                r.wiki.as_deref(),
            )),
            Some(r) => return Err(format!("unknown ARG-1 kind {:?}", r.kind)),
        };
        let arg_time = match &self.arg_time {
            None => None,
            Some(text) => match TimeRef::from_canonical_lenient(text) {
                Some(t) => Some(t),
                None => {
                    let parsed = parse_time(text);
                    if !parsed.is_ok() {
                        return Err(format!("unparseable arg_time {text:?}"));
                    }
                    Some(parsed.time)
                }
            },
        };
        Ok(XAmr {
            mention_id: self.mention_id.clone(),
            roleset,
            arg0: entity(&self.arg0),
            arg1,
            arg_loc: entity(&self.arg_loc),
            arg_time,
            annotator_id: self.annotator.clone(),
        })
    }
}

pub fn write_annotations<W: std::io::Write>(mut out: W, items: &[XAmr]) -> std::io::Result<()> {
    for x in items {
        let line = serde_json::to_string(&AnnotationRecord::from(x))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_annotations<R: std::io::BufRead>(input: R) -> Result<Vec<XAmr>, AnnotationError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord =
            serde_json::from_str(&line).map_err(|source| AnnotationError::Json { line: i + 1, source })?;
        let x = record
            .to_xamr()
            .map_err(|message| AnnotationError::Invalid { line: i + 1, message })?;
        out.push(x);
    }
    Ok(out)
}
