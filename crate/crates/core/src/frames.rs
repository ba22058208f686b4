//! PropBank frame-file loading and roleset search.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use xml::attribute::OwnedAttribute;
use xml::reader::{EventReader, XmlEvent};

use crate::roleset::{Role, Roleset, RolesetId};

#[derive(Debug, Error)]
pub enum FrameParseError {
    #[error("{file}:{line}:{column}: {message}")]
    Malformed {
        file: PathBuf,
        line: u64,
        column: u64,
        message: String,
    },
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate roleset {0}")]
    Duplicate(RolesetId),
}

/// Searchable collection of rolesets keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FrameIndex {
    rolesets: BTreeMap<RolesetId, Roleset>,
    #[serde(skip)]
    by_alias: BTreeMap<String, BTreeSet<RolesetId>>,
}

impl FrameIndex {
    pub fn from_rolesets(rolesets: impl IntoIterator<Item = Roleset>) -> Result<Self, FrameParseError> {
        let mut index = FrameIndex::default();
        for rs in rolesets {
            index.insert(rs)?;
        }
        Ok(index)
    }

    fn insert(&mut self, rs: Roleset) -> Result<(), FrameParseError> {
        if self.rolesets.contains_key(&rs.id) {
            return Err(FrameParseError::Duplicate(rs.id));
        }
        for alias in &rs.aliases {
            self.by_alias
                .entry(alias.to_lowercase())
                .or_default()
                .insert(rs.id.clone());
        }
        self.rolesets.insert(rs.id.clone(), rs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rolesets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rolesets.is_empty()
    }

    pub fn get(&self, id: &RolesetId) -> Option<&Roleset> {
        self.rolesets.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Roleset> {
        self.rolesets.values()
    }

    /// Rolesets whose lemma is exactly `lemma`, in sense order.
    pub fn by_lemma<'a>(&'a self, lemma: &'a str) -> impl Iterator<Item = &'a Roleset> + 'a {
        self.rolesets
            .values()
            .filter(move |rs| rs.id.lemma() == lemma)
    }

    pub fn by_alias(&self, alias: &str) -> impl Iterator<Item = &Roleset> {
        self.by_alias
            .get(&alias.to_lowercase())
            .into_iter()
            .flatten()
            .filter_map(|id| self.rolesets.get(id))
    }

    /// Ranked lookup: exact lemma matches, then alias matches, then
    /// substring matches in lemma or definition. Ids are ordered by lemma
    /// then sense within each tier.
    pub fn search(&self, query: &str, k: usize) -> Vec<&Roleset> {
        let query = query.trim().to_lowercase();
        if query.is_empty() || k == 0 {
            return Vec::new();
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |rs: &'_ Roleset, out: &mut Vec<RolesetId>| {
            if seen.insert(rs.id.clone()) {
                out.push(rs.id.clone());
            }
        };
        let mut ids = Vec::new();
        for rs in self.by_lemma(&query) {
            push(rs, &mut ids);
        }
        for rs in self.by_alias(&query) {
            push(rs, &mut ids);
        }
        for rs in self.rolesets.values() {
            if rs.id.lemma().contains(&query) || rs.definition.to_lowercase().contains(&query) {
                push(rs, &mut ids);
            }
        }
        for id in ids.into_iter().take(k) {
            out.push(&self.rolesets[&id]);
        }
        out
    }
}

pub fn search_rolesets<'a>(index: &'a FrameIndex, query: &str, k: usize) -> Vec<&'a Roleset> {
    index.search(query, k)
}

fn attr<'a>(attrs: &'a [OwnedAttribute], name: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|a| a.name.local_name == name)
        .map(|a| a.value.as_str())
}

struct PendingRoleset {
    id: RolesetId,
    definition: String,
    roles: Vec<Role>,
    aliases: Vec<String>,
}

/// Parses one frame file. Unknown elements are skipped.
pub fn parse_frame_file<R: Read>(reader: R, file: &Path) -> Result<Vec<Roleset>, FrameParseError> {
    let mut parser = EventReader::new(reader);
    let mut out = Vec::new();
    let mut predicate_lemma: Option<String> = None;
    let mut current: Option<PendingRoleset> = None;
    let mut alias_text: Option<String> = None;

    loop {
        let event = parser.next();
        let malformed = |parser: &EventReader<R>, message: String| {
            use xml::common::Position;
            let pos = parser.position();
            FrameParseError::Malformed {
                file: file.to_path_buf(),
                line: pos.row + 1,
                column: pos.column + 1,
                message,
            }
        };
        match event {
            Ok(XmlEvent::StartElement { name, attributes, .. }) => match name.local_name.as_str() {
                "predicate" => {
                    predicate_lemma = attr(&attributes, "lemma").map(|l| l.replace('_', " "));
                }
                "roleset" => {
                    let raw = attr(&attributes, "id")
                        .ok_or_else(|| malformed(&parser, "roleset without id".into()))?;
                    let id = RolesetId::parse(raw).map_err(|e| malformed(&parser, e.to_string()))?;
                    let mut aliases = Vec::new();
                    if let Some(lemma) = &predicate_lemma {
                        if lemma != id.lemma() {
                            aliases.push(lemma.clone());
                        }
                    }
                    current = Some(PendingRoleset {
                        id,
                        definition: attr(&attributes, "name").unwrap_or_default().to_string(),
                        roles: Vec::new(),
                        aliases,
                    });
                }
                "role" => {
                    if let Some(rs) = current.as_mut() {
                        let n = attr(&attributes, "n")
                            .ok_or_else(|| malformed(&parser, "role without n".into()))?;
                        let label = Role::label_from_attrs(n, attr(&attributes, "f"))
                            .ok_or_else(|| malformed(&parser, format!("unsupported role number {n:?}")))?;
                        if rs.roles.iter().any(|r| r.label == label) {
                            return Err(malformed(&parser, format!("duplicate role {label} in {}", rs.id)));
                        }
                        rs.roles.push(Role {
                            label,
                            description: attr(&attributes, "descr").unwrap_or_default().to_string(),
                        });
                    }
                }
                "alias" if current.is_some() => alias_text = Some(String::new()),
                _ => {}
            },
            Ok(XmlEvent::Characters(text)) => {
                if let Some(buf) = alias_text.as_mut() {
                    buf.push_str(&text);
                }
            }
            Ok(XmlEvent::EndElement { name }) => match name.local_name.as_str() {
                "alias" => {
                    if let (Some(text), Some(rs)) = (alias_text.take(), current.as_mut()) {
                        let alias = text.trim().replace('_', " ").to_lowercase();
                        if !alias.is_empty() && alias != rs.id.lemma() && !rs.aliases.contains(&alias) {
                            rs.aliases.push(alias);
                        }
                    }
                }
                "roleset" => {
                    if let Some(rs) = current.take() {
                        out.push(Roleset {
                            id: rs.id,
                            definition: rs.definition,
                            roles: rs.roles,
                            aliases: rs.aliases,
                        });
                    }
                }
                "predicate" => predicate_lemma = None,
                _ => {}
            },
            Ok(XmlEvent::EndDocument) => break,
            Ok(_) => {}
            Err(e) => {
                use xml::common::Position;
                let pos = e.position();
                return Err(FrameParseError::Malformed {
                    file: file.to_path_buf(),
                    line: pos.row + 1,
                    column: pos.column + 1,
                    message: e.msg().to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Loads every `*.xml` frame file directly under `dir`, in file-name order.
pub fn load_frames(dir: &Path) -> Result<FrameIndex, FrameParseError> {
    let io_err = |source| FrameParseError::Io {
        file: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "xml"))
        .collect();
    files.sort();
    let mut index = FrameIndex::default();
    for path in files {
        let file = File::open(&path).map_err(|source| FrameParseError::Io {
            file: path.clone(),
            source,
        })?;
        for rs in parse_frame_file(BufReader::new(file), &path)? {
            index.insert(rs)?;
        }
    }
    Ok(index)
}
