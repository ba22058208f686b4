//! ECB+-style corpus ingestion, topic splits and the mention manifest.
//!
//! Documents are token-based XML files. Sentence text is rebuilt by joining
//! tokens with single spaces and document text by joining sentences with a
//! single space; trigger spans are byte offsets computed after the join.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xml::attribute::OwnedAttribute;
use xml::common::Position;
use xml::reader::{EventReader, XmlEvent};

use crate::exec::Execution;
use crate::lemma::lemmatize;

/// Dev topics of the standard ECB+ split.
pub const STANDARD_DEV_TOPICS: [u32; 8] = [2, 5, 12, 18, 21, 23, 34, 35];
pub const LAST_TRAIN_DEV_TOPIC: u32 = 35;
pub const LAST_TEST_TOPIC: u32 = 45;
/// Optional file at the corpus root restricting mentions to listed sentences.
pub const SENTENCE_FILTER_FILE: &str = "ECBplus_coreference_sentences.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Byte span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn is_valid_in(&self, text: &str) -> bool {
        self.start < self.end
            && self.end <= text.len()
            && text.is_char_boundary(self.start)
            && text.is_char_boundary(self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub dev_topics: BTreeSet<u32>,
    /// Topics beyond 45 that the corpus declares, with their split.
    #[serde(default)]
    pub extra_topics: BTreeMap<u32, Split>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            dev_topics: STANDARD_DEV_TOPICS.into_iter().collect(),
            extra_topics: BTreeMap::new(),
        }
    }
}

impl SplitConfig {
    pub fn with_dev_topics(dev: impl IntoIterator<Item = u32>) -> Self {
        SplitConfig {
            dev_topics: dev.into_iter().collect(),
            extra_topics: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown topic {0}")]
    UnknownTopic(u32),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{file}: markable {markable} references missing token {token}")]
    DanglingMarkable {
        file: PathBuf,
        markable: String,
        token: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus directory {0} does not exist")]
    MissingDirectory(PathBuf),
}

/// Maps a topic to its split: topics 1-35 are train unless listed as dev,
/// 36-45 are test.
pub fn assign_split(topic_id: u32, config: &SplitConfig) -> Result<Split, CorpusError> {
    if let Some(split) = config.extra_topics.get(&topic_id) {
        return Ok(*split);
    }
    match topic_id {
        0 => Err(CorpusError::UnknownTopic(0)),
        t if t <= LAST_TRAIN_DEV_TOPIC => Ok(if config.dev_topics.contains(&t) {
            Split::Dev
        } else {
            Split::Train
        }),
        t if t <= LAST_TEST_TOPIC => Ok(Split::Test),
        t => Err(CorpusError::UnknownTopic(t)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub topic_id: u32,
    pub split: Split,
    pub sentences: Vec<String>,
}

impl Document {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }

    /// Byte offset of sentence `idx` within [`Document::text`].
    pub fn sentence_offset(&self, idx: usize) -> usize {
        self.sentences[..idx].iter().map(|s| s.len() + 1).sum()
    }
}

/// One gold event trigger occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub mention_id: String,
    pub topic_id: u32,
    pub doc_id: String,
    pub sentence_idx: usize,
    pub doc_text: String,
    pub sentence_text: String,
    pub trigger: Span,
    /// The trigger span within `doc_text`.
    pub doc_trigger: Span,
    pub trigger_lemma: String,
    pub split: Split,
    #[serde(default)]
    pub gold_cluster_id: Option<String>,
}

impl Mention {
    pub fn trigger_text(&self) -> &str {
        &self.sentence_text[self.trigger.start..self.trigger.end]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub topics: BTreeMap<u32, Vec<Document>>,
    pub mentions: Vec<Mention>,
}

impl Corpus {
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.topics.values().flatten()
    }

    pub fn document(&self, topic_id: u32, doc_id: &str) -> Option<&Document> {
        self.topics.get(&topic_id)?.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn mention(&self, mention_id: &str) -> Option<&Mention> {
        self.mentions.iter().find(|m| m.mention_id == mention_id)
    }

    pub fn mention_index(&self) -> HashMap<&str, &Mention> {
        self.mentions.iter().map(|m| (m.mention_id.as_str(), m)).collect()
    }

    pub fn split_summary(&self) -> BTreeMap<Split, (usize, usize)> {
        let mut out: BTreeMap<Split, (usize, usize)> = Split::ALL.iter().map(|s| (*s, (0, 0))).collect();
        for d in self.documents() {
            out.get_mut(&d.split).unwrap().0 += 1;
        }
        for m in &self.mentions {
            out.get_mut(&m.split).unwrap().1 += 1;
        }
        out
    }

    /// Sorts documents and mentions into topic, document, sentence and
    /// trigger order.
    pub fn normalize_order(&mut self) {
        for docs in self.topics.values_mut() {
            docs.sort_by_key(|d| doc_order_key(&d.doc_id));
        }
        self.mentions.sort_by(|a, b| {
            (a.topic_id, doc_order_key(&a.doc_id), a.sentence_idx, a.trigger.start, a.trigger.end, &a.mention_id).cmp(&(
                b.topic_id,
                doc_order_key(&b.doc_id),
                b.sentence_idx,
                b.trigger.start,
                b.trigger.end,
                &b.mention_id,
            ))
        });
    }
}

/// Orders `36_10ecb` after `36_2ecb`.
fn doc_order_key(doc_id: &str) -> (u32, u64, String) {
    let mut parts = doc_id.splitn(2, '_');
    let topic = parts.next().and_then(|p| p.parse().ok()).unwrap_or(u32::MAX);
    let rest = parts.next().unwrap_or("");
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    (topic, digits.parse().unwrap_or(u64::MAX), doc_id.to_string())
}

/// Topic id from a file name prefix (`36_2ecb.xml`) or the parent directory.
pub fn topic_from_path(path: &Path) -> Option<u32> {
    let stem = path.file_stem()?.to_str()?;
    let prefix: String = stem.chars().take_while(char::is_ascii_digit).collect();
    if !prefix.is_empty() && stem[prefix.len()..].starts_with('_') {
        return prefix.parse().ok();
    }
    path.parent()?.file_name()?.to_str()?.parse().ok()
}

// ---------------------------------------------------------------------------
// XML reading
// ---------------------------------------------------------------------------

fn attr<'a>(attrs: &'a [OwnedAttribute], name: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|a| a.name.local_name == name)
        .map(|a| a.value.as_str())
}

fn is_event_tag(tag: &str) -> bool {
    tag.starts_with("ACTION_") || tag.starts_with("NEG_ACTION_")
}

struct RawToken {
    t_id: String,
    sentence: usize,
    number: usize,
    text: String,
}

struct RawMarkable {
    m_id: String,
    tag: String,
    anchors: Vec<String>,
    instance_id: Option<String>,
}

struct RawRelation {
    r_id: String,
    kind: String,
    note: Option<String>,
    sources: Vec<String>,
    target: Option<String>,
}

#[derive(Default)]
struct RawDocument {
    doc_name: Option<String>,
    tokens: Vec<RawToken>,
    markables: Vec<RawMarkable>,
    relations: Vec<RawRelation>,
}

fn parse_error<R: Read>(parser: &EventReader<R>, file: &Path, message: String) -> CorpusError {
    CorpusError::Parse {
        file: file.to_path_buf(),
        line: parser.position().row + 1,
        message,
    }
}

fn read_raw<R: Read>(reader: R, file: &Path) -> Result<RawDocument, CorpusError> {
    let mut parser = EventReader::new(reader);
    let mut doc = RawDocument::default();
    let mut token: Option<RawToken> = None;
    let mut in_markables = false;
    let mut in_relations = false;
    let mut markable: Option<RawMarkable> = None;
    let mut relation: Option<RawRelation> = None;
    loop {
        let event = parser.next();
        match event {
            Ok(XmlEvent::StartElement { name, attributes, .. }) => {
                let tag = name.local_name.as_str();
                match tag {
                    "Document" => doc.doc_name = attr(&attributes, "doc_name").map(str::to_string),
                    "token" if !in_markables => {
                        let get = |k: &str| {
                            attr(&attributes, k)
                                .ok_or_else(|| parse_error(&parser, file, format!("token without {k}")))
                        };
                        let t_id = get("t_id")?.to_string();
                        let sentence = get("sentence")?
                            .parse()
                            .map_err(|_| parse_error(&parser, file, "bad sentence number".into()))?;
                        let number = get("number")?
                            .parse()
                            .map_err(|_| parse_error(&parser, file, "bad token number".into()))?;
                        token = Some(RawToken {
                            t_id,
                            sentence,
                            number,
                            text: String::new(),
                        });
                    }
                    "Markables" => in_markables = true,
                    "Relations" => in_relations = true,
                    "token_anchor" if in_markables => {
                        let t_id = attr(&attributes, "t_id")
                            .ok_or_else(|| parse_error(&parser, file, "token_anchor without t_id".into()))?;
                        if let Some(m) = markable.as_mut() {
                            m.anchors.push(t_id.to_string());
                        }
                    }
                    _ if in_markables && markable.is_none() => {
                        let m_id = attr(&attributes, "m_id")
                            .ok_or_else(|| parse_error(&parser, file, format!("{tag} without m_id")))?;
                        markable = Some(RawMarkable {
                            m_id: m_id.to_string(),
                            tag: tag.to_string(),
                            anchors: Vec::new(),
                            instance_id: attr(&attributes, "instance_id")
                                .filter(|s| !s.is_empty())
                                .map(str::to_string),
                        });
                    }
                    "source" | "target" if in_relations => {
                        if let (Some(r), Some(m_id)) = (relation.as_mut(), attr(&attributes, "m_id")) {
                            if tag == "source" {
                                r.sources.push(m_id.to_string());
                            } else {
                                r.target = Some(m_id.to_string());
                            }
                        }
                    }
                    _ if in_relations && relation.is_none() => {
                        relation = Some(RawRelation {
                            r_id: attr(&attributes, "r_id").unwrap_or_default().to_string(),
                            kind: tag.to_string(),
                            note: attr(&attributes, "note").filter(|s| !s.is_empty()).map(str::to_string),
                            sources: Vec::new(),
                            target: None,
                        });
                    }
                    _ => {}
                }
            }
            Ok(XmlEvent::Characters(text)) => {
                if let Some(t) = token.as_mut() {
                    t.text.push_str(&text);
                }
            }
            Ok(XmlEvent::EndElement { name }) => {
                let tag = name.local_name.as_str();
                match tag {
                    "token" if token.is_some() => {
                        let mut t = token.take().unwrap();
                        t.text = t.text.trim().to_string();
                        doc.tokens.push(t);
                    }
                    "Markables" => in_markables = false,
                    "Relations" => in_relations = false,
                    _ if markable.as_ref().is_some_and(|m| m.tag == tag) => {
                        doc.markables.push(markable.take().unwrap());
                    }
                    _ if relation.as_ref().is_some_and(|r| r.kind == tag) => {
                        doc.relations.push(relation.take().unwrap());
                    }
                    _ => {}
                }
            }
            Ok(XmlEvent::EndDocument) => break,
            Ok(_) => {}
            Err(e) => {
                return Err(CorpusError::Parse {
                    file: file.to_path_buf(),
                    line: e.position().row + 1,
                    message: e.msg().to_string(),
                })
            }
        }
    }
    Ok(doc)
}

/// Sentences to keep per document, read from the optional filter file.
type SentenceFilter = HashMap<String, BTreeSet<usize>>;

fn read_sentence_filter(path: &Path) -> Result<SentenceFilter, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out: SentenceFilter = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 3 {
            continue;
        }
        // header row or anything non-numeric in the sentence column
        let Ok(sentence) = cols[2].parse::<usize>() else {
            if i == 0 {
                continue;
            }
            return Err(CorpusError::Parse {
                file: path.to_path_buf(),
                line: i as u64 + 1,
                message: format!("bad sentence number {:?}", cols[2]),
            });
        };
        let doc = cols[1].trim_end_matches(".xml").to_string();
        out.entry(doc).or_default().insert(sentence);
    }
    Ok(out)
}

fn build_document(
    raw: RawDocument,
    file: &Path,
    topic_id: u32,
    split: Split,
    filter: Option<&SentenceFilter>,
) -> Result<(Document, Vec<Mention>), CorpusError> {
    let doc_id = raw
        .doc_name
        .clone()
        .unwrap_or_else(|| file.file_stem().unwrap_or_default().to_string_lossy().into_owned());
    let doc_id = doc_id.trim_end_matches(".xml").to_string();

    let mut by_sentence: BTreeMap<usize, Vec<&RawToken>> = BTreeMap::new();
    for t in &raw.tokens {
        by_sentence.entry(t.sentence).or_default().push(t);
    }
    // sentence numbers are renumbered densely in document order
    let mut sentences = Vec::new();
    let mut token_pos: HashMap<&str, (usize, usize, usize)> = HashMap::new();
    let mut original_sentence = Vec::new();
    for (orig, mut tokens) in by_sentence {
        tokens.sort_by_key(|t| t.number);
        let mut text = String::new();
        for t in tokens {
            if !text.is_empty() {
                text.push(' ');
            }
            let start = text.len();
            text.push_str(&t.text);
            token_pos.insert(t.t_id.as_str(), (sentences.len(), start, text.len()));
        }
        sentences.push(text);
        original_sentence.push(orig);
    }
    let document = Document {
        doc_id: doc_id.clone(),
        topic_id,
        split,
        sentences,
    };
    let doc_text = document.text();

    let markables: HashMap<&str, &RawMarkable> = raw.markables.iter().map(|m| (m.m_id.as_str(), m)).collect();
    let mut cluster_of: HashMap<&str, String> = HashMap::new();
    for r in &raw.relations {
        let cluster = match r.kind.as_str() {
            "CROSS_DOC_COREF" => r
                .note
                .clone()
                .or_else(|| {
                    r.target
                        .as_deref()
                        .and_then(|t| markables.get(t))
                        .and_then(|m| m.instance_id.clone())
                })
                .unwrap_or_else(|| format!("{doc_id}:r{}", r.r_id)),
            "INTRA_DOC_COREF" => r.note.clone().unwrap_or_else(|| format!("INTRA_{doc_id}_{}", r.r_id)),
            _ => continue,
        };
        for s in &r.sources {
            cluster_of.insert(s.as_str(), cluster.clone());
        }
    }

    let keep = filter.map(|f| f.get(&doc_id));
    let mut mentions = Vec::new();
    for m in raw.markables.iter().filter(|m| is_event_tag(&m.tag) && !m.anchors.is_empty()) {
        let mut positions = Vec::with_capacity(m.anchors.len());
        for a in &m.anchors {
            let pos = token_pos.get(a.as_str()).ok_or_else(|| CorpusError::DanglingMarkable {
                file: file.to_path_buf(),
                markable: m.m_id.clone(),
                token: a.clone(),
            })?;
            positions.push(*pos);
        }
        let sentence_idx = positions[0].0;
        if positions.iter().any(|p| p.0 != sentence_idx) {
            return Err(CorpusError::Parse {
                file: file.to_path_buf(),
                line: 0,
                message: format!("markable {} spans several sentences", m.m_id),
            });
        }
        if let Some(keep) = keep {
            let listed = keep.is_some_and(|s| s.contains(&original_sentence[sentence_idx]));
            if !listed {
                continue;
            }
        }
        let start = positions.iter().map(|p| p.1).min().unwrap();
        let end = positions.iter().map(|p| p.2).max().unwrap();
        let sentence_text = document.sentences[sentence_idx].clone();
        let offset = document.sentence_offset(sentence_idx);
        mentions.push(Mention {
            mention_id: format!("{doc_id}:{}", m.m_id),
            topic_id,
            doc_id: doc_id.clone(),
            sentence_idx,
            doc_text: doc_text.clone(),
            trigger_lemma: lemmatize(&sentence_text[start..end]),
            sentence_text,
            trigger: Span::new(start, end),
            doc_trigger: Span::new(offset + start, offset + end),
            split,
            gold_cluster_id: cluster_of.get(m.m_id.as_str()).cloned(),
        });
    }
    Ok((document, mentions))
}

fn corpus_files(source: &Path) -> Result<Vec<(PathBuf, u32)>, CorpusError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(source).sort_by_file_name() {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e.path().unwrap_or(source).to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        let path = entry.path();
        if !entry.file_type().is_file() || path.extension().is_none_or(|e| e != "xml") {
            continue;
        }
        let topic = topic_from_path(path).ok_or_else(|| CorpusError::Parse {
            file: path.to_path_buf(),
            line: 0,
            message: "cannot determine topic id from path".into(),
        })?;
        files.push((path.to_path_buf(), topic));
    }
    Ok(files)
}

/// Reads every `*.xml` document below `source`.
/// Loads a corpus directory, or a mention manifest when `path` is a file.
/// A manifest yields mentions only; splits are taken from the manifest.
pub fn load_corpus(path: &Path, config: &SplitConfig) -> Result<Corpus, CorpusError> {
    if path.is_file() {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mentions = read_manifest(BufReader::new(file)).map_err(|e| match e {
            CorpusError::Parse { line, message, .. } => CorpusError::Parse {
                file: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })?;
        let mut corpus = Corpus {
            topics: BTreeMap::new(),
            mentions,
        };
        corpus.normalize_order();
        Ok(corpus)
    } else {
        ingest_corpus(path, config)
    }
}

pub fn ingest_corpus(source: &Path, config: &SplitConfig) -> Result<Corpus, CorpusError> {
    ingest_corpus_with(source, config, Execution::default())
}

pub fn ingest_corpus_with(source: &Path, config: &SplitConfig, exec: Execution) -> Result<Corpus, CorpusError> {
    if !source.is_dir() {
        return Err(CorpusError::MissingDirectory(source.to_path_buf()));
    }
    let filter_path = source.join(SENTENCE_FILTER_FILE);
    let filter = if filter_path.is_file() {
        Some(read_sentence_filter(&filter_path)?)
    } else {
        None
    };
    let files = corpus_files(source)?;
    let parsed = exec.map(&files, |(path, topic)| -> Result<_, CorpusError> {
        let split = assign_split(*topic, config)?;
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let raw = read_raw(BufReader::new(file), path)?;
        build_document(raw, path, *topic, split, filter.as_ref())
    });
    let mut corpus = Corpus::default();
    for result in parsed {
        let (doc, mentions) = result?;
        corpus.topics.entry(doc.topic_id).or_default().push(doc);
        corpus.mentions.extend(mentions);
    }
    corpus.normalize_order();
    Ok(corpus)
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Renders one document in the corpus XML format. Tokens are recovered by
/// splitting sentences on single spaces.
pub fn render_document(doc: &Document, mentions: &[&Mention]) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<Document doc_name=\"{}.xml\">\n", escape(&doc.doc_id)));
    let mut t_id = 0usize;
    // (sentence, byte start) -> t_id
    let mut starts: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ends: HashMap<(usize, usize), usize> = HashMap::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        let mut pos = 0;
        for (n, tok) in sentence.split(' ').enumerate() {
            t_id += 1;
            starts.insert((s, pos), t_id);
            ends.insert((s, pos + tok.len()), t_id);
            out.push_str(&format!(
                "<token t_id=\"{t_id}\" sentence=\"{s}\" number=\"{n}\">{}</token>\n",
                escape(tok)
            ));
            pos += tok.len() + 1;
        }
    }
    out.push_str("<Markables>\n");
    let mut clusters: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for m in mentions {
        let m_id = m.mention_id.rsplit(':').next().unwrap_or(&m.mention_id);
        let first = starts[&(m.sentence_idx, m.trigger.start)];
        let last = ends[&(m.sentence_idx, m.trigger.end)];
        out.push_str(&format!("<ACTION_OCCURRENCE m_id=\"{}\">\n", escape(m_id)));
        for t in first..=last {
            out.push_str(&format!("<token_anchor t_id=\"{t}\"/>\n"));
        }
        out.push_str("</ACTION_OCCURRENCE>\n");
        if let Some(c) = &m.gold_cluster_id {
            clusters.entry(c).or_default().push(m_id.to_string());
        }
    }
    out.push_str("</Markables>\n<Relations>\n");
    for (r, (cluster, sources)) in clusters.iter().enumerate() {
        out.push_str(&format!(
            "<CROSS_DOC_COREF r_id=\"{}\" note=\"{}\">\n",
            r + 1,
            escape(cluster)
        ));
        for s in sources {
            out.push_str(&format!("<source m_id=\"{}\"/>\n", escape(s)));
        }
        out.push_str("</CROSS_DOC_COREF>\n");
    }
    out.push_str("</Relations>\n</Document>\n");
    out
}

/// Writes the corpus as `<dir>/<topic>/<doc_id>.xml`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    for (topic, docs) in &corpus.topics {
        let topic_dir = dir.join(topic.to_string());
        std::fs::create_dir_all(&topic_dir).map_err(io(&topic_dir))?;
        for doc in docs {
            let mentions: Vec<&Mention> = corpus
                .mentions
                .iter()
                .filter(|m| m.topic_id == *topic && m.doc_id == doc.doc_id)
                .collect();
            let path = topic_dir.join(format!("{}.xml", doc.doc_id));
            std::fs::write(&path, render_document(doc, &mentions)).map_err(io(&path))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Mention manifest (JSONL)
// ---------------------------------------------------------------------------

pub fn write_manifest<W: Write>(mut out: W, mentions: &[Mention]) -> std::io::Result<()> {
    for m in mentions {
        serde_json::to_writer(&mut out, m)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(input: R) -> Result<Vec<Mention>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::from("<manifest>"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let m: Mention = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            file: PathBuf::from("<manifest>"),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(m);
    }
    Ok(out)
}
