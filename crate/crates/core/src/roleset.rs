//! PropBank roleset identifiers and definitions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RolesetIdError {
    #[error("malformed roleset id {0:?}: missing sense separator")]
    MissingSense(String),
    #[error("malformed roleset id {0:?}: multiple sense separators")]
    MultipleSeparators(String),
    #[error("malformed roleset id {0:?}: invalid lemma")]
    InvalidLemma(String),
    #[error("malformed roleset id {0:?}: sense must be two digits or LV")]
    InvalidSense(String),
}

/// A roleset identifier such as `agree.01`.
///
/// The canonical text form always uses a dot. The AMR dash form
/// (`acquire-01`) is accepted by [`RolesetId::parse`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RolesetId {
    lemma: String,
    sense: String,
}

fn is_sense(s: &str) -> bool {
    s.len() == 2 && (s.bytes().all(|b| b.is_ascii_digit()) || s.eq_ignore_ascii_case("lv"))
}

impl RolesetId {
    pub fn new(lemma: &str, sense: &str) -> Result<Self, RolesetIdError> {
        let text = format!("{lemma}.{sense}");
        let lemma = lemma.to_lowercase();
        if lemma.is_empty() || lemma.contains('.') || lemma.chars().any(char::is_whitespace) {
            return Err(RolesetIdError::InvalidLemma(text));
        }
        if !is_sense(sense) {
            return Err(RolesetIdError::InvalidSense(text));
        }
        Ok(RolesetId {
            lemma,
            sense: sense.to_ascii_uppercase(),
        })
    }

    /// Parses either `lemma.NN` or `lemma-NN`.
    pub fn parse(text: &str) -> Result<Self, RolesetIdError> {
        let text = text.trim();
        let dots = text.matches('.').count();
        let dash_sense = text
            .rfind('-')
            .map(|i| (&text[..i], &text[i + 1..]))
            .filter(|(_, sense)| is_sense(sense));
        match (dots, dash_sense) {
            (0, None) => Err(RolesetIdError::MissingSense(text.to_string())),
            (0, Some((lemma, sense))) => RolesetId::new(lemma, sense),
            (1, None) => {
                let (lemma, sense) = text.split_once('.').expect("one dot");
                RolesetId::new(lemma, sense)
            }
            _ => Err(RolesetIdError::MultipleSeparators(text.to_string())),
        }
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn sense(&self) -> &str {
        &self.sense
    }
}

impl fmt::Display for RolesetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.lemma, self.sense)
    }
}

impl FromStr for RolesetId {
    type Err = RolesetIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RolesetId::parse(s)
    }
}

impl Serialize for RolesetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RolesetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        RolesetId::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A numbered or modifier role of a roleset, e.g. `ARG-0: Agreer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub label: String,
    pub description: String,
}

impl Role {
    /// Builds the label from PropBank's `n` and `f` role attributes.
    ///
    /// `n="0"` gives `ARG-0`; `n="m" f="loc"` gives `ARG-M-LOC`.
    pub fn label_from_attrs(n: &str, f: Option<&str>) -> Option<String> {
        let n = n.trim();
        if n.len() == 1 && matches!(n.as_bytes()[0], b'0'..=b'6') {
            return Some(format!("ARG-{n}"));
        }
        if n.eq_ignore_ascii_case("m") || n.eq_ignore_ascii_case("a") {
            let f = f.map(str::trim).filter(|f| !f.is_empty())?;
            return Some(format!("ARG-M-{}", f.to_ascii_uppercase()));
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roleset {
    pub id: RolesetId,
    pub definition: String,
    pub roles: Vec<Role>,
    pub aliases: Vec<String>,
}

impl Roleset {
    pub fn role(&self, label: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.label == label)
    }
}
