//! Parsing of the structured model output.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use xamr_core::time::parse_time;
use xamr_core::xamr::is_valid_wiki;
use xamr_core::{ArgValue, EntityRef, RolesetId, TimeRef, XAmr};

use crate::prompt::*;

pub const REQUIRED_KEYS_A: [&str; 4] = [KEY_ROLESET_ID, KEY_ARG0, KEY_ARG1, KEY_EVENT_DESCRIPTION];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponseError {
    #[error("no JSON object found in the response")]
    NoJsonFound,
    #[error("missing required key {0:?}")]
    MissingRequiredKey(String),
    #[error("invalid value for {key:?}: {message}")]
    InvalidValue { key: String, message: String },
}

/// Problems that do not invalidate a response but are worth reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ResponseWarning {
    WikiFormat { key: String, value: String },
    UnparsedTime { value: String },
    BadRolesetId { key: String, value: String },
}

/// Fields of a first-step response. Empty strings and nulls are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LlmResponse {
    pub roleset_id: Option<RolesetId>,
    pub arg0: Option<String>,
    pub arg0_coref: Option<String>,
    pub arg1: Option<String>,
    pub arg1_coref: Option<String>,
    pub arg1_roleset_id: Option<RolesetId>,
    pub arg_location: Option<String>,
    pub arg_time: Option<TimeRef>,
    pub event_description: Option<String>,
    pub most_informative: Option<String>,
    #[serde(default)]
    pub warnings: Vec<ResponseWarning>,
}

/// First step output: the roleset and description are always present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponseA {
    pub roleset_id: RolesetId,
    pub fields: LlmResponse,
    pub event_description: String,
}

/// Finds the first well-formed JSON object embedded in `text`.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn text_field(map: &Map<String, Value>, key: &str) -> Result<Option<String>, ResponseError> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => {
            let s = s.trim();
            Ok((!s.is_empty()).then(|| s.to_string()))
        }
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(Value::Array(items)) => {
            let parts: Vec<String> = items
                .iter()
                .filter_map(|v| v.as_str().map(str::trim).filter(|s| !s.is_empty()).map(str::to_string))
                .collect();
            Ok((!parts.is_empty()).then(|| parts.join("; ")))
        }
        Some(other) => Err(ResponseError::InvalidValue {
            key: key.to_string(),
            message: format!("expected a string, found {other}"),
        }),
    }
}

fn is_placeholder(value: &str) -> bool {
    let v = value.trim().to_ascii_lowercase();
    matches!(v.as_str(), "n/a" | "na" | "none" | "null" | "unknown" | "-")
}

fn wiki_field(
    map: &Map<String, Value>,
    key: &str,
    warnings: &mut Vec<ResponseWarning>,
) -> Result<Option<String>, ResponseError> {
    let Some(value) = text_field(map, key)? else {
        return Ok(None);
    };
    if is_placeholder(&value) {
        return Ok(None);
    }
    let link = value
        .find("/wiki/")
        .map(|i| value[i..].split_whitespace().next().unwrap_or_default().to_string())
        .unwrap_or_else(|| value.clone());
    if is_valid_wiki(&link) {
        Ok(Some(link))
    } else {
        warnings.push(ResponseWarning::WikiFormat {
            key: key.to_string(),
            value,
        });
        Ok(None)
    }
}

fn roleset_field(
    map: &Map<String, Value>,
    key: &str,
    warnings: &mut Vec<ResponseWarning>,
) -> Result<Option<RolesetId>, ResponseError> {
    let Some(value) = text_field(map, key)? else {
        return Ok(None);
    };
    if is_placeholder(&value) {
        return Ok(None);
    }
    match RolesetId::parse(&value) {
        Ok(id) => Ok(Some(id)),
        Err(_) => {
            warnings.push(ResponseWarning::BadRolesetId {
                key: key.to_string(),
                value,
            });
            Ok(None)
        }
    }
}

/// Parses every known key; all are optional here.
pub fn parse_fields(text: &str) -> Result<(LlmResponse, Map<String, Value>), ResponseError> {
    let map = extract_json_object(text).ok_or(ResponseError::NoJsonFound)?;
    let mut warnings = Vec::new();
    let roleset_id = roleset_field(&map, KEY_ROLESET_ID, &mut warnings)?;
    let arg0 = text_field(&map, KEY_ARG0)?.filter(|v| !is_placeholder(v));
    let arg0_coref = wiki_field(&map, KEY_ARG0_COREF, &mut warnings)?;
    let arg1 = text_field(&map, KEY_ARG1)?.filter(|v| !is_placeholder(v));
    let arg1_coref = wiki_field(&map, KEY_ARG1_COREF, &mut warnings)?;
    let arg1_roleset_id = roleset_field(&map, KEY_ARG1_ROLESET_ID, &mut warnings)?;
    let arg_location = text_field(&map, KEY_ARG_LOCATION)?.filter(|v| !is_placeholder(v));
    let arg_time = match text_field(&map, KEY_ARG_TIME)? {
        None => None,
        Some(raw) => {
            let parsed = parse_time(&raw);
            if let Some(u) = parsed.unparsed {
                warnings.push(ResponseWarning::UnparsedTime { value: u });
            }
            Some(parsed.time)
        }
    };
    let fields = LlmResponse {
        roleset_id,
        arg0,
        arg0_coref,
        arg1,
        arg1_coref,
        arg1_roleset_id,
        arg_location,
        arg_time,
        event_description: text_field(&map, KEY_EVENT_DESCRIPTION)?,
        most_informative: text_field(&map, KEY_MOST_INFORMATIVE)?,
        warnings,
    };
    Ok((fields, map))
}

/// Parses a first-step response. The required keys must be present; a
/// roleset id and a description must be usable.
pub fn parse_response_a(text: &str) -> Result<LlmResponseA, ResponseError> {
    let (fields, map) = parse_fields(text)?;
    for key in REQUIRED_KEYS_A {
        if !map.contains_key(key) {
            return Err(ResponseError::MissingRequiredKey(key.to_string()));
        }
    }
    let roleset_id = fields.roleset_id.clone().ok_or_else(|| ResponseError::InvalidValue {
        key: KEY_ROLESET_ID.to_string(),
        message: format!("unusable roleset id {}", map[KEY_ROLESET_ID]),
    })?;
    let event_description = fields
        .event_description
        .clone()
        .ok_or_else(|| ResponseError::InvalidValue {
            key: KEY_EVENT_DESCRIPTION.to_string(),
            message: "empty description".into(),
        })?;
    Ok(LlmResponseA {
        roleset_id,
        fields,
        event_description,
    })
}

/// Parses a second-step response. Every key is optional.
pub fn parse_response_b(text: &str) -> Result<LlmResponse, ResponseError> {
    parse_fields(text).map(|(fields, _)| fields)
}

/// Renders a response in the key order of the labels. Absent fields are
/// rendered as empty strings.
pub fn render_response(r: &LlmResponse) -> String {
    let s = |v: &Option<String>| Value::String(v.clone().unwrap_or_default());
    let id = |v: &Option<RolesetId>| Value::String(v.as_ref().map(|i| i.to_string()).unwrap_or_default());
    let mut map = Map::new();
    map.insert(KEY_ROLESET_ID.into(), id(&r.roleset_id));
    map.insert(KEY_ARG0.into(), s(&r.arg0));
    map.insert(KEY_ARG0_COREF.into(), s(&r.arg0_coref));
    map.insert(KEY_ARG1.into(), s(&r.arg1));
    map.insert(KEY_ARG1_COREF.into(), s(&r.arg1_coref));
    map.insert(KEY_ARG1_ROLESET_ID.into(), id(&r.arg1_roleset_id));
    map.insert(KEY_ARG_LOCATION.into(), s(&r.arg_location));
    map.insert(
        KEY_ARG_TIME.into(),
        Value::String(r.arg_time.map(|t| t.canonical()).unwrap_or_default()),
    );
    map.insert(KEY_EVENT_DESCRIPTION.into(), s(&r.event_description));
    if r.most_informative.is_some() {
        map.insert(KEY_MOST_INFORMATIVE.into(), s(&r.most_informative));
    }
    serde_json::to_string_pretty(&Value::Object(map)).expect("map serializes")
}

fn entity(surface: Option<&str>, wiki: Option<&str>) -> ArgValue {
    match (surface, wiki) {
        (None, None) => ArgValue::Empty,
        (surface, Some(link)) => {
            let fallback = link.trim_start_matches("/wiki/").replace('_', " ");
            let surface = surface.map(str::to_string).unwrap_or(fallback);
            EntityRef::with_wiki(&surface, link)
                .map(ArgValue::Entity)
                .unwrap_or_else(|_| ArgValue::entity(&surface))
        }
        (Some(surface), None) => ArgValue::entity(surface),
    }
}

impl LlmResponse {
    pub fn arg0_value(&self) -> ArgValue {
        entity(self.arg0.as_deref(), self.arg0_coref.as_deref())
    }

    /// A nested roleset takes precedence over the ARG-1 text.
    pub fn arg1_value(&self) -> ArgValue {
        match &self.arg1_roleset_id {
            Some(id) => ArgValue::NestedEvent {
                roleset: id.clone(),
                linked_mention: None,
            },
            None => entity(self.arg1.as_deref(), self.arg1_coref.as_deref()),
        }
    }

    /// The location may be a wiki link or plain text.
    pub fn loc_value(&self) -> ArgValue {
        match self.arg_location.as_deref() {
            None => ArgValue::Empty,
            Some(loc) if is_valid_wiki(loc) => entity(None, Some(loc)),
            Some(loc) => match loc.find("/wiki/") {
                Some(i) if is_valid_wiki(loc[i..].split_whitespace().next().unwrap_or_default()) => {
                    let link = loc[i..].split_whitespace().next().unwrap_or_default();
                    let surface = loc[..i].trim().trim_end_matches(['(', ',', ':']).trim();
                    entity((!surface.is_empty()).then_some(surface), Some(link))
                }
                _ => ArgValue::entity(loc),
            },
        }
    }

    pub fn time_value(&self) -> Option<TimeRef> {
        self.arg_time.filter(|t| !t.is_empty())
    }

    pub fn to_xamr(&self, mention_id: &str, roleset: RolesetId, annotator: &str) -> XAmr {
        let mut x = XAmr::new(mention_id, roleset, annotator);
        x.arg0 = self.arg0_value();
        x.arg1 = self.arg1_value();
        x.arg_loc = self.loc_value();
        x.arg_time = self.time_value();
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
  "Roleset ID": "agree.01",
  "ARG-0": "HP",
  "ARG-0 Coreference": "/wiki/Hewlett-Packard",
  "ARG-1": "to acquire EYP Mission Critical Facilities Inc.",
  "ARG-1 Coreference": "",
  "ARG-1 Roleset ID": "acquire.01",
  "ARG-Location": "/wiki/Palo_Alto,_California",
  "ARG-Time": "11-12-2007",
  "Event Description": "On November 12, 2007, HP (/wiki/Hewlett-Packard) agreed to acquire EYP."
}"#;

    #[test]
    fn parses_full_object() {
        let r = parse_response_a(FULL).unwrap();
        assert_eq!(r.roleset_id.to_string(), "agree.01");
        assert_eq!(r.fields.arg0.as_deref(), Some("HP"));
        assert_eq!(r.fields.arg0_coref.as_deref(), Some("/wiki/Hewlett-Packard"));
        assert_eq!(r.fields.arg1_coref, None);
        assert_eq!(r.fields.arg1_roleset_id.as_ref().unwrap().to_string(), "acquire.01");
        assert_eq!(r.fields.arg_time.unwrap().canonical(), "11-12-2007");
        assert!(r.fields.warnings.is_empty());
        let x = r.fields.to_xamr("m1", r.roleset_id.clone(), "gpt");
        assert!(x.has_nested_arg1());
        assert_eq!(x.arg_loc.as_entity().unwrap().surface, "Palo Alto, California");
    }

    #[test]
    fn finds_json_inside_prose() {
        let wrapped = format!("Sure! Here is the annotation {{not json}}:\n```json\n{FULL}\n```\nDone.");
        assert_eq!(parse_response_a(&wrapped).unwrap(), parse_response_a(FULL).unwrap());
    }

    #[test]
    fn missing_keys_and_no_json() {
        assert_eq!(parse_response_a("no braces here"), Err(ResponseError::NoJsonFound));
        let partial = r#"{"Roleset ID": "agree.01", "ARG-0": "HP", "Event Description": "x"}"#;
        assert_eq!(
            parse_response_a(partial),
            Err(ResponseError::MissingRequiredKey("ARG-1".into()))
        );
    }

    #[test]
    fn placeholder_time_is_flagged() {
        let text = FULL.replace("11-12-2007", "Month-Day-Year");
        let r = parse_response_a(&text).unwrap();
        assert!(r.fields.arg_time.unwrap().is_empty());
        assert_eq!(
            r.fields.warnings,
            vec![ResponseWarning::UnparsedTime {
                value: "Month-Day-Year".into()
            }]
        );
        assert_eq!(r.fields.time_value(), None);
    }

    #[test]
    fn bad_wiki_is_dropped_with_warning() {
        let text = FULL.replace("/wiki/Hewlett-Packard\",", "Hewlett-Packard\",");
        let r = parse_response_a(&text).unwrap();
        assert_eq!(r.fields.arg0_coref, None);
        assert!(matches!(r.fields.warnings[0], ResponseWarning::WikiFormat { .. }));
    }

    #[test]
    fn render_round_trips() {
        let r = parse_response_a(FULL).unwrap();
        let again = parse_response_a(&render_response(&r.fields)).unwrap();
        assert_eq!(again, r);
    }
}
