//! REST handlers.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use xamr_core::metrics::{acceptance_ratios, corpus_stats, AcceptanceReport, CorpusStatsReport};
use xamr_core::suggest::decision::{value_to_json, DecisionRecord};
use xamr_core::suggest::{default_selection, Decision, Slot, SlotValue};
use xamr_core::xamr::write_annotations;
use xamr_core::{Mention, Roleset, RolesetId, Split};
use xamr_llm::mark_trigger;

use crate::state::{CommitError, Live, Service, StoreDigest};

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<CommitError> for ApiError {
    fn from(e: CommitError) -> Self {
        let status = match &e {
            CommitError::UnknownAnnotator(_) => StatusCode::BAD_REQUEST,
            CommitError::Duplicate { .. } => StatusCode::CONFLICT,
            CommitError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            CommitError::Log(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;
type AppState = State<Arc<Service>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Store,
    Frames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub value: Value,
    /// Absent for frame-search fallbacks.
    pub score: Option<f64>,
    pub rank: usize,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotView {
    pub slot: Slot,
    pub suggestions: Vec<SuggestionView>,
    pub default: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionView {
    pub mention: Mention,
    pub marked_document: String,
    pub marked_sentence: String,
    pub phase: u8,
    pub annotator: Option<String>,
    pub slots: Vec<SlotView>,
    pub decided: Vec<Slot>,
    pub store_version: u64,
}

fn parse_split(split: Option<&str>) -> ApiResult<Option<Split>> {
    split
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Split>().map_err(ApiError::bad_request))
        .transpose()
}

fn parse_phase(phase: Option<u8>) -> ApiResult<Option<u8>> {
    match phase {
        None | Some(1) | Some(2) => Ok(phase),
        Some(p) => Err(ApiError::bad_request(format!("phase must be 1 or 2, not {p}"))),
    }
}

fn pending_slots(live: &Live, m: &Mention, annotator: &str, phase: u8) -> Vec<Slot> {
    let slots: &[Slot] = if phase == 1 { &[Slot::Roleset] } else { &Slot::ARGUMENTS };
    slots
        .iter()
        .copied()
        .filter(|&s| !live.is_decided(&m.mention_id, s, annotator))
        .collect()
}

/// Phase 2 is only reachable once the roleset is decided.
fn current_phase(live: &Live, m: &Mention, annotator: &str) -> Option<u8> {
    if !live.is_decided(&m.mention_id, Slot::Roleset, annotator) {
        Some(1)
    } else if !pending_slots(live, m, annotator, 2).is_empty() {
        Some(2)
    } else {
        None
    }
}

fn suggestions(service: &Service, live: &Live, m: &Mention, slot: Slot) -> Vec<SuggestionView> {
    let k = service.config.k;
    let target = service.embedding(&m.mention_id).expect("served mentions are indexed");
    let ranked = live.store.rank(slot, target, m.topic_id, k);
    let mut out: Vec<SuggestionView> = ranked
        .iter()
        .map(|s| SuggestionView {
            value: value_to_json(slot, &s.value),
            score: Some(s.score),
            rank: s.rank,
            source: Source::Store,
        })
        .collect();
    if slot == Slot::Roleset && out.len() < k {
        let taken: Vec<&SlotValue> = ranked.iter().map(|s| &s.value).collect();
        for rs in service.frames.search(&m.trigger_lemma, k) {
            if out.len() >= k {
                break;
            }
            let value = SlotValue::Roleset(rs.id.clone());
            if taken.contains(&&value) {
                continue;
            }
            out.push(SuggestionView {
                value: value_to_json(slot, &value),
                score: None,
                rank: out.len() + 1,
                source: Source::Frames,
            });
        }
    }
    out
}

fn mention_view(service: &Service, live: &Live, m: &Mention, annotator: Option<&str>, phase: u8) -> MentionView {
    let slots = match annotator {
        Some(a) => pending_slots(live, m, a, phase),
        None if phase == 1 => vec![Slot::Roleset],
        None => Slot::ARGUMENTS.to_vec(),
    };
    let slots = slots
        .into_iter()
        .map(|slot| {
            let suggestions = suggestions(service, live, m, slot);
            let default = match slot {
                Slot::Roleset => suggestions.first().map_or(Value::Null, |s| s.value.clone()),
                _ => {
                    let ranked = live.store.rank(slot, service.embedding(&m.mention_id).expect("indexed"), m.topic_id, 1);
                    default_selection(&ranked).map_or(Value::Null, |v| value_to_json(slot, v))
                }
            };
            SlotView {
                slot,
                suggestions,
                default,
            }
        })
        .collect();
    let decided = annotator.map_or_else(Vec::new, |a| {
        Slot::ALL
            .into_iter()
            .filter(|&s| live.is_decided(&m.mention_id, s, a))
            .collect()
    });
    MentionView {
        mention: m.clone(),
        marked_document: mark_trigger(&m.doc_text, m.doc_trigger).unwrap_or_else(|_| m.doc_text.clone()),
        marked_sentence: mark_trigger(&m.sentence_text, m.trigger).unwrap_or_else(|_| m.sentence_text.clone()),
        phase,
        annotator: annotator.map(str::to_string),
        slots,
        decided,
        store_version: live.version(),
    }
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub annotator: Option<String>,
    pub split: Option<String>,
    pub phase: Option<u8>,
}

pub async fn session_next(State(service): AppState, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    let annotator = q.annotator.ok_or_else(|| ApiError::bad_request("annotator is required"))?;
    if !service.is_annotator(&annotator) {
        return Err(ApiError::bad_request(format!("unknown annotator {annotator:?}")));
    }
    let split = parse_split(q.split.as_deref())?;
    let wanted = parse_phase(q.phase)?;
    let live = service.live();
    let phase_of = |m: &Mention| current_phase(&live, m, &annotator);
    let next = match wanted {
        Some(p) => service.queue_for(&annotator, split).find(|m| phase_of(m) == Some(p)).map(|m| (m, p)),
        None if service.config.interleave_phases => service
            .queue_for(&annotator, split)
            .find_map(|m| phase_of(m).map(|p| (m, p))),
        None => service
            .queue_for(&annotator, split)
            .find(|m| phase_of(m) == Some(1))
            .map(|m| (m, 1))
            .or_else(|| service.queue_for(&annotator, split).find(|m| phase_of(m) == Some(2)).map(|m| (m, 2))),
    };
    Ok(match next {
        Some((m, phase)) => Json(mention_view(&service, &live, m, Some(&annotator), phase)).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

#[derive(Debug, Deserialize)]
pub struct MentionQuery {
    pub annotator: Option<String>,
    pub phase: Option<u8>,
}

pub async fn get_mention(
    State(service): AppState,
    Path(id): Path<String>,
    Query(q): Query<MentionQuery>,
) -> ApiResult<Json<MentionView>> {
    let m = service
        .mention(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown mention {id:?}")))?;
    if let Some(a) = q.annotator.as_deref().filter(|a| !service.is_annotator(a)) {
        return Err(ApiError::bad_request(format!("unknown annotator {a:?}")));
    }
    let live = service.live();
    let phase = match (parse_phase(q.phase)?, q.annotator.as_deref()) {
        (Some(p), _) => p,
        (None, Some(a)) => current_phase(&live, m, a).unwrap_or(2),
        (None, None) => 1,
    };
    Ok(Json(mention_view(&service, &live, m, q.annotator.as_deref(), phase)))
}

/// Body of a decision request. The server assigns the timestamp.
#[derive(Debug, Deserialize)]
pub struct DecisionBody {
    pub mention_id: String,
    pub slot: Slot,
    #[serde(default)]
    pub suggested: Value,
    pub action: xamr_core::suggest::Action,
    #[serde(rename = "final", default)]
    pub final_value: Value,
    pub annotator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionReply {
    pub version: u64,
    pub ordinal: Option<u64>,
}

pub async fn post_decision(State(service): AppState, body: Bytes) -> ApiResult<Response> {
    let body: DecisionBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed decision: {e}")))?;
    let record = DecisionRecord {
        mention_id: body.mention_id,
        slot: body.slot,
        suggested: body.suggested,
        action: body.action,
        final_value: body.final_value,
        annotator: body.annotator,
        ts: Utc::now().to_rfc3339(),
    };
    let decision = Decision::try_from(&record).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let (version, ordinal) = tokio::task::spawn_blocking(move || service.commit(decision))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((StatusCode::CREATED, Json(DecisionReply { version, ordinal })).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SearchQuery {
    pub q: Option<String>,
    pub k: Option<usize>,
}

pub async fn frames_search(State(service): AppState, Query(q): Query<SearchQuery>) -> ApiResult<Json<Vec<Roleset>>> {
    let k = q.k.unwrap_or(service.config.k);
    if k == 0 {
        return Err(ApiError::bad_request("k must be at least 1"));
    }
    let found = service.frames.search(q.q.as_deref().unwrap_or(""), k);
    Ok(Json(found.into_iter().cloned().collect()))
}

pub async fn frames_get(State(service): AppState, Path(id): Path<String>) -> ApiResult<Json<Roleset>> {
    let parsed = RolesetId::parse(&id).map_err(|_| ApiError::not_found(format!("unknown roleset {id:?}")))?;
    service
        .frames
        .get(&parsed)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown roleset {id:?}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsView {
    pub version: u64,
    pub decisions: usize,
    pub corpus: CorpusStatsReport,
    pub acceptance: AcceptanceReport,
}

pub fn stats_of(service: &Service) -> StatsView {
    let live = service.live();
    StatsView {
        version: live.version(),
        decisions: live.log.len(),
        corpus: corpus_stats(&service.corpus, &live.annotations()),
        acceptance: acceptance_ratios(&live.log),
    }
}

pub async fn stats(State(service): AppState) -> Json<StatsView> {
    Json(stats_of(&service))
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    pub annotator: Option<String>,
}

pub async fn export(State(service): AppState, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let mut annotations = service.live().annotations();
    if let Some(a) = q.annotator.as_deref() {
        annotations.retain(|x| x.annotator_id == a);
    }
    let mut out = Vec::new();
    write_annotations(&mut out, &annotations).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], out).into_response())
}

pub async fn store_digest(State(service): AppState) -> Json<StoreDigest> {
    Json(service.digest())
}

pub async fn healthz() -> &'static str {
    "ok"
}
