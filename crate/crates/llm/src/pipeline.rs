//! Two-step extraction: prompt A for every mention, then retrieval of
//! informative descriptions from the same topic and prompt B to fill the
//! fields the first step left empty.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use xamr_core::suggest::embed::{EmbeddingProvider, HashingEmbedder};
use xamr_core::{ArgValue, Mention, RolesetId, XAmr};

use crate::cache::ResponseCache;
use crate::client::{DecodingParams, LlmClient};
use crate::describe::{select_candidates, EventDescription};
use crate::prompt::{build_prompt_a, build_prompt_b};
use crate::response::{parse_response_a, parse_response_b, LlmResponse, LlmResponseA, ResponseWarning};

pub const DEFAULT_ANNOTATOR: &str = "gpt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Prompt,
    StepA,
    StepB,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub mention_id: String,
    pub stage: Stage,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionWarning {
    pub mention_id: String,
    pub warning: ResponseWarning,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub client_calls: usize,
    pub cache_hits: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// In input order; failed mentions are absent.
    pub annotations: Vec<XAmr>,
    pub descriptions: Vec<EventDescription>,
    pub failures: Vec<Failure>,
    pub warnings: Vec<MentionWarning>,
    pub stats: PipelineStats,
}

pub struct PipelineOptions {
    /// Worker threads; 0 uses the default pool size, 1 runs sequentially.
    pub threads: usize,
    pub params: DecodingParams,
    pub annotator: String,
    pub cache: Option<ResponseCache>,
    pub embedder: Box<dyn EmbeddingProvider>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            threads: 0,
            params: DecodingParams::default(),
            annotator: DEFAULT_ANNOTATOR.to_string(),
            cache: None,
            embedder: Box::new(HashingEmbedder::default()),
        }
    }
}

struct Caller<'a> {
    client: &'a dyn LlmClient,
    params: &'a DecodingParams,
    cache: Option<&'a ResponseCache>,
    calls: AtomicUsize,
    hits: AtomicUsize,
}

impl Caller<'_> {
    fn send(&self, prompt: &str) -> Result<String, String> {
        if let Some(text) = self.cache.and_then(|c| c.get(prompt)) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(text);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = self.client.send(prompt, self.params).map_err(|e| e.to_string())?;
        if let Some(cache) = self.cache {
            if let Err(e) = cache.put(prompt, &text) {
                log::warn!("cache write failed: {e}");
            }
        }
        Ok(text)
    }
}

fn par_map<T, U, F>(threads: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
        match pool {
            Ok(pool) => return pool.install(|| items.par_iter().map(&f).collect()),
            Err(e) => log::warn!("thread pool unavailable, running sequentially: {e}"),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    items.iter().map(f).collect()
}

/// Fills the `None` fields of `draft` from `fill`.
pub fn merge_missing(draft: &mut LlmResponse, fill: LlmResponse) {
    fn take<T>(slot: &mut Option<T>, other: Option<T>) {
        if slot.is_none() {
            *slot = other;
        }
    }
    take(&mut draft.roleset_id, fill.roleset_id);
    take(&mut draft.arg0, fill.arg0);
    take(&mut draft.arg0_coref, fill.arg0_coref);
    take(&mut draft.arg1, fill.arg1);
    take(&mut draft.arg1_coref, fill.arg1_coref);
    take(&mut draft.arg1_roleset_id, fill.arg1_roleset_id);
    take(&mut draft.arg_location, fill.arg_location);
    if draft.arg_time.is_none_or(|t| t.is_empty()) && fill.arg_time.is_some_and(|t| !t.is_empty()) {
        draft.arg_time = fill.arg_time;
    }
    take(&mut draft.event_description, fill.event_description);
    take(&mut draft.most_informative, fill.most_informative);
    draft.warnings.extend(fill.warnings);
}

/// Links a nested ARG-1 to another mention with that roleset, preferring
/// the same document, then the same topic, in input order.
fn link_nested(x: &mut XAmr, mention: &Mention, step_a: &[(&Mention, &RolesetId)]) {
    let ArgValue::NestedEvent { roleset, linked_mention } = &mut x.arg1 else {
        return;
    };
    let candidates = step_a
        .iter()
        .filter(|(m, r)| m.mention_id != mention.mention_id && *r == roleset && m.topic_id == mention.topic_id);
    let same_doc = candidates.clone().find(|(m, _)| m.doc_id == mention.doc_id);
    *linked_mention = same_doc.or_else(|| candidates.clone().next()).map(|(m, _)| m.mention_id.clone());
}

pub fn run_pipeline(mentions: &[Mention], client: &dyn LlmClient, options: &PipelineOptions) -> PipelineOutput {
    let caller = Caller {
        client,
        params: &options.params,
        cache: options.cache.as_ref(),
        calls: AtomicUsize::new(0),
        hits: AtomicUsize::new(0),
    };

    let step_a: Vec<Result<LlmResponseA, Failure>> = par_map(options.threads, mentions, |m| {
        let fail = |stage, error: String| Failure {
            mention_id: m.mention_id.clone(),
            stage,
            error,
        };
        let prompt = build_prompt_a(m).map_err(|e| fail(Stage::Prompt, e.to_string()))?;
        let text = caller.send(&prompt.render()).map_err(|e| fail(Stage::StepA, e))?;
        parse_response_a(&text).map_err(|e| fail(Stage::StepA, e.to_string()))
    });

    let descriptions: Vec<EventDescription> = mentions
        .iter()
        .zip(&step_a)
        .filter_map(|(m, r)| {
            r.as_ref()
                .ok()
                .map(|a| EventDescription::new(&m.mention_id, m.topic_id, &a.event_description, options.embedder.as_ref()))
        })
        .collect();
    let by_id: HashMap<&str, &EventDescription> = descriptions.iter().map(|d| (d.mention_id.as_str(), d)).collect();

    let jobs: Vec<(&Mention, &LlmResponseA)> = mentions
        .iter()
        .zip(&step_a)
        .filter_map(|(m, r)| r.as_ref().ok().map(|a| (m, a)))
        .collect();
    let step_b: Vec<Result<LlmResponse, Failure>> = par_map(options.threads, &jobs, |(m, a)| {
        let fail = |stage, error: String| Failure {
            mention_id: m.mention_id.clone(),
            stage,
            error,
        };
        let target = by_id[m.mention_id.as_str()];
        let candidates: Vec<&str> = select_candidates(&descriptions, target)
            .into_iter()
            .map(|d| d.text.as_str())
            .collect();
        let prompt = build_prompt_b(m, &a.event_description, &candidates).map_err(|e| fail(Stage::Prompt, e.to_string()))?;
        let text = caller.send(&prompt.render()).map_err(|e| fail(Stage::StepB, e))?;
        let fill = parse_response_b(&text).map_err(|e| fail(Stage::StepB, e.to_string()))?;
        let mut merged = a.fields.clone();
        merge_missing(&mut merged, fill);
        Ok(merged)
    });

    let rolesets: Vec<(&Mention, &RolesetId)> = jobs.iter().map(|(m, a)| (*m, &a.roleset_id)).collect();
    let mut out = PipelineOutput::default();
    let mut b_results = step_b.into_iter();
    for (m, a) in mentions.iter().zip(&step_a) {
        let a = match a {
            Ok(a) => a,
            Err(f) => {
                out.failures.push(f.clone());
                continue;
            }
        };
        match b_results.next().expect("one step-B result per step-A success") {
            Ok(merged) => {
                out.warnings.extend(merged.warnings.iter().map(|w| MentionWarning {
                    mention_id: m.mention_id.clone(),
                    warning: w.clone(),
                }));
                let mut x = merged.to_xamr(&m.mention_id, a.roleset_id.clone(), &options.annotator);
                link_nested(&mut x, m, &rolesets);
                out.annotations.push(x);
            }
            Err(f) => out.failures.push(f),
        }
    }
    out.descriptions = descriptions;
    out.stats = PipelineStats {
        client_calls: caller.calls.into_inner(),
        cache_hits: caller.hits.into_inner(),
    };
    out
}

impl PipelineOutput {
    pub fn failure_fraction(&self, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }
}
