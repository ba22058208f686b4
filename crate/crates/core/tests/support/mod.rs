//! Random stores, scripted sessions and brute-force oracles shared by the
//! property tests.
#![allow(dead_code)]

use std::cmp::Ordering;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use xamr_core::corpus::{Mention, Span, Split};
use xamr_core::suggest::decision::{apply_decision, Action, Decision};
use xamr_core::suggest::embed::{Embedding, EmbeddingProvider, HashingEmbedder};
use xamr_core::suggest::store::{ArgumentStore, Slot, SlotValue, StoreScope};
use xamr_core::{ArgValue, EntityRef, RolesetId, TimeRef};

const WORDS: &[&str] = &[
    "hp", "acquired", "eyp", "mission", "critical", "facilities", "agreement", "signed", "deal", "quake",
    "napa", "struck", "california", "sunday", "company", "purchase", "announced", "billion", "july",
    "shares", "court", "ruled", "police", "arrested", "fire", "killed", "storm", "election", "won",
];

const ENTITIES: &[&str] = &[
    "HP", "Hewlett-Packard", "EYP", "EYP MCF Inc.", "Napa", "California", "the police", "the court",
    "Apple", "Intel", "AMD", "the storm", "voters", "Oracle", "Sun",
];

pub fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(0..12);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

pub fn value_for(slot: Slot, rng: &mut ChaCha8Rng) -> SlotValue {
    match slot {
        Slot::Roleset => {
            let lemma = ["agree", "acquire", "buy", "strike", "announce"].choose(rng).unwrap();
            SlotValue::Roleset(RolesetId::new(lemma, &format!("{:02}", rng.random_range(1..4))).unwrap())
        }
        Slot::Time => {
            let month = rng.random_bool(0.8).then(|| rng.random_range(1..=12));
            let day = month.filter(|_| rng.random_bool(0.5)).map(|_| rng.random_range(1..=28));
            let year = Some(rng.random_range(2005..=2012));
            SlotValue::Time(TimeRef::new(month, day, year).unwrap())
        }
        Slot::Arg1 if rng.random_bool(0.2) => SlotValue::Arg(ArgValue::NestedEvent {
            roleset: RolesetId::new("acquire", "01").unwrap(),
            linked_mention: None,
        }),
        _ => {
            let surface = *ENTITIES.choose(rng).unwrap();
            let entity = if rng.random_bool(0.3) {
                EntityRef::with_wiki(surface, &format!("/wiki/{}", surface.replace(' ', "_"))).unwrap()
            } else {
                EntityRef::new(surface)
            };
            SlotValue::Arg(ArgValue::Entity(entity))
        }
    }
}

pub fn random_store(rng: &mut ChaCha8Rng, size: usize, scope: StoreScope) -> ArgumentStore {
    let embedder = HashingEmbedder::default();
    let mut store = ArgumentStore::new(scope);
    for i in 0..size {
        let slot = *Slot::ALL.choose(rng).unwrap();
        let value = value_for(slot, rng);
        let topic = rng.random_range(1..=3);
        store
            .add(slot, value, embedder.embed(&sentence(rng)), &format!("m{i}"), topic)
            .unwrap();
    }
    store
}

/// Cosine computed directly from the definition.
pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Exhaustive sort of every in-scope entry by (score desc, ordinal asc,
/// value asc). Returns (ordinal, score) pairs.
pub fn oracle_rank(store: &ArgumentStore, slot: Slot, target: &Embedding, topic: u32, k: usize) -> Vec<(u64, f64, String)> {
    let mut all: Vec<(u64, f64, String)> = Vec::new();
    for e in store.entries() {
        if e.slot != slot {
            continue;
        }
        if store.scope() == StoreScope::PerTopic && e.topic_id != topic {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for emb in &e.embeddings {
            let c = oracle_cosine(emb.as_slice(), target.as_slice());
            if c > best {
                best = c;
            }
        }
        all.push((e.ordinal, best, e.value.sort_key()));
    }
    all.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0).then_with(|| a.2.cmp(&b.2)),
        other => other,
    });
    all.truncate(k);
    all
}

pub fn synthetic_mentions(n: usize, topics: u32, rng: &mut ChaCha8Rng) -> Vec<Mention> {
    (0..n)
        .map(|i| {
            let mut words: Vec<String> = (0..rng.random_range(2..10))
                .map(|_| WORDS.choose(rng).unwrap().to_string())
                .collect();
            words.insert(0, "acquired".into());
            let text = words.join(" ");
            let topic = (i as u32 % topics) + 1;
            Mention {
                mention_id: format!("{topic}_{}ecb:{i}", i % 4 + 1),
                topic_id: topic,
                doc_id: format!("{topic}_{}ecb", i % 4 + 1),
                sentence_idx: 0,
                doc_text: text.clone(),
                sentence_text: text,
                trigger: Span::new(0, 8),
                doc_trigger: Span::new(0, 8),
                trigger_lemma: "acquire".into(),
                split: Split::Train,
                gold_cluster_id: None,
            }
        })
        .collect()
}

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 3, 1, 9, 0, 0).unwrap()
}

/// Simulates an interactive session: for each step, the top suggestion is
/// served and the annotator picks a random legal action. Returns the log and
/// the live store.
pub fn scripted_session(
    rng: &mut ChaCha8Rng,
    mentions: &[Mention],
    steps: usize,
    scope: StoreScope,
) -> (Vec<Decision>, ArgumentStore) {
    let embedder = HashingEmbedder::default();
    let mut store = ArgumentStore::new(scope);
    let mut log = Vec::new();
    for step in 0..steps {
        let m = mentions.choose(rng).unwrap();
        let slot = *Slot::ALL.choose(rng).unwrap();
        let target = embedder.embed(&m.sentence_text);
        let top = store.rank(slot, &target, m.topic_id, 10).into_iter().next().map(|s| s.value);
        let action = match &top {
            None => Action::RejectCreate,
            Some(_) => *Action::ALL.choose(rng).unwrap(),
        };
        let final_value = match action {
            Action::Accept => top.clone().unwrap(),
            _ if slot != Slot::Roleset && slot != Slot::Time && rng.random_bool(0.05) => SlotValue::Arg(ArgValue::Empty),
            _ => value_for(slot, rng),
        };
        let d = Decision {
            mention_id: m.mention_id.clone(),
            slot,
            suggested: top,
            action,
            final_value,
            annotator: ["ann1", "ann2"].choose(rng).unwrap().to_string(),
            ts: t0() + Duration::milliseconds(step as i64 * 1500 + rng.random_range(0..1000)),
        };
        apply_decision(&mut store, &d, &target, m.topic_id).unwrap();
        log.push(d);
    }
    (log, store)
}
