#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::json;

use xamr_core::{ingest_corpus, Corpus, Mention, Span, Split, SplitConfig};
use xamr_llm::cache::prompt_key;
use xamr_llm::prompt::INSTRUCTION_ITEM_6;
use xamr_llm::ClientError;

pub fn fixture_corpus() -> Corpus {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/ecb");
    ingest_corpus(&dir, &SplitConfig::default()).unwrap()
}

/// The "agreement" mention of the HP/EYP fixture document.
pub fn agreement_mention() -> Mention {
    fixture_corpus()
        .mentions
        .into_iter()
        .find(|m| m.doc_id == "1_1ecb" && m.trigger_text() == "agreement")
        .expect("fixture has the agreement mention")
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const COMPANIES: [&str; 6] = ["HP", "IBM", "Oracle", "Cisco", "Dell", "Intel"];
const TARGETS: [&str; 6] = ["EYP", "Sun", "Tandberg", "Perot", "Altera", "Mobileye"];
const VERBS: [(&str, &str); 4] = [
    ("acquired", "acquire.01"),
    ("bought", "buy.01"),
    ("announced", "announce.01"),
    ("signed", "sign.01"),
];

/// 120 mentions over 12 topics and 3 documents per topic.
pub fn dev_small_mentions() -> Vec<Mention> {
    (0..120)
        .map(|i| {
            let topic = (i / 10) as u32 + 1;
            let doc = format!("{topic}_{}ecb", i % 3 + 1);
            let (verb, _) = VERBS[i % VERBS.len()];
            let sentence = format!(
                "{} {verb} {} in deal number {i}.",
                COMPANIES[i % COMPANIES.len()],
                TARGETS[(i / 2) % TARGETS.len()]
            );
            let start = sentence.find(verb).unwrap();
            let trigger = Span::new(start, start + verb.len());
            Mention {
                mention_id: format!("{doc}:{i}"),
                topic_id: topic,
                doc_id: doc,
                sentence_idx: 0,
                doc_text: format!("{sentence} Shares rose."),
                sentence_text: sentence,
                trigger,
                doc_trigger: trigger,
                trigger_lemma: verb.into(),
                split: Split::Dev,
                gold_cluster_id: None,
            }
        })
        .collect()
}

fn marked_word(prompt: &str) -> &str {
    let start = prompt.rfind("**").and_then(|end| prompt[..end].rfind("**").map(|s| (s + 2, end)));
    start.map(|(s, e)| &prompt[s..e]).unwrap_or("")
}

/// Deterministic stand-in for the model. Step A leaves location and time
/// empty; step B supplies them.
pub fn synthetic_responder(prompt: &str) -> Result<String, ClientError> {
    let key = prompt_key(prompt);
    let word = marked_word(prompt);
    let roleset = VERBS
        .iter()
        .find(|(v, _)| *v == word)
        .map(|(_, r)| *r)
        .unwrap_or("do.02");
    let day = u32::from_str_radix(&key[..2], 16).unwrap() % 28 + 1;
    let body = if prompt.contains(INSTRUCTION_ITEM_6) {
        json!({
            "Roleset ID": roleset,
            "ARG-Location": "/wiki/Palo_Alto,_California",
            "ARG-Time": format!("03-{day:02}-2008"),
            "Most Informative Event Description": format!("On March {day}, 2008, an event happened."),
        })
    } else {
        json!({
            "Roleset ID": roleset,
            "ARG-0": "HP",
            "ARG-0 Coreference": "/wiki/Hewlett-Packard",
            "ARG-1": format!("target {}", &key[..6]),
            "ARG-1 Coreference": "",
            "ARG-1 Roleset ID": "",
            "ARG-Location": "",
            "ARG-Time": "",
            "Event Description": format!("On March {day}, 2008, HP (/wiki/Hewlett-Packard) {word} a company."),
        })
    };
    Ok(format!("Here is the annotation:\n{}\n", serde_json::to_string_pretty(&body).unwrap()))
}
