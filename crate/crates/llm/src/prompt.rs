//! Prompt templates for the two extraction steps.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use xamr_core::corpus::{Mention, Span};

pub const INSTRUCTIONS_HEADER: &str = "You are a concise annotator that follows these instructions:";

pub const INSTRUCTION_ITEMS_A: [&str; 5] = [
    "Identify the target event trigger lemma and its correct roleset sense in the given text.",
    "Annotate the document-level ARG-0 and ARG-1 roles using the PropBank website for the roleset definitions.",
    "If the ARG-1 role is an event, identify the head predicate and provide its roleset ID.",
    "Perform within-document and cross-document anaphora resolution of the ARG-0 and ARG-1 using Wikipedia.",
    "Use external resources, such as Wikipedia, to annotate ARG-Loc and ARG-Time.",
];

pub const INSTRUCTION_ITEM_6: &str = "Identify the most informative (having Wikipedia and complete dates) and best matching Event Description from the provided list of descriptions.";

pub const LABELS_HEADER: &str = "Here are the definitions of the keys in the JSON output:";

pub const KEY_ROLESET_ID: &str = "Roleset ID";
pub const KEY_ARG0: &str = "ARG-0";
pub const KEY_ARG0_COREF: &str = "ARG-0 Coreference";
pub const KEY_ARG1: &str = "ARG-1";
pub const KEY_ARG1_COREF: &str = "ARG-1 Coreference";
pub const KEY_ARG1_ROLESET_ID: &str = "ARG-1 Roleset ID";
pub const KEY_ARG_LOCATION: &str = "ARG-Location";
pub const KEY_ARG_TIME: &str = "ARG-Time";
pub const KEY_EVENT_DESCRIPTION: &str = "Event Description";
pub const KEY_MOST_INFORMATIVE: &str = "Most Informative Event Description";

/// JSON Labels A, in output order.
pub const LABELS_A: [(&str, &str); 9] = [
    (KEY_ROLESET_ID, "The PropBank Roleset ID corresponding to the event trigger"),
    (KEY_ARG0, "The text in the Document corresponding to the typical agent"),
    (KEY_ARG0_COREF, "The reference to the ARG-0 in Wikipedia in the format /wiki/Wikipedia_ID"),
    (KEY_ARG1, "The text in the Document corresponding to the typical patient"),
    (KEY_ARG1_COREF, "The reference to the ARG-1 in Wikipedia in the format /wiki/Wikipedia_ID"),
    (KEY_ARG1_ROLESET_ID, "If the Event is Nested, provide the Roleset ID for the head event in ARG-1 clause"),
    (KEY_ARG_LOCATION, "The reference to the event location in Wikipedia"),
    (KEY_ARG_TIME, "The event time in the format of Month-Day-Year in your knowledge of the world or the document"),
    (
        KEY_EVENT_DESCRIPTION,
        "In a single sentence, summarize the event capturing the Roleset_ID and the names and wiki links of the Participants, Location and Time",
    ),
];

pub const LABEL_MOST_INFORMATIVE: &str = "Pick the most informative event description from the Event Description List. Choose by selecting the one that has complete date and Wikipedia links for the arguments and also is coreferent with the target Event. Hint: choose the one starts starts with \"On DATE\"";

pub const INPUT_DOCUMENT: (&str, &str) = ("Target Mention Document", "Entire document with the marked event trigger");
pub const INPUT_SENTENCE: (&str, &str) = ("Target Mention Sentence", "Sentence with the marked event trigger");
pub const INPUT_DESCRIPTION_LIST: (&str, &str) = (
    "Event Description List",
    "Event descriptions of the three most informative and similar events in the corpus.",
);
pub const INPUT_TARGET_DESCRIPTION: (&str, &str) = ("Target Event Description", "Event description of the target event");

pub const TRIGGER_OPEN: &str = "**";
pub const TRIGGER_CLOSE: &str = "**";

/// Maximum number of descriptions listed in the second prompt.
pub const MAX_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("span {start}..{end} is out of bounds for text of length {len}")]
pub struct SpanOutOfBounds {
    pub start: usize,
    pub end: usize,
    pub len: usize,
}

/// Wraps the trigger span in bold markers.
pub fn mark_trigger(text: &str, span: Span) -> Result<String, SpanOutOfBounds> {
    if !span.is_valid_in(text) {
        return Err(SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: text.len(),
        });
    }
    let mut out = String::with_capacity(text.len() + TRIGGER_OPEN.len() + TRIGGER_CLOSE.len());
    out.push_str(&text[..span.start]);
    out.push_str(TRIGGER_OPEN);
    out.push_str(&text[span.start..span.end]);
    out.push_str(TRIGGER_CLOSE);
    out.push_str(&text[span.end..]);
    Ok(out)
}

fn instructions(with_item_6: bool) -> String {
    let mut out = String::from(INSTRUCTIONS_HEADER);
    out.push('\n');
    for (i, item) in INSTRUCTION_ITEMS_A.iter().enumerate() {
        out.push_str(&format!("{}. {item}\n", i + 1));
    }
    if with_item_6 {
        out.push_str(&format!("6. {INSTRUCTION_ITEM_6}\n"));
    }
    out
}

fn labels(with_most_informative: bool) -> String {
    let mut out = String::from(LABELS_HEADER);
    out.push('\n');
    for (key, def) in LABELS_A {
        out.push_str(&format!("{key}: {def}\n"));
    }
    if with_most_informative {
        out.push_str(&format!("{KEY_MOST_INFORMATIVE}: {LABEL_MOST_INFORMATIVE}\n"));
    }
    out
}

fn input_block((name, description): (&str, &str), value: &str) -> String {
    format!("{name}: {description}\n{value}\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptA {
    pub instructions: String,
    pub labels: String,
    pub marked_document: String,
    pub marked_sentence: String,
}

impl PromptA {
    pub fn render(&self) -> String {
        [
            self.instructions.as_str(),
            self.labels.as_str(),
            &input_block(INPUT_DOCUMENT, &self.marked_document),
            &input_block(INPUT_SENTENCE, &self.marked_sentence),
        ]
        .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptB {
    pub instructions: String,
    pub labels: String,
    pub descriptions: Vec<String>,
    pub target_description: String,
    pub marked_sentence: String,
}

impl PromptB {
    pub fn render(&self) -> String {
        let list = serde_json::to_string_pretty(&self.descriptions).expect("strings serialize");
        [
            self.instructions.as_str(),
            self.labels.as_str(),
            &input_block(INPUT_DESCRIPTION_LIST, &list),
            &input_block(INPUT_TARGET_DESCRIPTION, &self.target_description),
            &input_block(INPUT_SENTENCE, &self.marked_sentence),
        ]
        .join("\n")
    }
}

pub fn build_prompt_a(mention: &Mention) -> Result<PromptA, SpanOutOfBounds> {
    Ok(PromptA {
        instructions: instructions(false),
        labels: labels(false),
        marked_document: mark_trigger(&mention.doc_text, mention.doc_trigger)?,
        marked_sentence: mark_trigger(&mention.sentence_text, mention.trigger)?,
    })
}

/// Second-step prompt. At most [`MAX_CANDIDATES`] descriptions are listed.
pub fn build_prompt_b(
    mention: &Mention,
    target_description: &str,
    candidates: &[&str],
) -> Result<PromptB, SpanOutOfBounds> {
    Ok(PromptB {
        instructions: instructions(true),
        labels: labels(true),
        descriptions: candidates.iter().take(MAX_CANDIDATES).map(|s| s.to_string()).collect(),
        target_description: target_description.to_string(),
        marked_sentence: mark_trigger(&mention.sentence_text, mention.trigger)?,
    })
}
