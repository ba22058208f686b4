//! Event descriptions and retrieval of informative candidates.

use std::cmp::Ordering;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use xamr_core::suggest::embed::{cosine, Embedding, EmbeddingProvider};
use xamr_core::time::parse_time;

use crate::prompt::MAX_CANDIDATES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDescription {
    pub mention_id: String,
    pub topic_id: u32,
    pub text: String,
    pub wiki_link_count: usize,
    pub has_complete_date: bool,
    pub embedding: Embedding,
}

impl EventDescription {
    pub fn new(mention_id: &str, topic_id: u32, text: &str, embedder: &dyn EmbeddingProvider) -> Self {
        EventDescription {
            mention_id: mention_id.to_string(),
            topic_id,
            text: text.to_string(),
            wiki_link_count: text.matches("/wiki/").count(),
            has_complete_date: has_complete_date(text),
            embedding: embedder.embed(text),
        }
    }

    pub fn informativeness(&self) -> usize {
        self.wiki_link_count + usize::from(self.has_complete_date)
    }
}

fn date_patterns() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)\b(?:[a-z]{3,9}\.?\s+\d{1,2}(?:st|nd|rd|th)?,?\s+\d{4}|\d{1,2}/\d{1,2}/\d{4}|\d{1,2}-\d{1,2}-\d{4})\b",
        )
        .expect("valid date regex")
    })
}

/// True when the text contains a date with month, day and year.
pub fn has_complete_date(text: &str) -> bool {
    date_patterns().find_iter(text).any(|m| {
        let parsed = parse_time(m.as_str());
        parsed.unparsed.is_none() && parsed.time.is_complete()
    })
}

/// Picks up to three descriptions from the target's topic: informative ones
/// (score at least 1) when any exist, ordered by similarity to the target,
/// then informativeness, then mention id.
pub fn select_candidates<'a>(
    descriptions: &'a [EventDescription],
    target: &EventDescription,
) -> Vec<&'a EventDescription> {
    let pool: Vec<&EventDescription> = descriptions
        .iter()
        .filter(|d| d.topic_id == target.topic_id && d.mention_id != target.mention_id)
        .collect();
    let informative: Vec<&EventDescription> = pool.iter().copied().filter(|d| d.informativeness() >= 1).collect();
    let mut pool = if informative.is_empty() { pool } else { informative };
    let mut scored: Vec<(f64, &EventDescription)> = pool
        .drain(..)
        .map(|d| (cosine(&target.embedding, &d.embedding).unwrap_or(0.0), d))
        .collect();
    scored.sort_by(|(sa, a), (sb, b)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then(b.informativeness().cmp(&a.informativeness()))
            .then_with(|| a.mention_id.cmp(&b.mention_id))
    });
    scored.into_iter().take(MAX_CANDIDATES).map(|(_, d)| d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use xamr_core::suggest::embed::HashingEmbedder;

    fn desc(id: &str, text: &str) -> EventDescription {
        EventDescription::new(id, 1, text, &HashingEmbedder::default())
    }

    #[test]
    fn informativeness_counts_links_and_dates() {
        let d = desc("a", "On November 12, 2007, HP (/wiki/Hewlett-Packard) bought EYP (/wiki/EYP).");
        assert_eq!(d.wiki_link_count, 2);
        assert!(d.has_complete_date);
        assert_eq!(d.informativeness(), 3);
        assert!(!has_complete_date("In July 2008 HP bought EYP"));
        assert!(has_complete_date("on 7/1/2008"));
        assert!(has_complete_date("on 07-01-2008"));
        assert!(!has_complete_date("Month-Day-Year"));
    }

    #[test]
    fn no_other_events_gives_nothing() {
        let t = desc("t", "HP bought EYP");
        assert!(select_candidates(std::slice::from_ref(&t), &t).is_empty());
    }

    #[test]
    fn dated_candidate_wins_a_similarity_tie() {
        let t = desc("t", "HP bought EYP");
        let undated = desc("a", "HP bought EYP /wiki/HP");
        let dated = desc("b", "HP bought EYP /wiki/HP");
        let dated = EventDescription {
            has_complete_date: true,
            ..dated
        };
        let pool = [undated, dated];
        let out = select_candidates(&pool, &t);
        assert_eq!(out[0].mention_id, "b");
        assert_eq!(out[1].mention_id, "a");
    }

    #[test]
    fn other_topics_are_ignored() {
        let t = desc("t", "HP bought EYP");
        let mut other = desc("o", "HP bought EYP on July 1, 2008");
        other.topic_id = 2;
        assert!(select_candidates(&[other], &t).is_empty());
    }
}
