//! Acceptance ratios, inter-annotator agreement, GPT accuracy and corpus
//! statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Split};
use crate::suggest::decision::{Action, Decision};
use crate::suggest::store::Slot;
use crate::xamr::{time_overlap, XAmr};

type StatFn = fn(&SplitStats) -> usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("the two annotation sets share no mentions")]
    EmptyIntersection,
    #[error("prediction and gold mention sets differ: {missing_in_pred} missing from predictions, {missing_in_gold} missing from gold")]
    MentionMismatch {
        missing_in_pred: usize,
        missing_in_gold: usize,
    },
}

/// Column label for a pooled acceptance row over all argument slots.
pub const POOLED_ARG: &str = "ARG";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub accept: usize,
    pub modify: usize,
    pub reject_create: usize,
    /// Decisions made without a served suggestion; excluded from rates.
    pub unsuggested: usize,
}

impl ActionCounts {
    pub fn total(&self) -> usize {
        self.accept + self.modify + self.reject_create
    }

    fn record(&mut self, d: &Decision) {
        if d.suggested.is_none() {
            self.unsuggested += 1;
            return;
        }
        match d.action {
            Action::Accept => self.accept += 1,
            Action::Modify => self.modify += 1,
            Action::RejectCreate => self.reject_create += 1,
        }
    }

    fn rate(&self, n: usize) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| n as f64 / total as f64)
    }

    pub fn accept_rate(&self) -> Option<f64> {
        self.rate(self.accept)
    }

    pub fn modify_rate(&self) -> Option<f64> {
        self.rate(self.modify)
    }

    pub fn reject_rate(&self) -> Option<f64> {
        self.rate(self.reject_create)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRow {
    pub annotator: String,
    pub slot: String,
    pub counts: ActionCounts,
    /// `None` when no suggested decisions were made for this cell.
    pub accept_rate: Option<f64>,
    pub modify_rate: Option<f64>,
    pub reject_rate: Option<f64>,
    pub pooled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub rows: Vec<AcceptanceRow>,
}

impl AcceptanceReport {
    pub fn row(&self, annotator: &str, slot: &str) -> Option<&AcceptanceRow> {
        self.rows.iter().find(|r| r.annotator == annotator && r.slot == slot)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:<8} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}",
            "annotator", "slot", "accept", "modify", "reject", "nosugg", "acc%", "mod%", "rej%"
        );
        let pct = |r: Option<f64>| r.map_or("-".to_string(), |v| format!("{:.3}", v));
        for r in &self.rows {
            let label = if r.pooled { format!("{}*", r.slot) } else { r.slot.clone() };
            let _ = writeln!(
                out,
                "{:<12} {:<8} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7} {:>7}",
                r.annotator,
                label,
                r.counts.accept,
                r.counts.modify,
                r.counts.reject_create,
                r.counts.unsuggested,
                pct(r.accept_rate),
                pct(r.modify_rate),
                pct(r.reject_rate),
            );
        }
        if self.rows.iter().any(|r| r.pooled) {
            out.push_str("* pooled over ARG0, ARG1, LOC and TIME\n");
        }
        out
    }
}

fn row(annotator: &str, slot: &str, counts: ActionCounts, pooled: bool) -> AcceptanceRow {
    AcceptanceRow {
        annotator: annotator.to_string(),
        slot: slot.to_string(),
        counts,
        accept_rate: counts.accept_rate(),
        modify_rate: counts.modify_rate(),
        reject_rate: counts.reject_rate(),
        pooled,
    }
}

/// Per (annotator, slot) action counts and rates, plus a pooled argument row
/// per annotator.
pub fn acceptance_ratios(log: &[Decision]) -> AcceptanceReport {
    let mut cells: BTreeMap<(&str, Slot), ActionCounts> = BTreeMap::new();
    for d in log {
        cells.entry((d.annotator.as_str(), d.slot)).or_default().record(d);
    }
    let annotators: BTreeSet<&str> = cells.keys().map(|(a, _)| *a).collect();
    let mut rows = Vec::new();
    for a in annotators {
        let mut pooled = ActionCounts::default();
        let mut any_arg = false;
        for slot in Slot::ALL {
            if let Some(c) = cells.get(&(a, slot)) {
                rows.push(row(a, slot.as_str(), *c, false));
                if slot != Slot::Roleset {
                    any_arg = true;
                    pooled.accept += c.accept;
                    pooled.modify += c.modify;
                    pooled.reject_create += c.reject_create;
                    pooled.unsuggested += c.unsuggested;
                }
            }
        }
        if any_arg {
            rows.push(row(a, POOLED_ARG, pooled, true));
        }
    }
    AcceptanceReport { rows }
}

fn common_keys<'a, V>(a: &'a BTreeMap<String, V>, b: &'a BTreeMap<String, V>) -> Vec<(&'a V, &'a V)> {
    a.iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| (va, vb)))
        .collect()
}

/// Fraction of common mentions with equal labels.
pub fn raw_agreement<V: Eq>(a: &BTreeMap<String, V>, b: &BTreeMap<String, V>) -> Result<f64, MetricsError> {
    let pairs = common_keys(a, b);
    if pairs.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    let agree = pairs.iter().filter(|(x, y)| x == y).count();
    Ok(agree as f64 / pairs.len() as f64)
}

/// Cohen's kappa over the common mentions.
pub fn cohens_kappa<V: Ord>(a: &BTreeMap<String, V>, b: &BTreeMap<String, V>) -> Result<f64, MetricsError> {
    let pairs = common_keys(a, b);
    if pairs.is_empty() {
        return Err(MetricsError::EmptyIntersection);
    }
    let n = pairs.len() as f64;
    let mut ma: BTreeMap<&V, usize> = BTreeMap::new();
    let mut mb: BTreeMap<&V, usize> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in &pairs {
        *ma.entry(*x).or_default() += 1;
        *mb.entry(*y).or_default() += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = ma
        .iter()
        .map(|(label, ca)| {
            let cb = mb.get(label).copied().unwrap_or(0);
            (*ca as f64 / n) * (cb as f64 / n)
        })
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if agree == pairs.len() { 1.0 } else { 0.0 });
    }
    Ok(((p_o - p_e) / (1.0 - p_e)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub common_mention_count: usize,
    pub raw_agreement: f64,
    pub cohens_kappa: f64,
}

impl AgreementReport {
    pub fn to_text(&self) -> String {
        format!(
            "{:<22} {:>8}\n{:<22} {:>8}\n{:<22} {:>8.4}\n{:<22} {:>8.4}\n",
            "metric", "value",
            "common mentions", self.common_mention_count,
            "raw agreement", self.raw_agreement,
            "cohen's kappa", self.cohens_kappa,
        )
    }
}

pub fn agreement<V: Ord>(a: &BTreeMap<String, V>, b: &BTreeMap<String, V>) -> Result<AgreementReport, MetricsError> {
    Ok(AgreementReport {
        common_mention_count: common_keys(a, b).len(),
        raw_agreement: raw_agreement(a, b)?,
        cohens_kappa: cohens_kappa(a, b)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "Roleset")]
    Roleset,
    #[serde(rename = "ARG-0")]
    Arg0,
    #[serde(rename = "ARG-1")]
    Arg1,
    #[serde(rename = "ARG-Loc")]
    ArgLoc,
    #[serde(rename = "ARG-Time")]
    ArgTime,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::Roleset, Field::Arg0, Field::Arg1, Field::ArgLoc, Field::ArgTime];

    pub fn name(self) -> &'static str {
        match self {
            Field::Roleset => "Roleset",
            Field::Arg0 => "ARG-0",
            Field::Arg1 => "ARG-1",
            Field::ArgLoc => "ARG-Loc",
            Field::ArgTime => "ARG-Time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldAccuracy {
    pub field: Field,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GptAccuracyReport {
    pub fields: Vec<FieldAccuracy>,
}

impl GptAccuracyReport {
    pub fn accuracy(&self, field: Field) -> f64 {
        self.fields
            .iter()
            .find(|f| f.field == field)
            .map_or(0.0, |f| f.accuracy)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<10} {:>8} {:>8} {:>9}\n", "field", "correct", "total", "accuracy");
        for f in &self.fields {
            let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>9.4}", f.field.name(), f.correct, f.total, f.accuracy);
        }
        out
    }
}

fn field_correct(field: Field, p: &XAmr, g: &XAmr) -> bool {
    let m = crate::xamr::xamr_match(p, g);
    match field {
        Field::Roleset => m.roleset_match,
        Field::Arg0 => both_empty(&p.arg0, &g.arg0) || m.arg_overlap.arg0,
        Field::Arg1 => both_empty(&p.arg1, &g.arg1) || m.arg_overlap.arg1,
        Field::ArgLoc => both_empty(&p.arg_loc, &g.arg_loc) || m.arg_overlap.arg_loc,
        Field::ArgTime => {
            (p.time().is_none() && g.time().is_none()) || time_overlap(p.time(), g.time())
        }
    }
}

fn both_empty(a: &crate::xamr::ArgValue, b: &crate::xamr::ArgValue) -> bool {
    a.is_empty() && b.is_empty()
}

/// Per-field fraction of predictions left unchanged by the adjudicated gold.
/// Both lists must cover the same mentions.
pub fn gpt_accuracy(pred: &[XAmr], gold: &[XAmr]) -> Result<GptAccuracyReport, MetricsError> {
    let p: HashMap<&str, &XAmr> = pred.iter().map(|x| (x.mention_id.as_str(), x)).collect();
    let g: HashMap<&str, &XAmr> = gold.iter().map(|x| (x.mention_id.as_str(), x)).collect();
    let missing_in_pred = g.keys().filter(|k| !p.contains_key(*k)).count();
    let missing_in_gold = p.keys().filter(|k| !g.contains_key(*k)).count();
    if missing_in_pred > 0 || missing_in_gold > 0 {
        return Err(MetricsError::MentionMismatch {
            missing_in_pred,
            missing_in_gold,
        });
    }
    let total = g.len();
    let fields = Field::ALL
        .into_iter()
        .map(|field| {
            let correct = g.iter().filter(|(k, gx)| field_correct(field, p[*k], gx)).count();
            FieldAccuracy {
                field,
                correct,
                total,
                accuracy: if total == 0 { 1.0 } else { correct as f64 / total as f64 },
            }
        })
        .collect();
    Ok(GptAccuracyReport { fields })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub documents: usize,
    pub mentions: usize,
    pub w_xamr: usize,
    pub w_nested_arg1: usize,
    pub w_arg_loc: usize,
    pub w_arg_time: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStatsReport {
    pub splits: BTreeMap<Split, SplitStats>,
    /// Annotations whose mention is not in the corpus.
    pub unmatched_annotations: usize,
}

impl CorpusStatsReport {
    pub fn split(&self, split: Split) -> SplitStats {
        self.splits.get(&split).copied().unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<16}", "");
        for s in Split::ALL {
            let _ = write!(out, " {:>8}", s.as_str());
        }
        out.push('\n');
        let rows: [(&str, StatFn); 6] = [
            ("Documents", |s| s.documents),
            ("Mentions", |s| s.mentions),
            ("w/ X-AMR", |s| s.w_xamr),
            ("w/ Nested ARG-1", |s| s.w_nested_arg1),
            ("w/ ARG-Loc", |s| s.w_arg_loc),
            ("w/ ARG-Time", |s| s.w_arg_time),
        ];
        for (label, get) in rows {
            let _ = write!(out, "{label:<16}");
            for s in Split::ALL {
                let _ = write!(out, " {:>8}", get(&self.split(s)));
            }
            out.push('\n');
        }
        out
    }
}

/// Counts per split. A mention counts towards a "w/" column when any of its
/// annotations has the property.
pub fn corpus_stats(corpus: &Corpus, annotations: &[XAmr]) -> CorpusStatsReport {
    let mut report = CorpusStatsReport::default();
    for s in Split::ALL {
        report.splits.insert(s, SplitStats::default());
    }
    let mut docs: BTreeSet<(Split, u32, &str)> = BTreeSet::new();
    let mut split_of: HashMap<&str, Split> = HashMap::new();
    for m in &corpus.mentions {
        if split_of.insert(m.mention_id.as_str(), m.split).is_none() {
            report.splits.get_mut(&m.split).expect("all splits").mentions += 1;
        }
        docs.insert((m.split, m.topic_id, m.doc_id.as_str()));
    }
    for (split, _, _) in &docs {
        report.splits.get_mut(split).expect("all splits").documents += 1;
    }
    let mut flags: BTreeMap<&str, [bool; 4]> = BTreeMap::new();
    for x in annotations {
        if !split_of.contains_key(x.mention_id.as_str()) {
            report.unmatched_annotations += 1;
            continue;
        }
        let f = flags.entry(x.mention_id.as_str()).or_default();
        f[0] |= x.has_xamr();
        f[1] |= x.has_nested_arg1();
        f[2] |= !x.arg_loc.is_empty();
        f[3] |= x.time().is_some();
    }
    for (id, f) in flags {
        let s = report.splits.get_mut(&split_of[id]).expect("all splits");
        s.w_xamr += usize::from(f[0]);
        s.w_nested_arg1 += usize::from(f[1]);
        s.w_arg_loc += usize::from(f[2]);
        s.w_arg_time += usize::from(f[3]);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roleset::RolesetId;
    use crate::suggest::store::SlotValue;
    use crate::time::TimeRef;
    use crate::xamr::{ArgValue, EntityRef};
    use chrono::{TimeZone, Utc};

    fn d(annotator: &str, slot: Slot, action: Action, suggested: bool) -> Decision {
        let v = SlotValue::Roleset(RolesetId::parse("agree.01").unwrap());
        let other = SlotValue::Roleset(RolesetId::parse("agree.02").unwrap());
        let fits = |v: SlotValue| match slot {
            Slot::Roleset => v,
            Slot::Time => SlotValue::Time(TimeRef::new(Some(7), None, Some(2008)).unwrap()),
            _ => SlotValue::Arg(ArgValue::entity(&v.sort_key())),
        };
        Decision {
            mention_id: "m".into(),
            slot,
            suggested: suggested.then(|| fits(v.clone())),
            action,
            final_value: if action == Action::Accept { fits(v) } else { fits(other) },
            annotator: annotator.into(),
            ts: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn eight_accepts_two_modifies() {
        let mut log: Vec<Decision> = (0..8).map(|_| d("a", Slot::Roleset, Action::Accept, true)).collect();
        log.extend((0..2).map(|_| d("a", Slot::Roleset, Action::Modify, true)));
        let r = acceptance_ratios(&log);
        let row = r.row("a", "ROLESET").unwrap();
        assert_eq!(row.accept_rate, Some(0.8));
        assert_eq!(row.modify_rate, Some(0.2));
        assert_eq!(row.reject_rate, Some(0.0));
        assert!(r.row("a", POOLED_ARG).is_none());
    }

    #[test]
    fn empty_log_and_unsuggested() {
        assert!(acceptance_ratios(&[]).rows.is_empty());
        let r = acceptance_ratios(&[d("a", Slot::Arg0, Action::RejectCreate, false)]);
        let row = r.row("a", "ARG0").unwrap();
        assert_eq!(row.counts.unsuggested, 1);
        assert_eq!(row.counts.total(), 0);
        assert_eq!(row.accept_rate, None);
    }

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn agreement_edge_cases() {
        let a = map(&[("1", "x"), ("2", "y")]);
        assert_eq!(raw_agreement(&a, &a), Ok(1.0));
        assert_eq!(cohens_kappa(&a, &a), Ok(1.0));
        let b = map(&[("3", "x")]);
        assert_eq!(raw_agreement(&a, &b), Err(MetricsError::EmptyIntersection));
        assert_eq!(cohens_kappa(&a, &b), Err(MetricsError::EmptyIntersection));
        let c = map(&[("1", "x")]);
        assert_eq!(cohens_kappa(&c, &c), Ok(1.0));
    }

    #[test]
    fn gpt_accuracy_identity_and_mismatch() {
        let mut x = XAmr::new("m1", RolesetId::parse("agree.01").unwrap(), "gpt");
        x.arg0 = ArgValue::Entity(EntityRef::new("HP"));
        let xs = vec![x.clone()];
        let r = gpt_accuracy(&xs, &xs).unwrap();
        assert!(r.fields.iter().all(|f| f.accuracy == 1.0));
        let y = XAmr::new("m2", RolesetId::parse("agree.01").unwrap(), "gpt");
        assert_eq!(
            gpt_accuracy(&xs, &[y]),
            Err(MetricsError::MentionMismatch {
                missing_in_pred: 1,
                missing_in_gold: 1
            })
        );
    }

    #[test]
    fn empty_in_one_is_a_miss() {
        let mut p = XAmr::new("m1", RolesetId::parse("agree.01").unwrap(), "gpt");
        let g = p.clone();
        p.arg_loc = ArgValue::entity("Palo Alto");
        let r = gpt_accuracy(&[p], &[g]).unwrap();
        assert_eq!(r.accuracy(Field::ArgLoc), 0.0);
        assert_eq!(r.accuracy(Field::Arg0), 1.0);
    }
}
