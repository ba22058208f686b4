//! One PASS/FAIL/SKIP line per acceptance criterion. Exits non-zero on any
//! FAIL.

#[path = "../../core/tests/support/mod.rs"]
mod core_support;
#[path = "../../llm/tests/support/mod.rs"]
mod llm_support;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use xamr_core::corpus::write_corpus;
use xamr_core::metrics::{cohens_kappa, corpus_stats, gpt_accuracy, raw_agreement, Field};
use xamr_core::suggest::decision::{apply_decision, replay, Action};
use xamr_core::suggest::embed::{embed, fnv1a64, EmbeddingProvider, HashingEmbedder};
use xamr_core::suggest::store::{ArgumentStore, Slot, StoreScope};
use xamr_core::xamr::read_annotations;
use xamr_core::{ingest_corpus, parse_time, ArgValue, Mention, RolesetId, Split, SplitConfig, TimeRef, XAmr};
use xamr_llm::{
    build_prompt_a, build_prompt_b, parse_response_a, render_response, run_pipeline, LlmResponse, MockClient,
    PipelineOptions, ResponseCache,
};

const CORPUS_BUDGET: Duration = Duration::from_secs(1);
const RANKER_BUDGET: Duration = Duration::from_secs(30);
const KAPPA_TOLERANCE: f64 = 1e-4;
const RATE_TOLERANCE: f64 = 1e-12;
/// fnv1a64 over the f64 bit patterns of the embeddings of EMBED_PROBES,
/// frozen from a reference run.
const EMBED_DIGEST: u64 = 0x4cb1_8176_d00c_e5f5;
const EMBED_PROBES: [&str; 4] = [
    "HP today announced that it has signed a definitive agreement to acquire EYP Mission Critical Facilities.",
    "A magnitude 6.0 quake struck Napa, California on Sunday.",
    "",
    "Shares rose 3% in early trading",
];

enum Outcome {
    Pass(String),
    Skip(String),
}

type Check = Result<Outcome, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn corpus_contract() -> Check {
    let start = Instant::now();
    let corpus = ingest_corpus(&fixtures().join("ecb"), &SplitConfig::default()).map_err(|e| e.to_string())?;
    ensure(corpus.mentions.len() == 12, || format!("{} mentions, expected 12", corpus.mentions.len()))?;
    let t36: Vec<&Mention> = corpus.mentions.iter().filter(|m| m.topic_id == 36).collect();
    ensure(!t36.is_empty() && t36.iter().all(|m| m.split == Split::Test), || {
        "topic 36 mentions are not all in test".into()
    })?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_corpus(&corpus, dir.path()).map_err(|e| e.to_string())?;
    let again = ingest_corpus(dir.path(), &SplitConfig::default()).map_err(|e| e.to_string())?;
    ensure(again == corpus, || "ingest -> write -> ingest changed the corpus".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < CORPUS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(Outcome::Pass(format!("12 mentions, round trip identical, {elapsed:?}")))
}

fn data_contingent() -> Check {
    let Some(ecb) = std::env::var_os("XAMR_ECB_DIR") else {
        return Ok(Outcome::Skip("XAMR_ECB_DIR not set".into()));
    };
    let corpus = ingest_corpus(Path::new(&ecb), &SplitConfig::default()).map_err(|e| e.to_string())?;
    let summary = corpus.split_summary();
    let expected = [(Split::Train, (594, 3808)), (Split::Dev, (196, 1245)), (Split::Test, (206, 1780))];
    for (split, counts) in expected {
        let got = summary.get(&split).copied().unwrap_or_default();
        ensure(got == counts, || format!("{split}: {got:?} documents/mentions, expected {counts:?}"))?;
    }
    let Some(path) = std::env::var_os("XAMR_DEV_ANNOTATIONS") else {
        return Ok(Outcome::Skip("splits match; XAMR_DEV_ANNOTATIONS not set".into()));
    };
    let f = fs::File::open(&path).map_err(|e| e.to_string())?;
    let anns = read_annotations(BufReader::new(f)).map_err(|e| e.to_string())?;
    let dev = corpus_stats(&corpus, &anns).split(Split::Dev);
    let got = (dev.mentions, dev.w_nested_arg1, dev.w_arg_loc, dev.w_arg_time);
    ensure(got == (1245, 325, 1243, 1244), || format!("dev column {got:?}"))?;
    Ok(Outcome::Pass("splits and dev column match".into()))
}

fn embed_digest() -> u64 {
    let bytes: Vec<u8> = EMBED_PROBES
        .iter()
        .flat_map(|t| embed(t).as_slice().to_vec())
        .flat_map(|v| v.to_bits().to_le_bytes())
        .collect();
    fnv1a64(&bytes)
}

fn ranker_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce97);
    for case in 0..200 {
        let size = rng.random_range(0..=1000);
        let scope = if case % 5 == 0 { StoreScope::Global } else { StoreScope::PerTopic };
        let store = core_support::random_store(&mut rng, size, scope);
        let target = embed(&core_support::sentence(&mut rng));
        let slot = Slot::ALL[case % Slot::ALL.len()];
        let topic = rng.random_range(1..=3);
        let k = if case % 4 == 0 { 1000 } else { rng.random_range(1..=20) };
        let got = store.rank(slot, &target, topic, k);
        let expected = core_support::oracle_rank(&store, slot, &target, topic, k);
        ensure(got.len() == expected.len(), || format!("case {case}: length"))?;
        for (s, (ordinal, score, key)) in got.iter().zip(&expected) {
            ensure(
                s.ordinal == *ordinal && s.score.to_bits() == score.to_bits() && s.value.sort_key() == *key,
                || format!("case {case}: rank {} differs from oracle", s.rank),
            )?;
        }
    }
    for _ in 0..500 {
        let v = embed(&core_support::sentence(&mut rng));
        ensure(v.is_zero() || (v.norm() - 1.0).abs() < 1e-12, || format!("norm {}", v.norm()))?;
    }
    let digest = embed_digest();
    ensure(digest == EMBED_DIGEST, || format!("embedding digest {digest:#018x}, frozen {EMBED_DIGEST:#018x}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < RANKER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(Outcome::Pass(format!("200 stores bit-exact, digest frozen, {elapsed:?}")))
}

fn decision_properties() -> Result<(), String> {
    let embedder = HashingEmbedder::default();
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let scope = if seed % 3 == 0 { StoreScope::Global } else { StoreScope::PerTopic };
        let mentions = core_support::synthetic_mentions(25, 3, &mut rng);
        let (log, live) = core_support::scripted_session(&mut rng, &mentions, 200, scope);
        let index: HashMap<&str, &Mention> = mentions.iter().map(|m| (m.mention_id.as_str(), m)).collect();
        let mut store = ArgumentStore::new(scope);
        for d in &log {
            let m = index[d.mention_id.as_str()];
            let before = store.value_set();
            apply_decision(&mut store, d, &embedder.embed(&m.sentence_text), m.topic_id).map_err(|e| e.to_string())?;
            if d.action == Action::Accept {
                ensure(store.value_set() == before, || format!("seed {seed}: ACCEPT changed the value set"))?;
            }
        }
        let replayed = replay(&log, &index, &embedder, scope).map_err(|e| e.to_string())?;
        ensure(replayed == live, || format!("seed {seed}: replay differs from live store"))?;
    }
    Ok(())
}

struct Server {
    child: Child,
    url: String,
    agent: ureq::Agent,
}

impl Server {
    fn spawn(config: &Path) -> Result<Server, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_xamr"))
            .arg("serve")
            .arg("--config")
            .arg(config)
            .args(["--port", "0"])
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| e.to_string())?;
        let stderr = child.stderr.take().expect("piped");
        let mut lines = BufReader::new(stderr).lines();
        let url = loop {
            match lines.next() {
                Some(Ok(line)) => {
                    if let Some(url) = line.strip_prefix("listening on ") {
                        break url.to_string();
                    }
                }
                _ => {
                    let _ = child.kill();
                    return Err("server exited before listening".into());
                }
            }
        };
        std::thread::spawn(move || lines.for_each(drop));
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().new_agent();
        Ok(Server { child, url, agent })
    }

    fn get(&self, path: &str) -> Result<Value, String> {
        let mut r = self.agent.get(&format!("{}{path}", self.url)).call().map_err(|e| e.to_string())?;
        r.body_mut().read_json().map_err(|e| e.to_string())
    }

    fn post(&self, path: &str, body: &Value) -> Result<u16, String> {
        let r = self
            .agent
            .post(&format!("{}{path}", self.url))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        Ok(r.status().as_u16())
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn annotate(server: &Server, rng: &mut ChaCha8Rng, annotator: &str, steps: usize) -> Result<(), String> {
    for _ in 0..steps {
        let view = server.get(&format!("/api/session/next?annotator={annotator}"))?;
        let Some(slot) = view["slots"].as_array().and_then(|s| s.first()).cloned() else {
            return Ok(());
        };
        let name = slot["slot"].as_str().unwrap_or_default().to_string();
        let fresh = match name.as_str() {
            "ROLESET" => json!(["agree.01", "acquire.01", "buy.01"].choose(rng).unwrap()),
            "TIME" => json!(format!("0{}-1{}-2008", rng.random_range(1..9), rng.random_range(0..9))),
            _ => {
                let surface = *["HP", "EYP", "Napa", "California"].choose(rng).unwrap();
                json!({ "surface": surface, "wiki": null })
            },
        };
        let served = slot["default"].clone();
        let (suggested, action, value) = match (served.is_null(), rng.random_range(0..3)) {
            (true, _) => (Value::Null, "REJECT_CREATE", fresh),
            (false, 0) => (served.clone(), "ACCEPT", served),
            (false, 1) => (served, "MODIFY", fresh),
            (false, _) => (served, "REJECT_CREATE", fresh),
        };
        let body = json!({
            "mention_id": view["mention"]["mention_id"],
            "slot": name,
            "suggested": suggested,
            "action": action,
            "final": value,
            "annotator": annotator,
        });
        let status = server.post("/api/decision", &body)?;
        ensure(status == 201, || format!("{body} -> {status}"))?;
    }
    Ok(())
}

fn kill_and_restart() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("service.toml");
    let text = format!(
        "corpus = {:?}\nframes = {:?}\ndecision_log = \"decisions.jsonl\"\nannotators = [\"a1\", \"a2\"]\n",
        fixtures().join("ecb"),
        fixtures().join("frames"),
    );
    fs::write(&config, text).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let first = Server::spawn(&config)?;
    annotate(&first, &mut rng, "a1", 20)?;
    annotate(&first, &mut rng, "a2", 15)?;
    let before = first.get("/api/store/digest")?;
    first.kill();
    ensure(before["version"] == 35, || format!("version {} before restart", before["version"]))?;
    let second = Server::spawn(&config)?;
    let after = second.get("/api/store/digest")?;
    ensure(before == after, || format!("digest {before} before, {after} after restart"))?;
    annotate(&second, &mut rng, "a1", 3)?;
    ensure(second.get("/api/store/digest")?["version"] == 38, || "restarted server did not accept writes".into())
}

fn decision_semantics() -> Check {
    decision_properties()?;
    kill_and_restart()?;
    Ok(Outcome::Pass("30 sessions accept/replay, restart digest equal".into()))
}

fn prompt_fidelity() -> Check {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../llm/tests/golden");
    let read = |name: &str| fs::read_to_string(golden.join(name)).map_err(|e| format!("{name}: {e}"));
    let m = llm_support::agreement_mention();
    let a = build_prompt_a(&m).map_err(|e| e.to_string())?.render();
    ensure(a == read("prompt_a.txt")?, || "prompt A differs from golden".into())?;
    let prior = [
        "On November 12, 2007, HP (/wiki/Hewlett-Packard) agreed to acquire EYP Mission Critical Facilities (/wiki/EYP_Mission_Critical_Facilities).",
        "HP (/wiki/Hewlett-Packard) announced the purchase of EYP.",
    ];
    let target = "HP signed a definitive agreement to acquire EYP Mission Critical Facilities.";
    let b = build_prompt_b(&m, target, &prior).map_err(|e| e.to_string())?.render();
    ensure(b == read("prompt_b.txt")?, || "prompt B differs from golden".into())?;
    for needle in ["You are a concise annotator", "/wiki/Wikipedia_ID"] {
        ensure(a.contains(needle), || format!("prompt A lacks {needle:?}"))?;
    }
    ensure(b.contains("three most informative and similar events"), || "prompt B spot-check".into())?;

    let full = LlmResponse {
        roleset_id: Some(RolesetId::parse("agree.01").map_err(|e| e.to_string())?),
        arg0: Some("HP".into()),
        arg0_coref: Some("/wiki/Hewlett-Packard".into()),
        arg1: Some("EYP Mission Critical Facilities".into()),
        arg1_coref: Some("/wiki/EYP_Mission_Critical_Facilities".into()),
        arg1_roleset_id: Some(RolesetId::parse("acquire.01").map_err(|e| e.to_string())?),
        arg_location: Some("/wiki/Palo_Alto,_California".into()),
        arg_time: Some(TimeRef::new(Some(11), Some(12), Some(2007)).map_err(|e| e.to_string())?),
        event_description: Some("On November 12, 2007, HP agreed to acquire EYP.".into()),
        most_informative: None,
        warnings: Vec::new(),
    };
    let parsed = parse_response_a(&render_response(&full)).map_err(|e| e.to_string())?;
    ensure(parsed.fields == full && Some(parsed.roleset_id) == full.roleset_id, || "parse_response_a does not round-trip".into())?;

    let mentions = llm_support::dev_small_mentions();
    let run = |threads: usize, cache: Option<ResponseCache>| {
        let client = MockClient::with_fn(llm_support::synthetic_responder);
        let options = PipelineOptions {
            threads,
            cache,
            ..PipelineOptions::default()
        };
        let out = run_pipeline(&mentions, &client, &options);
        let mut bytes = Vec::new();
        xamr_core::xamr::write_annotations(&mut bytes, &out.annotations).expect("in-memory write");
        (bytes, out.stats.client_calls, client.calls(), out.failures.len())
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = || ResponseCache::open(dir.path()).map_err(|e| e.to_string());
    let (first, calls, seen, failed) = run(8, Some(cache()?));
    ensure(failed == 0, || format!("{failed} failures"))?;
    ensure(calls == 240 && seen == 240, || format!("{calls} calls for 120 mentions"))?;
    let (seq, _, _, _) = run(1, None);
    ensure(first == seq, || "output differs between thread counts".into())?;
    let (warm, warm_calls, warm_seen, _) = run(4, Some(cache()?));
    ensure(warm_calls == 0 && warm_seen == 0, || format!("{warm_calls} calls on warm cache"))?;
    ensure(warm == first, || "warm-cache output differs".into())?;
    Ok(Outcome::Pass("golden A/B, round trip, 240 calls then 0".into()))
}

fn labels(pairs: impl IntoIterator<Item = (String, &'static str)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k, v.to_string())).collect()
}

fn confusion(cells: [(usize, &'static str, &'static str); 4]) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
    let rows: Vec<(String, &str, &str)> = cells
        .iter()
        .flat_map(|&(n, a, b)| std::iter::repeat_n((a, b), n))
        .enumerate()
        .map(|(i, (a, b))| (format!("m{i}"), a, b))
        .collect();
    (
        labels(rows.iter().map(|(k, a, _)| (k.clone(), *a))),
        labels(rows.iter().map(|(k, _, b)| (k.clone(), *b))),
    )
}

fn metrics() -> Check {
    let (a, b) = confusion([(50, "x", "x"), (10, "x", "y"), (10, "y", "x"), (30, "y", "y")]);
    let po = 80.0 / 100.0;
    let pe = 0.6 * 0.6 + 0.4 * 0.4;
    let oracle = (po - pe) / (1.0 - pe);
    let k = cohens_kappa(&a, &b).map_err(|e| e.to_string())?;
    ensure((k - 0.5833).abs() <= KAPPA_TOLERANCE && (k - oracle).abs() <= RATE_TOLERANCE, || format!("kappa {k}"))?;
    let k_swapped = cohens_kappa(&b, &a).map_err(|e| e.to_string())?;
    ensure((k - k_swapped).abs() <= RATE_TOLERANCE, || "kappa is not symmetric".into())?;

    let (c, d) = confusion([(91, "x", "x"), (5, "x", "y"), (4, "y", "x"), (0, "y", "y")]);
    let raw = raw_agreement(&c, &d).map_err(|e| e.to_string())?;
    ensure((raw - 0.91).abs() <= RATE_TOLERANCE, || format!("raw agreement {raw}"))?;
    ensure(raw == raw_agreement(&d, &c).map_err(|e| e.to_string())?, || "raw agreement asymmetric".into())?;

    // five mentions: roleset wrong on m0, ARG-0 wrong on m1 and m2, time missing on m3
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for i in 0..5 {
        let mut p = XAmr::new(&format!("m{i}"), RolesetId::parse("acquire.01").unwrap(), "gpt");
        p.arg0 = ArgValue::entity("HP");
        p.arg_time = Some(TimeRef::new(Some(11), Some(12), Some(2007)).unwrap());
        let mut g = p.clone();
        match i {
            0 => g.roleset = RolesetId::parse("buy.01").unwrap(),
            1 | 2 => g.arg0 = ArgValue::entity("Intel"),
            3 => p.arg_time = None,
            _ => {}
        }
        pred.push(p);
        gold.push(g);
    }
    let r = gpt_accuracy(&pred, &gold).map_err(|e| e.to_string())?;
    let expected = [(Field::Roleset, 0.8), (Field::Arg0, 0.6), (Field::Arg1, 1.0), (Field::ArgLoc, 1.0), (Field::ArgTime, 0.8)];
    for (field, want) in expected {
        let got = r.accuracy(field);
        ensure((got - want).abs() <= RATE_TOLERANCE, || format!("{} accuracy {got}, expected {want}", field.name()))?;
    }
    ensure(r.fields.iter().all(|f| (0.0..=1.0).contains(&f.accuracy)), || "rate out of bounds".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let pick = |rng: &mut ChaCha8Rng| *["x", "y", "z"].choose(rng).unwrap();
        let a = labels((0..n).map(|i| (format!("m{i}"), pick(&mut rng))).collect::<Vec<_>>());
        let b = labels((0..n).map(|i| (format!("m{i}"), pick(&mut rng))).collect::<Vec<_>>());
        let (r1, r2) = (raw_agreement(&a, &b).unwrap(), raw_agreement(&b, &a).unwrap());
        let (k1, k2) = (cohens_kappa(&a, &b).unwrap(), cohens_kappa(&b, &a).unwrap());
        ensure(r1 == r2 && (k1 - k2).abs() <= RATE_TOLERANCE, || "agreement asymmetric".into())?;
        ensure((0.0..=1.0).contains(&r1) && (-1.0..=1.0).contains(&k1), || format!("out of bounds {r1} {k1}"))?;
    }
    Ok(Outcome::Pass(format!("kappa {k:.4}, raw 0.91, accuracy hand counts")))
}

fn time_parsing() -> Check {
    let cases = [("July 1st, 2008", "07-01-2008"), ("7/08", "07-XX-2008")];
    for (input, want) in cases {
        let got = parse_time(input);
        ensure(got.is_ok() && got.time.canonical() == want, || {
            format!("{input:?} -> {}, expected {want}", got.time.canonical())
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2008);
    for _ in 0..5000 {
        let month = rng.random_bool(0.7).then(|| rng.random_range(1..=12));
        let day = month.and_then(|_| rng.random_bool(0.7).then(|| rng.random_range(1..=28)));
        let year = rng.random_bool(0.7).then(|| rng.random_range(1000..=2999));
        let t = TimeRef::new(month, day, year).map_err(|e| e.to_string())?;
        let back = parse_time(&t.canonical());
        ensure(back.is_ok() && back.time == t, || format!("{} did not round-trip", t.canonical()))?;
    }
    Ok(Outcome::Pass("both strings, 5000 random round trips".into()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("corpus contract", corpus_contract),
        ("data-contingent table counts", data_contingent),
        ("ranker oracle", ranker_oracle),
        ("decision semantics", decision_semantics),
        ("prompt fidelity", prompt_fidelity),
        ("metrics", metrics),
        ("time parsing", time_parsing),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(Outcome::Pass(detail)) => println!("PASS {name}: {detail}"),
            Ok(Outcome::Skip(detail)) => println!("SKIP {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
