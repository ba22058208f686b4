//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;

use xamr_core::corpus::write_manifest;
use xamr_core::metrics::{acceptance_ratios, agreement, corpus_stats, gpt_accuracy};
use xamr_core::suggest::decision::{annotations_from_decisions, read_log};
use xamr_core::xamr::{read_annotations, write_annotations};
use xamr_core::{ingest_corpus, load_corpus, Corpus, RolesetId, Split, SplitConfig, XAmr};
use xamr_llm::{
    run_pipeline, DecodingParams, HttpClient, HttpConfig, LlmClient, MockClient, PipelineOptions, RecordingClient,
    ResponseCache,
};
use xamr_service::{Service, ServiceConfig};

use crate::{Format, SplitArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 2,
            message: message.to_string(),
        }
    }

    pub fn partial(message: impl std::fmt::Display) -> Self {
        CliError {
            code: 3,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), CliError>;

impl SplitArgs {
    fn config(&self) -> SplitConfig {
        match &self.dev_topics {
            Some(topics) => SplitConfig::with_dev_topics(topics.iter().copied()),
            None => SplitConfig::default(),
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError {
        code: 1,
        message: e.to_string(),
    }
}

fn read_xamr(path: &Path) -> Result<Vec<XAmr>, CliError> {
    let f = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_annotations(BufReader::new(f)).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn require(path: &Path) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!("{} does not exist", path.display())))
    }
}

fn parse_split(split: &str) -> Result<Split, CliError> {
    split.parse().map_err(CliError::input)
}

pub fn ingest(corpus_dir: &Path, out: Option<&Path>, split: &SplitArgs, format: Format) -> CliResult {
    let corpus = ingest_corpus(corpus_dir, &split.config()).map_err(CliError::input)?;
    let mut sink = output(out)?;
    write_manifest(&mut sink, &corpus.mentions).map_err(io_error)?;
    sink.flush().map_err(io_error)?;
    let summary = corpus.split_summary();
    let text = match format {
        Format::Json => {
            let rows: BTreeMap<&str, _> = summary
                .iter()
                .map(|(s, (d, m))| (s.as_str(), json!({ "documents": d, "mentions": m })))
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&rows).expect("summary serializes"))
        }
        Format::Text => summary
            .iter()
            .map(|(s, (d, m))| format!("{s}: {d} documents, {m} mentions\n"))
            .collect(),
    };
    if out.is_some() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    Ok(())
}

pub fn serve(
    config: &Path,
    port: Option<u16>,
    bind: Option<String>,
    shuffle_seed: Option<u64>,
    static_dir: Option<PathBuf>,
) -> CliResult {
    let mut config = ServiceConfig::load(config).map_err(CliError::input)?;
    if let Some(p) = port {
        config.port = p;
    }
    if let Some(b) = bind {
        config.bind = b;
    }
    if shuffle_seed.is_some() {
        config.shuffle_seed = shuffle_seed;
    }
    if static_dir.is_some() {
        config.static_dir = static_dir;
    }
    let addr = format!("{}:{}", config.bind, config.port);
    let service = Service::load(config).map_err(CliError::input)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io_error)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::input(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(io_error)?);
        xamr_service::serve_on(listener, Arc::new(service), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(io_error)
    })
}

#[derive(Debug, clap::Args)]
pub struct AnnotateArgs {
    /// Mention manifest (JSONL) or corpus directory.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Only mentions of this split.
    #[arg(long)]
    pub split: Option<String>,
    /// Only the first N mentions after split filtering.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Answer from canned `<sha256 of prompt>.txt` files instead of the network.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Save every live response as a canned file in this directory.
    #[arg(long, conflicts_with = "mock")]
    pub record: Option<PathBuf>,
    /// Response cache directory; reruns are free.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Annotation JSONL output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Failure report (JSON).
    #[arg(long)]
    pub failures: Option<PathBuf>,
    /// Event descriptions from the first step (JSONL).
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
    /// Worker threads; 0 picks the default, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Exit with status 3 when more than this fraction of mentions fail.
    #[arg(long, default_value_t = 0.1)]
    pub max_failure_fraction: f64,
    #[arg(long, default_value = "gpt")]
    pub annotator: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    pub base_url: String,
    #[arg(long, default_value = "gpt-4")]
    pub model: String,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[command(flatten)]
    pub splits: SplitArgs,
}

pub fn annotate_gpt(args: &AnnotateArgs, trace: bool) -> CliResult {
    let corpus = load_corpus(&args.manifest, &args.splits.config()).map_err(CliError::input)?;
    let split = args.split.as_deref().map(parse_split).transpose()?;
    let mut mentions: Vec<_> = corpus
        .mentions
        .into_iter()
        .filter(|m| split.is_none_or(|s| m.split == s))
        .collect();
    if let Some(n) = args.limit {
        mentions.truncate(n);
    }
    if mentions.is_empty() {
        return Err(CliError::input("no mentions selected"));
    }
    let client: Box<dyn LlmClient> = match (&args.mock, &args.record) {
        (Some(dir), _) => Box::new(
            MockClient::from_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?,
        ),
        (None, record) => {
            let http = HttpClient::from_env(HttpConfig {
                base_url: args.base_url.clone(),
                model: args.model.clone(),
                timeout_secs: args.timeout_secs,
                max_retries: args.max_retries,
                trace,
                ..HttpConfig::default()
            })
            .map_err(CliError::input)?;
            match record {
                Some(dir) => Box::new(RecordingClient::new(http, dir).map_err(io_error)?),
                None => Box::new(http),
            }
        }
    };
    let cache = args
        .cache
        .as_deref()
        .map(ResponseCache::open)
        .transpose()
        .map_err(io_error)?;
    let options = PipelineOptions {
        threads: args.threads,
        params: DecodingParams {
            temperature: args.temperature,
            max_tokens: args.max_tokens,
        },
        annotator: args.annotator.clone(),
        cache,
        ..PipelineOptions::default()
    };
    let out = run_pipeline(&mentions, client.as_ref(), &options);

    let mut sink = output(args.out.as_deref())?;
    write_annotations(&mut sink, &out.annotations).map_err(io_error)?;
    sink.flush().map_err(io_error)?;
    if let Some(path) = &args.descriptions {
        let mut w = output(Some(path))?;
        for d in &out.descriptions {
            let line = json!({
                "mention_id": d.mention_id,
                "topic_id": d.topic_id,
                "text": d.text,
                "wiki_link_count": d.wiki_link_count,
                "has_complete_date": d.has_complete_date,
            });
            writeln!(w, "{line}").map_err(io_error)?;
        }
        w.flush().map_err(io_error)?;
    }
    let report = json!({
        "mentions": mentions.len(),
        "annotations": out.annotations.len(),
        "failures": out.failures,
        "warnings": out.warnings,
        "client_calls": out.stats.client_calls,
        "cache_hits": out.stats.cache_hits,
    });
    if let Some(path) = &args.failures {
        let mut w = output(Some(path))?;
        writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("report serializes")).map_err(io_error)?;
        w.flush().map_err(io_error)?;
    }
    for f in &out.failures {
        log::warn!("{} failed at {:?}: {}", f.mention_id, f.stage, f.error);
    }
    eprintln!(
        "client calls: {}, cache hits: {}, annotations: {}, failures: {}/{}",
        out.stats.client_calls,
        out.stats.cache_hits,
        out.annotations.len(),
        out.failures.len(),
        mentions.len()
    );
    let fraction = out.failure_fraction(mentions.len());
    if fraction > args.max_failure_fraction {
        return Err(CliError::partial(format!(
            "failure fraction {fraction:.3} exceeds {}",
            args.max_failure_fraction
        )));
    }
    Ok(())
}

pub fn eval_gpt(pred: &Path, gold: &Path, format: Format) -> CliResult {
    let report = gpt_accuracy(&read_xamr(pred)?, &read_xamr(gold)?).map_err(CliError::input)?;
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(())
}

type RolesetMap = BTreeMap<String, RolesetId>;

fn roleset_maps(a: &Path, b: Option<&Path>) -> Result<(RolesetMap, RolesetMap), CliError> {
    let to_map = |xs: &[XAmr]| -> RolesetMap { xs.iter().map(|x| (x.mention_id.clone(), x.roleset.clone())).collect() };
    let first = read_xamr(a)?;
    if let Some(b) = b {
        return Ok((to_map(&first), to_map(&read_xamr(b)?)));
    }
    let annotators: BTreeSet<&str> = first.iter().map(|x| x.annotator_id.as_str()).collect();
    let [x, y] = annotators.iter().copied().collect::<Vec<_>>()[..] else {
        return Err(CliError::input(format!(
            "{} has {} annotators; expected exactly two or a second file",
            a.display(),
            annotators.len()
        )));
    };
    let pick = |id: &str| -> Vec<XAmr> { first.iter().filter(|v| v.annotator_id == id).cloned().collect() };
    Ok((to_map(&pick(x)), to_map(&pick(y))))
}

pub fn iaa(
    a: &Path,
    b: Option<&Path>,
    split: Option<&str>,
    corpus: Option<&Path>,
    splits: &SplitArgs,
    format: Format,
) -> CliResult {
    let (mut ma, mut mb) = roleset_maps(a, b)?;
    if let Some(split) = split {
        let split = parse_split(split)?;
        let corpus = corpus.ok_or_else(|| CliError::input("--split needs --corpus"))?;
        let corpus = load_corpus(corpus, &splits.config()).map_err(CliError::input)?;
        let keep: BTreeSet<&str> = corpus
            .mentions
            .iter()
            .filter(|m| m.split == split)
            .map(|m| m.mention_id.as_str())
            .collect();
        ma.retain(|k, _| keep.contains(k.as_str()));
        mb.retain(|k, _| keep.contains(k.as_str()));
    }
    let report = agreement(&ma, &mb).map_err(CliError::input)?;
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(())
}

pub fn stats(corpus: &Path, annotations: Option<&Path>, log: Option<&Path>, split: &SplitArgs, format: Format) -> CliResult {
    let corpus: Corpus = load_corpus(corpus, &split.config()).map_err(CliError::input)?;
    let annotations = annotations.map(read_xamr).transpose()?.unwrap_or_default();
    let report = corpus_stats(&corpus, &annotations);
    if let Some(p) = log {
        require(p)?;
    }
    let acceptance = log
        .map(|p| read_log(p).map(|l| acceptance_ratios(&l.decisions)))
        .transpose()
        .map_err(CliError::input)?;
    match format {
        Format::Text => {
            print!("{}", report.to_text());
            if let Some(a) = &acceptance {
                print!("\n{}", a.to_text());
            }
        }
        Format::Json => {
            let doc = json!({ "corpus": report, "acceptance": acceptance });
            println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
        }
    }
    Ok(())
}

pub fn export(log: &Path, annotator: Option<&str>, out: Option<&Path>) -> CliResult {
    require(log)?;
    let loaded = read_log(log).map_err(CliError::input)?;
    let mut annotations = annotations_from_decisions(&loaded.decisions);
    if let Some(a) = annotator {
        annotations.retain(|x| x.annotator_id == a);
    }
    let mut sink = output(out)?;
    write_annotations(&mut sink, &annotations).map_err(io_error)?;
    sink.flush().map_err(io_error)
}
