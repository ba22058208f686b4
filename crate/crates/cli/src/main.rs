//! `xamr`: ingest, serve, extract with an LLM, evaluate.
//!
//! Exit codes: 0 success, 2 input error, 3 partial failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "xamr", version, about = "X-AMR annotation toolkit")]
struct Cli {
    /// Log LLM request and response bodies (API key redacted).
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct SplitArgs {
    /// Comma-separated dev topics; defaults to the standard dev set.
    #[arg(long, value_delimiter = ',')]
    pub dev_topics: Option<Vec<u32>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a corpus directory into a mention manifest and print the split summary.
    Ingest {
        corpus_dir: PathBuf,
        /// Manifest output (JSONL); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run the annotation service.
    Serve {
        /// Service configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        /// Shuffle the mention queue with this seed instead of topic, document, sentence order.
        #[arg(long)]
        shuffle_seed: Option<u64>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Two-step LLM extraction over a manifest or corpus.
    AnnotateGpt(Box<commands::AnnotateArgs>),
    /// Per-field accuracy of predictions against adjudicated annotations.
    EvalGpt {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Roleset agreement between two annotators.
    Iaa {
        /// Annotations of the first annotator, or of both when `b` is omitted.
        a: PathBuf,
        b: Option<PathBuf>,
        /// Restrict to mentions of one split; needs `--corpus`.
        #[arg(long)]
        split: Option<String>,
        /// Corpus directory or manifest used for `--split`.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[command(flatten)]
        splits: SplitArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Corpus statistics, plus acceptance ratios when a decision log is given.
    Stats {
        /// Corpus directory or manifest.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Derive annotation JSONL from a decision log.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        annotator: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging(trace: bool) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    builder.filter_module("xamr_llm::trace", if trace { log::LevelFilter::Info } else { log::LevelFilter::Off });
    builder.format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.trace);
    let result = match cli.command {
        Command::Ingest {
            corpus_dir,
            out,
            split,
            format,
        } => commands::ingest(&corpus_dir, out.as_deref(), &split, format),
        Command::Serve {
            config,
            port,
            bind,
            shuffle_seed,
            static_dir,
        } => commands::serve(&config, port, bind, shuffle_seed, static_dir),
        Command::AnnotateGpt(args) => commands::annotate_gpt(&args, cli.trace),
        Command::EvalGpt { pred, gold, format } => commands::eval_gpt(&pred, &gold, format),
        Command::Iaa {
            a,
            b,
            split,
            corpus,
            splits,
            format,
        } => commands::iaa(&a, b.as_deref(), split.as_deref(), corpus.as_deref(), &splits, format),
        Command::Stats {
            corpus,
            annotations,
            log,
            split,
            format,
        } => commands::stats(&corpus, annotations.as_deref(), log.as_deref(), &split, format),
        Command::Export { log, annotator, out } => commands::export(&log, annotator.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
