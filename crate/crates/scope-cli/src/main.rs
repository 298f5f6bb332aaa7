//! Command line front end: compress a document, inspect chunk boundaries,
//! or score a corpus end to end.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scope_core::backends::{BackendHandle, BackendKind};
use scope_core::chunker::{semantic_chunk, ChunkerConfig};
use scope_core::eval::{self, EvalConfig};
use scope_core::pipeline::{compress, RunConfig};
use scope_core::text::default_tokenizer;
use scope_core::{Result, ScopeError};

#[derive(Parser)]
#[command(
    name = "scope",
    version,
    about = "Compress long prompts to a requested token ratio, keeping the relevant parts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a document to a requested ratio.
    Compress(CompressArgs),
    /// Chunk a document and print the boundaries as JSON.
    Chunk(ChunkArgs),
    /// Compress a JSONL corpus, prompt an answer model, and score it.
    Eval(EvalArgs),
}

#[derive(Args)]
struct ChunkerFlags {
    /// Largest chunk size in tokens.
    #[arg(long, default_value_t = 800)]
    max_chunk_tokens: usize,
    /// Smallest chunk size the splitter aims for.
    #[arg(long, default_value_t = 200)]
    min_chunk_tokens: usize,
    /// Adjacent-sentence similarity below this value marks a cut point.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Merge adjacent chunks smaller than this many tokens.
    #[arg(long, default_value_t = 100)]
    tiny_merge_tokens: usize,
}

impl ChunkerFlags {
    fn to_config(&self) -> ChunkerConfig {
        ChunkerConfig {
            max_token: self.max_chunk_tokens,
            min_token: self.min_chunk_tokens,
            tau: self.tau,
            tiny_merge_threshold: self.tiny_merge_tokens,
        }
    }
}

#[derive(Args)]
struct CompressArgs {
    /// Input document path, or - for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Requested ratio of input tokens to output tokens, >= 1.
    #[arg(long)]
    ratio: f64,
    #[command(flatten)]
    chunker: ChunkerFlags,
    /// Embedding backend: http:URL | local:MODEL_ID | stub:NAME.
    #[arg(long, default_value = "local:default")]
    embedder: String,
    /// Summarization backend: http:URL | local:MODEL_ID | stub:NAME.
    #[arg(long, default_value = "local:default")]
    summarizer: String,
    /// Write the full run report (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Output path, or - for stdout.
    #[arg(long, default_value = "-")]
    output: String,
    /// Recorded in the report; reserved for stochastic backends.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ChunkArgs {
    /// Input document path, or - for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    #[command(flatten)]
    chunker: ChunkerFlags,
    /// Embedding backend: http:URL | local:MODEL_ID | stub:NAME.
    #[arg(long, default_value = "local:default")]
    embedder: String,
    /// Output path, or - for stdout.
    #[arg(long, default_value = "-")]
    output: String,
}

#[derive(Args)]
struct EvalArgs {
    /// JSONL corpus, one record per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Requested compression ratio applied to each context.
    #[arg(long)]
    ratio: f64,
    #[command(flatten)]
    chunker: ChunkerFlags,
    /// Embedding backend used during compression.
    #[arg(long, default_value = "local:default")]
    embedder: String,
    /// Summarization backend used during compression.
    #[arg(long, default_value = "local:default")]
    summarizer: String,
    /// Downstream model that answers the rendered prompts.
    #[arg(long, default_value = "local:default")]
    llm: String,
    /// Optional embedder adding an embedding-cosine score column.
    #[arg(long)]
    semantic: Option<String>,
    /// Token budget for each answer.
    #[arg(long, default_value_t = 64)]
    answer_tokens: usize,
    /// Evaluate a seeded random subset of this size.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// QA prompt override with {context} and {question} placeholders.
    #[arg(long)]
    qa_template: Option<String>,
    /// Summarization prompt override with a {context} placeholder.
    #[arg(long)]
    summarization_template: Option<String>,
    /// Write the metric report (JSON) here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Also write per-record scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compress(args) => run_compress(args),
        Command::Chunk(args) => run_chunk(args),
        Command::Eval(args) => run_eval(args),
    }
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut buf = String::new();
        io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        fs::read_to_string(path).map_err(|e| ScopeError::Input(format!("{path}: {e}")))
    }
}

fn write_output(path: &str, content: &str) -> Result<()> {
    if path == "-" {
        io::stdout().write_all(content.as_bytes())?;
        io::stdout().write_all(b"\n")?;
    } else {
        fs::write(path, content).map_err(|e| ScopeError::Input(format!("{path}: {e}")))?;
    }
    Ok(())
}

fn to_json(value: &impl serde::Serialize) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| ScopeError::Internal(e.to_string()))
}

fn run_compress(args: CompressArgs) -> Result<()> {
    let essay = read_input(&args.input)?;
    let mut cfg = RunConfig::new(
        args.ratio,
        BackendHandle::parse(BackendKind::Embedder, &args.embedder)?,
        BackendHandle::parse(BackendKind::Summarizer, &args.summarizer)?,
    );
    cfg.chunker = args.chunker.to_config();
    cfg.report_path = args.report;
    cfg.seed = args.seed;

    let result = compress(&essay, &cfg)?;
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    write_output(&args.output, &result.compressed_text)?;
    eprintln!(
        "compressed {} -> {} tokens (requested ratio {}, achieved {:.3})",
        result.input_tokens, result.output_tokens, args.ratio, result.achieved_ratio
    );
    Ok(())
}

fn run_chunk(args: ChunkArgs) -> Result<()> {
    let essay = read_input(&args.input)?;
    let cfg = args.chunker.to_config();
    let embedder = BackendHandle::parse(BackendKind::Embedder, &args.embedder)?;
    let tokenizer = default_tokenizer();
    let chunking = semantic_chunk(&essay, &cfg, &embedder, &tokenizer)?;

    let chunks: Vec<serde_json::Value> = chunking
        .chunks
        .iter()
        .map(|c| {
            serde_json::json!({
                "index": c.original_index,
                "tokens": c.token_count,
                "text": c.text,
                "trailing_separator": c.trailing_separator,
            })
        })
        .collect();
    let dump = serde_json::json!({
        "schema": "scope-chunks/1",
        "input_tokens": tokenizer.count(&essay),
        "chunks": chunks,
        "splits": chunking.splits,
        "warnings": chunking.warnings,
    });
    write_output(&args.output, &to_json(&dump)?)
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let corpus = eval::read_jsonl(&args.corpus)?;
    let mut run = RunConfig::new(
        args.ratio,
        BackendHandle::parse(BackendKind::Embedder, &args.embedder)?,
        BackendHandle::parse(BackendKind::Summarizer, &args.summarizer)?,
    );
    run.chunker = args.chunker.to_config();
    run.seed = args.seed;

    let mut cfg = EvalConfig::new(run, BackendHandle::parse(BackendKind::Summarizer, &args.llm)?);
    cfg.answer_tokens = args.answer_tokens;
    cfg.sample = args.sample;
    cfg.seed = args.seed;
    if let Some(spec) = &args.semantic {
        cfg.semantic = Some(BackendHandle::parse(BackendKind::Embedder, spec)?);
    }
    if let Some(template) = args.qa_template {
        cfg.templates.qa = template;
    }
    if let Some(template) = args.summarization_template {
        cfg.templates.summarization = template;
    }

    let report = eval::run_eval(&corpus, &cfg)?;
    let json = to_json(&report)?;
    match &args.report {
        Some(path) => fs::write(path, json + "\n")
            .map_err(|e| ScopeError::Input(format!("{}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        let mut file = fs::File::create(path)
            .map_err(|e| ScopeError::Input(format!("{}: {e}", path.display())))?;
        eval::write_csv(&report, &mut file)?;
    }
    eprintln!(
        "evaluated {} of {} records ({} failed)",
        report.evaluated,
        corpus.len(),
        report.failed
    );
    Ok(())
}
