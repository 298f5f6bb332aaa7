//! End-to-end compression runs.
//!
//! `compress` wires the stages together: embed the whole document, chunk it,
//! score each chunk against the document, extract keywords, allocate the
//! reduction budget, run the summarizer over the plan, and stitch the
//! outputs back together in source order with the original separators. The
//! run produces a serializable report alongside the compressed text.

use crate::allocator::{allocate, CompressionPlan};
use crate::backends::{
    embed_texts, BackendHandle, CachedEmbedder, EmbeddingVector, KeywordMode,
};
use crate::chunker::{score_chunks, semantic_chunk, ChunkerConfig, SplitRecord};
use crate::compressor::{run_plan, ChunkOutcome};
use crate::error::{Result, ScopeError};
use crate::keywords::{extract_keywords, KeywordSet};
use crate::text::TokenizerRef;
use serde::Serialize;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

/// Input sizes outside this band get a warning; the method still runs.
const EXPECTED_TOKEN_RANGE: std::ops::RangeInclusive<usize> = 3_000..=50_000;

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Requested compression ratio (input tokens over output tokens), >= 1.
    pub rho: f64,
    pub chunker: ChunkerConfig,
    pub embedder: BackendHandle,
    pub summarizer: BackendHandle,
    /// Written as JSON after a successful run, when set.
    pub report_path: Option<PathBuf>,
    /// Recorded in the report; reserved for stochastic backends.
    pub seed: u64,
}

impl RunConfig {
    pub fn new(rho: f64, embedder: BackendHandle, summarizer: BackendHandle) -> RunConfig {
        RunConfig {
            rho,
            chunker: ChunkerConfig::default(),
            embedder,
            summarizer,
            report_path: None,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() || self.rho < 1.0 {
            return Err(ScopeError::Config(format!(
                "ratio must be a finite value >= 1, got {}",
                self.rho
            )));
        }
        self.chunker.validate()?;
        self.embedder.embedder()?;
        self.summarizer.summarizer()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigSnapshot {
    pub rho: f64,
    pub chunker: ChunkerConfig,
    pub embedder: String,
    pub summarizer: String,
    pub tokenizer: &'static str,
    pub keyword_mode: KeywordMode,
    pub seed: u64,
}

/// Per-chunk summary row for the report (full chunk text lives in the
/// outcomes).
#[derive(Debug, Clone, Serialize)]
pub struct ChunkReport {
    pub index: usize,
    pub tokens: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelCalls {
    /// Distinct texts sent to the embedder (batched calls count each text).
    pub embedded_texts: usize,
    pub summarizer_calls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub config: ConfigSnapshot,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub achieved_ratio: f64,
    pub plan: CompressionPlan,
    pub chunks: Vec<ChunkReport>,
    pub splits: Vec<SplitRecord>,
    pub keywords: Vec<KeywordSet>,
    pub outcomes: Vec<ChunkOutcome>,
    pub model_calls: ModelCalls,
    /// Plan position where early stop fired, if it did.
    pub early_stop_at: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct CompressionResult {
    pub compressed_text: String,
    pub achieved_ratio: f64,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub config: ConfigSnapshot,
    /// One outcome per chunk, in processing (plan) order.
    pub outcomes: Vec<ChunkOutcome>,
    pub warnings: Vec<String>,
    pub report: RunReport,
}

pub fn compress(essay: &str, cfg: &RunConfig) -> Result<CompressionResult> {
    cfg.validate()?;
    let summarizer_backend = cfg.summarizer.summarizer()?;
    let tokenizer = summarizer_backend.tokenizer();
    let input_tokens = tokenizer.count(essay);
    if input_tokens == 0 {
        return Err(ScopeError::Input("nothing to compress: empty document".into()));
    }

    let mut warnings: Vec<String> = Vec::new();
    if !EXPECTED_TOKEN_RANGE.contains(&input_tokens) {
        warnings.push(format!(
            "document has {input_tokens} tokens, outside the {}..{} range the \
             defaults are tuned for",
            EXPECTED_TOKEN_RANGE.start(),
            EXPECTED_TOKEN_RANGE.end()
        ));
    }

    // All embedding goes through one cache so sentences shared between the
    // chunking pass and the chunk pass are embedded once.
    let cached = Arc::new(CachedEmbedder::new(cfg.embedder.embedder()?.clone()));
    let embedder = BackendHandle::from_embedder(&cfg.embedder.spec, cached.clone());

    let essay_embedding =
        full_context_embedding(essay, &embedder, &tokenizer, input_tokens, &mut warnings)?;

    let mut chunking = semantic_chunk(essay, &cfg.chunker, &embedder, &tokenizer)?;
    warnings.append(&mut chunking.warnings);
    score_chunks(&mut chunking.chunks, &essay_embedding)?;

    let keywords: Vec<KeywordSet> = chunking.chunks.iter().map(extract_keywords).collect();
    let keyword_map: HashMap<usize, KeywordSet> =
        keywords.iter().map(|k| (k.chunk_ref, k.clone())).collect();

    let plan = allocate(&chunking.chunks, cfg.rho)?;
    warnings.extend(plan.warnings.iter().cloned());

    let mut execution = run_plan(&chunking.chunks, &plan, &keyword_map, &cfg.summarizer)?;
    warnings.append(&mut execution.warnings);

    let separators: Vec<String> = chunking
        .chunks
        .iter()
        .map(|c| c.trailing_separator.clone())
        .collect();
    let compressed_text = reassemble(&execution.outcomes, &separators)?;
    let output_tokens = tokenizer.count(&compressed_text);
    let achieved_ratio = if output_tokens > 0 {
        input_tokens as f64 / output_tokens as f64
    } else {
        warnings.push("compressed output is empty".into());
        f64::INFINITY
    };

    let config = ConfigSnapshot {
        rho: cfg.rho,
        chunker: cfg.chunker,
        embedder: cfg.embedder.spec.clone(),
        summarizer: cfg.summarizer.spec.clone(),
        tokenizer: tokenizer.name(),
        keyword_mode: summarizer_backend.keyword_mode(),
        seed: cfg.seed,
    };
    let report = RunReport {
        schema: "scope-report/1",
        config: config.clone(),
        input_tokens,
        output_tokens,
        achieved_ratio,
        chunks: chunking
            .chunks
            .iter()
            .map(|c| ChunkReport {
                index: c.original_index,
                tokens: c.token_count,
                similarity: c.similarity,
            })
            .collect(),
        splits: chunking.splits,
        keywords,
        outcomes: execution.outcomes.clone(),
        model_calls: ModelCalls {
            embedded_texts: cached.len(),
            summarizer_calls: execution.model_calls,
        },
        early_stop_at: execution.early_stop_at,
        plan,
        warnings: warnings.clone(),
    };
    if let Some(path) = &cfg.report_path {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| ScopeError::Internal(format!("report serialization failed: {e}")))?;
        std::fs::write(path, json)
            .map_err(|e| ScopeError::Input(format!("{}: {e}", path.display())))?;
    }

    Ok(CompressionResult {
        compressed_text,
        achieved_ratio,
        input_tokens,
        output_tokens,
        config,
        outcomes: execution.outcomes,
        warnings,
        report,
    })
}

/// Join outcome texts in original-index order, reinstating each chunk's
/// recorded trailing separator. `separators[i]` belongs to original index i.
pub fn reassemble(outcomes: &[ChunkOutcome], separators: &[String]) -> Result<String> {
    if outcomes.len() != separators.len() {
        return Err(ScopeError::Internal(format!(
            "{} outcomes but {} separators",
            outcomes.len(),
            separators.len()
        )));
    }
    let mut slots: Vec<Option<&ChunkOutcome>> = vec![None; outcomes.len()];
    for outcome in outcomes {
        let slot = slots.get_mut(outcome.chunk_ref).ok_or_else(|| {
            ScopeError::Internal(format!("outcome for unknown chunk {}", outcome.chunk_ref))
        })?;
        if slot.replace(outcome).is_some() {
            return Err(ScopeError::Internal(format!(
                "duplicate outcome for chunk {}",
                outcome.chunk_ref
            )));
        }
    }
    let mut out = String::new();
    for (i, slot) in slots.iter().enumerate() {
        let outcome = slot
            .ok_or_else(|| ScopeError::Internal(format!("no outcome for chunk {i}")))?;
        out.push_str(&outcome.output_text);
        out.push_str(&separators[i]);
    }
    Ok(out)
}

/// Whole-document embedding. Documents over the embedder's window are cut
/// into window-sized slices whose embeddings are averaged.
fn full_context_embedding(
    essay: &str,
    embedder: &BackendHandle,
    tokenizer: &TokenizerRef,
    input_tokens: usize,
    warnings: &mut Vec<String>,
) -> Result<EmbeddingVector> {
    let window = embedder.embedder()?.max_input_tokens();
    let window = match window {
        Some(w) if w > 0 && input_tokens > w => w,
        _ => {
            let mut vectors = embed_texts(embedder, &[essay.to_string()])?;
            return Ok(vectors.pop().expect("one vector per text"));
        }
    };
    let mut slices = Vec::new();
    let mut rest = essay;
    while !rest.is_empty() {
        let cut = tokenizer.prefix_bytes(rest, window);
        if cut == 0 {
            break;
        }
        slices.push(rest[..cut].to_string());
        rest = &rest[cut..];
    }
    if slices.is_empty() {
        return Err(ScopeError::Internal(
            "document produced no slices for the context embedding".into(),
        ));
    }
    warnings.push(format!(
        "document ({input_tokens} tokens) exceeds the embedder window ({window}); \
         averaging {} slice embeddings",
        slices.len()
    ));
    let vectors = embed_texts(embedder, &slices)?;
    let dim = vectors[0].dim();
    let mut acc = vec![0.0f64; dim];
    for v in &vectors {
        for (a, x) in acc.iter_mut().zip(&v.0) {
            *a += *x as f64;
        }
    }
    let n = vectors.len() as f64;
    Ok(EmbeddingVector(acc.iter().map(|a| (a / n) as f32).collect()))
}
