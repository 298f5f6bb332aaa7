//! Deterministic stub backends.
//!
//! These exist so the whole pipeline can be exercised bit-for-bit
//! reproducibly: the hash embedder derives a vector from the text content
//! alone, and the truncate summarizer hits its token budget exactly. The
//! empty/failing stubs drive the fallback paths.

use super::hashing::{fnv1a64, SplitMix64};
use super::{Embedder, EmbeddingVector, Summarizer, SummaryRequest};
use crate::error::{Result, ScopeError};
use crate::text::{default_tokenizer, TokenizerRef};
use std::sync::{Arc, Mutex};

/// Content-addressed pseudo-random embeddings: equal text gives an identical
/// vector, different text an (almost surely) different one.
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> HashEmbedder {
        HashEmbedder { dim: dim.max(1) }
    }
}

impl Default for HashEmbedder {
    fn default() -> HashEmbedder {
        HashEmbedder::new(64)
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        format!("stub:hash/{}", self.dim)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut stream = SplitMix64(fnv1a64(t.as_bytes()));
                EmbeddingVector((0..self.dim).map(|_| stream.next_unit()).collect())
            })
            .collect())
    }

    fn max_in_flight(&self) -> usize {
        8
    }
}

/// Returns exactly the first `target_tokens` tokens of the input.
pub struct TruncateSummarizer {
    tokenizer: TokenizerRef,
}

impl Default for TruncateSummarizer {
    fn default() -> TruncateSummarizer {
        TruncateSummarizer {
            tokenizer: default_tokenizer(),
        }
    }
}

impl Summarizer for TruncateSummarizer {
    fn id(&self) -> String {
        "stub:truncate".into()
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String> {
        Ok(self
            .tokenizer
            .truncate(&req.text, req.target_tokens)
            .to_string())
    }

    fn tokenizer(&self) -> TokenizerRef {
        self.tokenizer.clone()
    }
}

/// Always produces an empty generation (the "model returned nothing" path).
pub struct EmptySummarizer;

impl Summarizer for EmptySummarizer {
    fn id(&self) -> String {
        "stub:empty".into()
    }

    fn summarize(&self, _req: &SummaryRequest) -> Result<String> {
        Ok(String::new())
    }
}

/// Echoes the input unchanged; handy as a downstream generator in eval tests.
pub struct EchoSummarizer;

impl Summarizer for EchoSummarizer {
    fn id(&self) -> String {
        "stub:echo".into()
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String> {
        Ok(req.text.clone())
    }
}

/// Fails every call, as an unreachable backend would after its retries.
pub struct FailingSummarizer;

impl Summarizer for FailingSummarizer {
    fn id(&self) -> String {
        "stub:fail".into()
    }

    fn summarize(&self, _req: &SummaryRequest) -> Result<String> {
        Err(ScopeError::BackendUnavailable {
            provider: self.id(),
            attempts: 1,
            detail: "stub configured to fail".into(),
        })
    }
}

/// Wraps a summarizer and records every request, so tests can assert on call
/// order and budgets.
pub struct RecordingSummarizer {
    inner: Arc<dyn Summarizer>,
    log: Mutex<Vec<SummaryRequest>>,
}

impl RecordingSummarizer {
    pub fn new(inner: Arc<dyn Summarizer>) -> RecordingSummarizer {
        RecordingSummarizer {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<SummaryRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.log.lock().unwrap().len()
    }
}

impl Summarizer for RecordingSummarizer {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String> {
        self.log.lock().unwrap().push(req.clone());
        self.inner.summarize(req)
    }

    fn keyword_mode(&self) -> super::KeywordMode {
        self.inner.keyword_mode()
    }

    fn tokenizer(&self) -> TokenizerRef {
        self.inner.tokenizer()
    }
}
