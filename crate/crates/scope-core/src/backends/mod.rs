//! Embedding and summarization backends.
//!
//! Providers come in three flavors selected by a spec string: `stub:NAME`
//! (deterministic test doubles), `local:MODEL_ID` (in-process models, no
//! network) and `http:URL` (remote service speaking the `/embed` and
//! `/summarize` wire protocol). Everything behind the two traits is
//! swappable; the pipeline only sees handles.

mod hashing;
mod http;
pub(crate) mod local;
mod stub;

pub use http::{HttpEmbedder, HttpOptions, HttpSummarizer};
pub use local::{ExtractiveSummarizer, HashTfEmbedder};
pub use stub::{
    EchoSummarizer, EmptySummarizer, FailingSummarizer, HashEmbedder, RecordingSummarizer,
    TruncateSummarizer,
};

use crate::error::{Result, ScopeError};
use crate::text::{default_tokenizer, TokenizerRef};
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// One embedding; finite values, fixed dimension per provider.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Cosine similarity in f64. Errors on dimension mismatch and on
/// zero-magnitude input; callers guard rather than receive NaN.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(ScopeError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.0.iter().zip(&b.0) {
        dot += f64::from(*x) * f64::from(*y);
        na += f64::from(*x) * f64::from(*x);
        nb += f64::from(*y) * f64::from(*y);
    }
    if na == 0.0 || nb == 0.0 {
        return Err(ScopeError::ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Length-budgeted summarization request.
#[derive(Debug, Clone)]
pub struct SummaryRequest {
    pub text: String,
    /// Upper token budget for the output; positive.
    pub target_tokens: usize,
    /// Soft lower bound; at most `target_tokens`.
    pub min_tokens: usize,
    /// Terms the backend should try to retain verbatim.
    pub keywords: Vec<String>,
}

/// How a summarizer honors the keyword list; recorded in run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeywordMode {
    /// Keywords travel with the request for an instruction-capable model.
    Instruction,
    /// Sentences containing keywords are boosted during extraction.
    SentenceBoost,
    /// Backend ignores keywords (stubs).
    Ignored,
}

pub trait Embedder: Send + Sync {
    /// Stable identifier for reports and the embedding cache.
    fn id(&self) -> String;

    /// Embed a batch. Must be deterministic for deterministic providers and
    /// must return exactly one vector per input, all of equal dimension.
    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    /// Input window in tokens; the pipeline mean-pools longer texts.
    fn max_input_tokens(&self) -> Option<usize> {
        None
    }

    /// Bounded concurrency the provider tolerates.
    fn max_in_flight(&self) -> usize {
        1
    }
}

pub trait Summarizer: Send + Sync {
    fn id(&self) -> String;

    fn summarize(&self, req: &SummaryRequest) -> Result<String>;

    fn keyword_mode(&self) -> KeywordMode {
        KeywordMode::Ignored
    }

    /// Tokenizer whose units this backend's budgets are measured in. The
    /// pipeline adopts it by default so plan targets align with generation.
    fn tokenizer(&self) -> TokenizerRef {
        default_tokenizer()
    }

    fn max_in_flight(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Embedder,
    Summarizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provider {
    Stub,
    Local,
    Http,
}

#[derive(Clone)]
enum BackendImpl {
    Embedder(Arc<dyn Embedder>),
    Summarizer(Arc<dyn Summarizer>),
}

/// A resolved backend: parsed spec string plus the provider behind it.
#[derive(Clone)]
pub struct BackendHandle {
    pub kind: BackendKind,
    pub provider: Provider,
    /// Backend string this handle was parsed from, echoed in reports.
    pub spec: String,
    inner: BackendImpl,
}

impl std::fmt::Debug for BackendHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendHandle")
            .field("kind", &self.kind)
            .field("provider", &self.provider)
            .field("spec", &self.spec)
            .finish()
    }
}

impl BackendHandle {
    /// Resolve a backend spec: `stub:NAME` | `local:MODEL_ID` | `http:URL`.
    ///
    /// Unknown schemes and names are configuration errors; resolution happens
    /// up front so a bad spec fails fast, not mid-run.
    pub fn parse(kind: BackendKind, spec: &str) -> Result<BackendHandle> {
        let (scheme, rest) = spec
            .split_once(':')
            .ok_or_else(|| ScopeError::Config(format!("backend spec {spec:?} has no scheme")))?;
        let handle = match (scheme, kind) {
            ("stub", BackendKind::Embedder) => match rest {
                "hash" => Self::from_embedder(spec, Arc::new(HashEmbedder::default())),
                other => return Err(unknown_name(kind, other)),
            },
            ("stub", BackendKind::Summarizer) => match rest {
                "truncate" => Self::from_summarizer(spec, Arc::new(TruncateSummarizer::default())),
                "empty" => Self::from_summarizer(spec, Arc::new(EmptySummarizer)),
                "echo" => Self::from_summarizer(spec, Arc::new(EchoSummarizer)),
                "fail" => Self::from_summarizer(spec, Arc::new(FailingSummarizer)),
                other => return Err(unknown_name(kind, other)),
            },
            ("local", BackendKind::Embedder) => match rest {
                "hash-tf" | "default" => {
                    Self::from_embedder(spec, Arc::new(HashTfEmbedder::default()))
                }
                other => return Err(unknown_name(kind, other)),
            },
            ("local", BackendKind::Summarizer) => match rest {
                "extractive" | "default" => {
                    Self::from_summarizer(spec, Arc::new(ExtractiveSummarizer::default()))
                }
                other => return Err(unknown_name(kind, other)),
            },
            ("http", _) => {
                let base = http::base_url(spec, rest);
                let opts = HttpOptions::default();
                match kind {
                    BackendKind::Embedder => {
                        Self::from_embedder(spec, Arc::new(HttpEmbedder::new(&base, opts)?))
                    }
                    BackendKind::Summarizer => {
                        Self::from_summarizer(spec, Arc::new(HttpSummarizer::new(&base, opts)?))
                    }
                }
            }
            (other, _) => {
                return Err(ScopeError::Config(format!(
                    "unknown backend scheme {other:?} (expected stub, local or http)"
                )))
            }
        };
        Ok(handle)
    }

    /// Wrap an embedder directly; used by tests and embedding callers that
    /// build providers programmatically.
    pub fn from_embedder(spec: &str, embedder: Arc<dyn Embedder>) -> BackendHandle {
        BackendHandle {
            kind: BackendKind::Embedder,
            provider: provider_of(spec),
            spec: spec.to_string(),
            inner: BackendImpl::Embedder(embedder),
        }
    }

    pub fn from_summarizer(spec: &str, summarizer: Arc<dyn Summarizer>) -> BackendHandle {
        BackendHandle {
            kind: BackendKind::Summarizer,
            provider: provider_of(spec),
            spec: spec.to_string(),
            inner: BackendImpl::Summarizer(summarizer),
        }
    }

    pub fn embedder(&self) -> Result<&Arc<dyn Embedder>> {
        match &self.inner {
            BackendImpl::Embedder(e) => Ok(e),
            BackendImpl::Summarizer(_) => Err(ScopeError::Config(format!(
                "backend {:?} is a summarizer, embedder required",
                self.spec
            ))),
        }
    }

    pub fn summarizer(&self) -> Result<&Arc<dyn Summarizer>> {
        match &self.inner {
            BackendImpl::Summarizer(s) => Ok(s),
            BackendImpl::Embedder(_) => Err(ScopeError::Config(format!(
                "backend {:?} is an embedder, summarizer required",
                self.spec
            ))),
        }
    }
}

fn provider_of(spec: &str) -> Provider {
    match spec.split(':').next() {
        Some("local") => Provider::Local,
        Some("http") => Provider::Http,
        _ => Provider::Stub,
    }
}

fn unknown_name(kind: BackendKind, name: &str) -> ScopeError {
    let what = match kind {
        BackendKind::Embedder => "embedder",
        BackendKind::Summarizer => "summarizer",
    };
    ScopeError::Config(format!("unknown {what} backend name {name:?}"))
}

/// Batch-embed with validation: non-empty input, one finite vector per text,
/// uniform dimension.
pub fn embed_texts(handle: &BackendHandle, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
    if texts.is_empty() {
        return Err(ScopeError::Input("embed_texts called with no texts".into()));
    }
    let embedder = handle.embedder()?;
    let vectors = embedder.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(ScopeError::BackendResponse {
            provider: embedder.id(),
            detail: format!("{} vectors for {} texts", vectors.len(), texts.len()),
        });
    }
    let dim = vectors[0].dim();
    for v in &vectors {
        if v.dim() != dim {
            return Err(ScopeError::DimensionMismatch {
                left: dim,
                right: v.dim(),
            });
        }
        if !v.is_finite() {
            return Err(ScopeError::BackendResponse {
                provider: embedder.id(),
                detail: "non-finite embedding value".into(),
            });
        }
    }
    Ok(vectors)
}

/// Summarize with request validation.
pub fn summarize(handle: &BackendHandle, req: &SummaryRequest) -> Result<String> {
    if req.target_tokens == 0 {
        return Err(ScopeError::Config("summary target of 0 tokens".into()));
    }
    if req.min_tokens > req.target_tokens {
        return Err(ScopeError::Config(format!(
            "min_tokens {} exceeds target_tokens {}",
            req.min_tokens, req.target_tokens
        )));
    }
    handle.summarizer()?.summarize(req)
}

/// Per-run embedding cache wrapper: identical text embeds once per provider.
/// Reads happen under a shared lock; inserts are atomic.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: RwLock<HashMap<String, EmbeddingVector>>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> CachedEmbedder {
        CachedEmbedder {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Embedder for CachedEmbedder {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut out: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.read().unwrap();
            for (i, t) in texts.iter().enumerate() {
                match cache.get(t) {
                    Some(v) => out[i] = Some(v.clone()),
                    None => missing.push(i),
                }
            }
        }
        if !missing.is_empty() {
            // Embed each distinct missing text once.
            let mut distinct: Vec<String> = Vec::new();
            for &i in &missing {
                if !distinct.contains(&texts[i]) {
                    distinct.push(texts[i].clone());
                }
            }
            let fresh = self.inner.embed(&distinct)?;
            if fresh.len() != distinct.len() {
                return Err(ScopeError::BackendResponse {
                    provider: self.inner.id(),
                    detail: format!("{} vectors for {} texts", fresh.len(), distinct.len()),
                });
            }
            let mut cache = self.cache.write().unwrap();
            for (t, v) in distinct.iter().zip(&fresh) {
                cache.insert(t.clone(), v.clone());
            }
            for &i in &missing {
                out[i] = Some(cache[&texts[i]].clone());
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap()).collect())
    }

    fn max_input_tokens(&self) -> Option<usize> {
        self.inner.max_input_tokens()
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }
}
