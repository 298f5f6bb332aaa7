//! Remote backends speaking the JSON wire protocol.
//!
//! `POST {base}/embed    {"texts": [..]}            -> {"vectors": [[..]], "dim": n}`
//! `POST {base}/summarize {"text", "max_tokens", "min_tokens", "keywords"} -> {"summary"}`
//!
//! Any non-200 status or transport failure is retryable: 3 retries with
//! exponential backoff starting at 0.5 s by default.

use super::{Embedder, EmbeddingVector, KeywordMode, Summarizer, SummaryRequest};
use crate::error::{Result, ScopeError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    /// Embedder input window in tokens, when the service has one.
    pub window: Option<usize>,
}

impl Default for HttpOptions {
    fn default() -> HttpOptions {
        HttpOptions {
            retries: 3,
            initial_backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(30),
            window: None,
        }
    }
}

/// `http://host` specs are their own base URL; `http:URL` also accepts an
/// arbitrary URL after the scheme tag.
pub(crate) fn base_url(spec: &str, rest: &str) -> String {
    let base = if rest.starts_with("//") { spec } else { rest };
    base.trim_end_matches('/').to_string()
}

fn build_client(opts: &HttpOptions) -> Result<reqwest::blocking::Client> {
    reqwest::blocking::Client::builder()
        .timeout(opts.timeout)
        .build()
        .map_err(|e| ScopeError::Config(format!("http client: {e}")))
}

fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    client: &reqwest::blocking::Client,
    url: &str,
    body: &Req,
    opts: &HttpOptions,
    provider: &str,
) -> Result<Resp> {
    let attempts = opts.retries + 1;
    let mut backoff = opts.initial_backoff;
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            thread::sleep(backoff);
            backoff *= 2;
        }
        match client.post(url).json(body).send() {
            Ok(resp) if resp.status().is_success() => {
                return resp.json::<Resp>().map_err(|e| ScopeError::BackendResponse {
                    provider: provider.to_string(),
                    detail: e.to_string(),
                });
            }
            Ok(resp) => last = format!("status {}", resp.status()),
            Err(e) => last = e.to_string(),
        }
    }
    Err(ScopeError::BackendUnavailable {
        provider: provider.to_string(),
        attempts,
        detail: last,
    })
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
    dim: usize,
}

pub struct HttpEmbedder {
    base: String,
    client: reqwest::blocking::Client,
    opts: HttpOptions,
}

impl HttpEmbedder {
    pub fn new(base: &str, opts: HttpOptions) -> Result<HttpEmbedder> {
        Ok(HttpEmbedder {
            base: base.trim_end_matches('/').to_string(),
            client: build_client(&opts)?,
            opts,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> String {
        format!("http:{}/embed", self.base)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let url = format!("{}/embed", self.base);
        let resp: EmbedResponse = post_json(
            &self.client,
            &url,
            &EmbedRequest { texts },
            &self.opts,
            &self.id(),
        )?;
        for v in &resp.vectors {
            if v.len() != resp.dim {
                return Err(ScopeError::BackendResponse {
                    provider: self.id(),
                    detail: format!("vector of dim {} but dim field says {}", v.len(), resp.dim),
                });
            }
        }
        Ok(resp.vectors.into_iter().map(EmbeddingVector).collect())
    }

    fn max_input_tokens(&self) -> Option<usize> {
        self.opts.window
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}

#[derive(Serialize)]
struct SummarizeRequest<'a> {
    text: &'a str,
    max_tokens: usize,
    min_tokens: usize,
    keywords: &'a [String],
}

#[derive(Deserialize)]
struct SummarizeResponse {
    summary: String,
}

pub struct HttpSummarizer {
    base: String,
    client: reqwest::blocking::Client,
    opts: HttpOptions,
}

impl HttpSummarizer {
    pub fn new(base: &str, opts: HttpOptions) -> Result<HttpSummarizer> {
        Ok(HttpSummarizer {
            base: base.trim_end_matches('/').to_string(),
            client: build_client(&opts)?,
            opts,
        })
    }
}

impl Summarizer for HttpSummarizer {
    fn id(&self) -> String {
        format!("http:{}/summarize", self.base)
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String> {
        let url = format!("{}/summarize", self.base);
        let resp: SummarizeResponse = post_json(
            &self.client,
            &url,
            &SummarizeRequest {
                text: &req.text,
                max_tokens: req.target_tokens,
                min_tokens: req.min_tokens,
                keywords: &req.keywords,
            },
            &self.opts,
            &self.id(),
        )?;
        Ok(resp.summary)
    }

    fn keyword_mode(&self) -> KeywordMode {
        KeywordMode::Instruction
    }

    fn max_in_flight(&self) -> usize {
        4
    }
}
