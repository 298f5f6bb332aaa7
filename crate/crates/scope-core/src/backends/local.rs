//! In-process model backends: no network, no model downloads.
//!
//! `HashTfEmbedder` is a signed feature-hashing bag-of-words vectorizer, so
//! cosine similarity tracks lexical overlap. `ExtractiveSummarizer` is a
//! frequency-scored extractive summarizer with token-budget packing; its
//! output length follows the requested target closely, which is what the
//! ratio contract of the pipeline needs from a local model.

use super::hashing::fnv1a64;
use super::{Embedder, EmbeddingVector, KeywordMode, Summarizer, SummaryRequest};
use crate::error::Result;
use crate::text::{default_tokenizer, split_sentences, TokenizerRef};
use std::collections::HashMap;

pub(crate) const STOPWORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "but", "if", "of", "to", "in", "on", "at",
    "by", "for", "with", "from", "as", "is", "are", "was", "were", "be",
    "been", "being", "it", "its", "this", "that", "these", "those", "he",
    "she", "they", "them", "his", "her", "their", "we", "our", "you", "your",
    "i", "not", "no", "so", "do", "does", "did", "have", "has", "had", "will",
    "would", "can", "could", "than", "then", "there", "here", "when", "where",
    "which", "who", "what", "while", "about", "into", "over", "after",
    "before", "between", "during", "through", "up", "down", "out", "off",
    "all", "any", "both", "each", "few", "more", "most", "other", "some",
    "such", "only", "own", "same", "very", "just", "also", "because",
];

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Signed feature hashing over lowercase word tokens, L2-normalized.
pub struct HashTfEmbedder {
    dim: usize,
}

impl HashTfEmbedder {
    pub fn new(dim: usize) -> HashTfEmbedder {
        HashTfEmbedder { dim: dim.max(8) }
    }
}

impl Default for HashTfEmbedder {
    fn default() -> HashTfEmbedder {
        HashTfEmbedder::new(256)
    }
}

impl Embedder for HashTfEmbedder {
    fn id(&self) -> String {
        format!("local:hash-tf/{}", self.dim)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0f32; self.dim];
                for w in words(t) {
                    let h = fnv1a64(w.as_bytes());
                    let idx = (h % self.dim as u64) as usize;
                    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                    v[idx] += sign;
                }
                let norm = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in &mut v {
                        *x = (*x as f64 / norm) as f32;
                    }
                }
                EmbeddingVector(v)
            })
            .collect())
    }

    fn max_in_flight(&self) -> usize {
        8
    }
}

/// Frequency-scored extractive summarization under a hard token budget.
///
/// Sentences are scored by summed content-word frequency (length-damped);
/// sentences mentioning a requested keyword score higher. Selection packs
/// whole sentences greedily in score order, then fills the remaining budget
/// with a truncated sentence when the leftover is worth carrying (or when
/// the output would otherwise fall under `min_tokens`). Output keeps source
/// order.
pub struct ExtractiveSummarizer {
    tokenizer: TokenizerRef,
}

/// Leftover budget at or above this many tokens gets filled with a truncated
/// sentence, keeping achieved length close to the target.
const FILL_THRESHOLD: usize = 8;

impl Default for ExtractiveSummarizer {
    fn default() -> ExtractiveSummarizer {
        ExtractiveSummarizer {
            tokenizer: default_tokenizer(),
        }
    }
}

impl Summarizer for ExtractiveSummarizer {
    fn id(&self) -> String {
        "local:extractive".into()
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String> {
        let total = self.tokenizer.count(&req.text);
        if total <= req.target_tokens {
            return Ok(req.text.clone());
        }
        let sentences = split_sentences(&req.text);
        let mut freq: HashMap<String, f64> = HashMap::new();
        for w in words(&req.text) {
            if w.len() > 1 && !STOPWORDS.contains(&w.as_str()) {
                *freq.entry(w).or_insert(0.0) += 1.0;
            }
        }
        let keywords_lower: Vec<String> =
            req.keywords.iter().map(|k| k.to_lowercase()).collect();
        let mut scored: Vec<(usize, f64, usize)> = sentences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let tokens = self.tokenizer.count(&s.text).max(1);
                let base: f64 = words(&s.text)
                    .map(|w| freq.get(&w).copied().unwrap_or(0.0))
                    .sum();
                let lower = s.text.to_lowercase();
                let hits = keywords_lower
                    .iter()
                    .filter(|k| lower.contains(k.as_str()))
                    .count();
                let score = base / (tokens as f64).sqrt() * (1.0 + hits as f64);
                (i, score, tokens)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });

        let mut remaining = req.target_tokens;
        let mut selected: Vec<(usize, String)> = Vec::new();
        for &(i, _, tokens) in &scored {
            if tokens <= remaining {
                selected.push((i, sentences[i].text.clone()));
                remaining -= tokens;
            }
        }
        let packed = req.target_tokens - remaining;
        if remaining >= FILL_THRESHOLD || packed < req.min_tokens {
            let taken: Vec<usize> = selected.iter().map(|(i, _)| *i).collect();
            if let Some(&(i, _, _)) = scored.iter().find(|(i, _, _)| !taken.contains(i)) {
                let cut = self.tokenizer.truncate(&sentences[i].text, remaining);
                if !cut.is_empty() {
                    selected.push((i, cut.to_string()));
                }
            }
        }
        selected.sort_by_key(|(i, _)| *i);
        let parts: Vec<&str> = selected.iter().map(|(_, t)| t.as_str()).collect();
        Ok(parts.join(" "))
    }

    fn keyword_mode(&self) -> KeywordMode {
        KeywordMode::SentenceBoost
    }

    fn tokenizer(&self) -> TokenizerRef {
        self.tokenizer.clone()
    }
}
