//! Three-level semantic chunking.
//!
//! Sections that fit the token cap become chunks directly; oversized sections
//! descend into paragraphs, and oversized paragraphs are split at sentence
//! level: a greedy window grows up to `max_token`, candidate cut points are
//! the sentence gaps whose adjacent-embedding similarity dips below `tau`,
//! and the deepest dip wins (ties prefer the most balanced cut). Without a
//! candidate the window ends where it stands. A single sentence larger than
//! the cap is hard-split at token boundaries. Afterwards adjacent tiny
//! chunks are merged and a too-short trailing remainder is folded back or
//! rebalanced against the previous chunk.

use crate::backends::{cosine_similarity, embed_texts, BackendHandle, EmbeddingVector};
use crate::error::{Result, ScopeError};
use crate::text::{split_paragraphs, split_sections, split_sentences, Segment, TokenizerRef};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChunkerConfig {
    /// Hard upper bound on chunk size, in tokens.
    pub max_token: usize,
    /// Preferred lower bound; only a final remainder may fall below it.
    pub min_token: usize,
    /// Similarity threshold: a gap with adjacent similarity below this is a
    /// candidate split point.
    pub tau: f64,
    /// Adjacent chunks both under this size get merged.
    pub tiny_merge_threshold: usize,
}

impl Default for ChunkerConfig {
    fn default() -> ChunkerConfig {
        ChunkerConfig {
            max_token: 800,
            min_token: 200,
            tau: 0.5,
            tiny_merge_threshold: 100,
        }
    }
}

impl ChunkerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_token == 0 || self.min_token >= self.max_token {
            return Err(ScopeError::Config(format!(
                "chunk bounds invalid: min_token {} must be below max_token {}",
                self.min_token, self.max_token
            )));
        }
        if !(-1.0..=1.0).contains(&self.tau) || !self.tau.is_finite() {
            return Err(ScopeError::Config(format!(
                "tau {} outside [-1, 1]",
                self.tau
            )));
        }
        if self.tiny_merge_threshold > self.min_token {
            return Err(ScopeError::Config(format!(
                "tiny_merge_threshold {} above min_token {}",
                self.tiny_merge_threshold, self.min_token
            )));
        }
        Ok(())
    }
}

/// A contiguous piece of the input document.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub text: String,
    /// Position in the original document order, 0-based, gap-free.
    pub original_index: usize,
    pub token_count: usize,
    pub embedding: Option<EmbeddingVector>,
    /// Relevance to the whole document in [0, 1]; 0 until scored.
    pub similarity: f64,
    /// Whitespace that followed this chunk in the source.
    pub trailing_separator: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    /// Cut at a similarity dip below tau.
    CandidateDip,
    /// No candidate in the window; cut at the greedy window end.
    ForcedEnd,
    /// Token-boundary split inside an oversized sentence.
    HardSplit,
}

/// One sentence-level cut decision, exported for run reports. `position` is
/// the index of the unit the cut fell before, within its paragraph (after
/// any hard pre-splitting of oversized sentences).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SplitRecord {
    pub position: usize,
    pub kind: SplitKind,
}

#[derive(Debug, Default)]
pub struct Chunking {
    pub chunks: Vec<Chunk>,
    pub splits: Vec<SplitRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Piece {
    text: String,
    sep: String,
    count: usize,
}

/// Split one oversized paragraph into chunks (Alg. 2). The paragraph is
/// treated as a flat sentence sequence; callers handle paragraphs that
/// already fit within `max_token`.
pub fn chunk_paragraph(
    paragraph: &str,
    cfg: &ChunkerConfig,
    embedder: &BackendHandle,
    tokenizer: &TokenizerRef,
) -> Result<Chunking> {
    cfg.validate()?;
    let (pieces, splits, warnings) = paragraph_pieces(paragraph, cfg, embedder, tokenizer)?;
    finish_chunks(pieces, splits, warnings, embedder)
}

/// Chunk a whole document: sections, then paragraphs, then sentence windows,
/// then a tiny-chunk merge pass. Chunk embeddings are populated; relevance
/// scores are not (see [`score_chunks`]).
pub fn semantic_chunk(
    essay: &str,
    cfg: &ChunkerConfig,
    embedder: &BackendHandle,
    tokenizer: &TokenizerRef,
) -> Result<Chunking> {
    cfg.validate()?;
    if tokenizer.count(essay) == 0 {
        return Err(ScopeError::Input("cannot chunk an empty document".into()));
    }
    let mut pieces: Vec<Piece> = Vec::new();
    let mut splits: Vec<SplitRecord> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    for section in split_sections(essay) {
        let sec_count = tokenizer.count(&section.text);
        if sec_count <= cfg.max_token {
            pieces.push(Piece {
                text: section.text,
                sep: section.trailing_separator,
                count: sec_count,
            });
            continue;
        }
        let paragraphs = split_paragraphs(&section.text);
        let last = paragraphs.len() - 1;
        for (pi, para) in paragraphs.into_iter().enumerate() {
            let para_count = tokenizer.count(&para.text);
            let mut emitted = if para_count <= cfg.max_token {
                vec![Piece {
                    text: para.text,
                    sep: para.trailing_separator,
                    count: para_count,
                }]
            } else {
                let (p, s, w) = paragraph_pieces(&para.text, cfg, embedder, tokenizer)?;
                splits.extend(s);
                warnings.extend(w);
                let mut p = p;
                if let Some(tail) = p.last_mut() {
                    tail.sep.push_str(&para.trailing_separator);
                }
                p
            };
            if pi == last {
                if let Some(tail) = emitted.last_mut() {
                    tail.sep.push_str(&section.trailing_separator);
                }
            }
            pieces.extend(emitted);
        }
    }
    let pieces = merge_tiny(pieces, cfg, tokenizer);
    finish_chunks(pieces, splits, warnings, embedder)
}

/// Populate `similarity` on every chunk: cosine against the whole-document
/// embedding, negatives clamped to 0.
pub fn score_chunks(chunks: &mut [Chunk], essay_embedding: &EmbeddingVector) -> Result<()> {
    for chunk in chunks.iter_mut() {
        let embedding = chunk.embedding.as_ref().ok_or_else(|| {
            ScopeError::Internal(format!(
                "chunk {} has no embedding to score",
                chunk.original_index
            ))
        })?;
        let cos = cosine_similarity(embedding, essay_embedding)?;
        chunk.similarity = cos.clamp(0.0, 1.0);
    }
    Ok(())
}

fn finish_chunks(
    pieces: Vec<Piece>,
    splits: Vec<SplitRecord>,
    warnings: Vec<String>,
    embedder: &BackendHandle,
) -> Result<Chunking> {
    let texts: Vec<String> = pieces.iter().map(|p| p.text.clone()).collect();
    let embeddings = embed_texts(embedder, &texts)?;
    let chunks = pieces
        .into_iter()
        .zip(embeddings)
        .enumerate()
        .map(|(i, (p, e))| Chunk {
            text: p.text,
            original_index: i,
            token_count: p.count,
            embedding: Some(e),
            similarity: 0.0,
            trailing_separator: p.sep,
        })
        .collect();
    Ok(Chunking {
        chunks,
        splits,
        warnings,
    })
}

/// Sentence-window splitting of one oversized paragraph.
fn paragraph_pieces(
    paragraph: &str,
    cfg: &ChunkerConfig,
    embedder: &BackendHandle,
    tokenizer: &TokenizerRef,
) -> Result<(Vec<Piece>, Vec<SplitRecord>, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut splits = Vec::new();

    // Units: sentences, with oversized ones hard-split up front so every
    // unit fits max_token.
    let mut units: Vec<Segment> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for sentence in split_sentences(paragraph) {
        let count = tokenizer.count(&sentence.text);
        if count <= cfg.max_token {
            units.push(sentence);
            counts.push(count);
            continue;
        }
        warnings.push(format!(
            "hard-split a {count}-token sentence (max_token {})",
            cfg.max_token
        ));
        let before = units.len();
        hard_split(&sentence, cfg.max_token, tokenizer, &mut units, &mut counts);
        for cut in before + 1..units.len() {
            splits.push(SplitRecord {
                position: cut,
                kind: SplitKind::HardSplit,
            });
        }
    }
    if units.is_empty() {
        return Ok((Vec::new(), splits, warnings));
    }

    // Adjacent similarities decide candidate cut points.
    let sims: Vec<f64> = if units.len() > 1 {
        let texts: Vec<String> = units.iter().map(|u| u.text.clone()).collect();
        let embeddings = embed_texts(embedder, &texts)?;
        embeddings
            .windows(2)
            .map(|w| cosine_similarity(&w[0], &w[1]))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let n = units.len();
    let total_at = |from: usize, to: usize| counts[from..to].iter().sum::<usize>();
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut start = 0usize;
    while start < n {
        let remaining = total_at(start, n);
        if remaining < cfg.min_token && !bounds.is_empty() {
            settle_remainder(&mut bounds, &mut splits, &counts, cfg, start, n);
            break;
        }
        let mut end = start + 1;
        let mut acc = counts[start];
        while end < n && acc + counts[end] <= cfg.max_token {
            acc += counts[end];
            end += 1;
        }
        if end == n {
            bounds.push((start, n));
            break;
        }
        // Deepest qualifying dip in (start, end]; ties go to the cut closest
        // to the middle of the window.
        let mut best: Option<(usize, f64, usize)> = None;
        for cut in start + 1..=end {
            if sims[cut - 1] >= cfg.tau {
                continue;
            }
            let size = total_at(start, cut);
            if size < cfg.min_token || size > cfg.max_token {
                continue;
            }
            let balance = size.abs_diff(acc / 2);
            let better = match best {
                None => true,
                Some((_, dip, bal)) => {
                    sims[cut - 1] < dip - 1e-12
                        || ((sims[cut - 1] - dip).abs() <= 1e-12 && balance < bal)
                }
            };
            if better {
                best = Some((cut, sims[cut - 1], balance));
            }
        }
        let (cut, kind) = match best {
            Some((cut, _, _)) => (cut, SplitKind::CandidateDip),
            None => (end, SplitKind::ForcedEnd),
        };
        bounds.push((start, cut));
        splits.push(SplitRecord {
            position: cut,
            kind,
        });
        start = cut;
    }

    let pieces = bounds
        .into_iter()
        .map(|(a, b)| assemble_piece(&units[a..b], total_at(a, b)))
        .collect();
    Ok((pieces, splits, warnings))
}

/// Handle a trailing remainder shorter than `min_token`: fold it into the
/// previous chunk when the combined size fits, otherwise move sentences back
/// from the previous chunk until both sides fit (preferring both at or above
/// `min_token`). If nothing works the remainder stands as a short final
/// chunk.
fn settle_remainder(
    bounds: &mut Vec<(usize, usize)>,
    splits: &mut Vec<SplitRecord>,
    counts: &[usize],
    cfg: &ChunkerConfig,
    start: usize,
    n: usize,
) {
    let (a, b) = bounds.pop().expect("caller checked bounds is non-empty");
    debug_assert_eq!(b, start);
    let total = |from: usize, to: usize| counts[from..to].iter().sum::<usize>();
    if total(a, n) <= cfg.max_token {
        bounds.push((a, n));
        if matches!(splits.last(), Some(s) if s.position == b) {
            splits.pop();
        }
        return;
    }
    let strict = |k: usize| {
        total(a, k) <= cfg.max_token
            && total(k, n) <= cfg.max_token
            && total(a, k) >= cfg.min_token
            && total(k, n) >= cfg.min_token
    };
    let relaxed = |k: usize| total(a, k) <= cfg.max_token && total(k, n) <= cfg.max_token;
    let pick = (a + 1..b)
        .rev()
        .find(|&k| strict(k))
        .or_else(|| (a + 1..b).rev().find(|&k| relaxed(k)));
    match pick {
        Some(k) => {
            bounds.push((a, k));
            bounds.push((k, n));
            if let Some(last) = splits.last_mut() {
                if last.position == b {
                    last.position = k;
                    last.kind = SplitKind::ForcedEnd;
                }
            }
        }
        None => {
            bounds.push((a, b));
            bounds.push((b, n));
        }
    }
}

/// Token-boundary split of one sentence into pieces of at most `max` tokens.
/// Whitespace at each cut moves into the leading piece's separator.
fn hard_split(
    sentence: &Segment,
    max: usize,
    tokenizer: &TokenizerRef,
    units: &mut Vec<Segment>,
    counts: &mut Vec<usize>,
) {
    let mut offset = 0usize;
    let mut rest = sentence.text.as_str();
    loop {
        let remaining = tokenizer.count(rest);
        if remaining <= max {
            units.push(Segment {
                kind: sentence.kind,
                text: rest.to_string(),
                trailing_separator: sentence.trailing_separator.clone(),
                start_offset: sentence.start_offset + offset,
            });
            counts.push(remaining);
            return;
        }
        let cut = tokenizer.prefix_bytes(rest, max);
        let (head, tail) = rest.split_at(cut);
        let ws = tail.len() - tail.trim_start().len();
        units.push(Segment {
            kind: sentence.kind,
            text: head.to_string(),
            trailing_separator: tail[..ws].to_string(),
            start_offset: sentence.start_offset + offset,
        });
        counts.push(max);
        offset += cut + ws;
        rest = &tail[ws..];
    }
}

fn assemble_piece(units: &[Segment], count: usize) -> Piece {
    let mut text = String::new();
    for unit in &units[..units.len() - 1] {
        text.push_str(&unit.text);
        text.push_str(&unit.trailing_separator);
    }
    let last = &units[units.len() - 1];
    text.push_str(&last.text);
    Piece {
        text,
        sep: last.trailing_separator.clone(),
        count,
    }
}

/// Merge runs of adjacent chunks that are all under the tiny threshold, as
/// long as the merged chunk stays within `max_token`.
fn merge_tiny(pieces: Vec<Piece>, cfg: &ChunkerConfig, tokenizer: &TokenizerRef) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        if let Some(last) = out.last_mut() {
            if last.count < cfg.tiny_merge_threshold && piece.count < cfg.tiny_merge_threshold {
                let mut combined = String::with_capacity(
                    last.text.len() + last.sep.len() + piece.text.len(),
                );
                combined.push_str(&last.text);
                combined.push_str(&last.sep);
                combined.push_str(&piece.text);
                let count = tokenizer.count(&combined);
                if count <= cfg.max_token {
                    last.text = combined;
                    last.sep = piece.sep;
                    last.count = count;
                    continue;
                }
            }
        }
        out.push(piece);
    }
    out
}
