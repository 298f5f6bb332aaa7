//! Plan execution: per-chunk summarization with early stop.
//!
//! Chunks are processed in plan order (ascending similarity), each squeezed
//! to its budget by the summarizer. The loop tracks the reduction actually
//! achieved, not the one planned; once it reaches the plan's delta the rest
//! of the chunks pass through verbatim. Summaries that come back overlong
//! get one retry with a tightened budget, suspiciously short ones are
//! replaced by their keywords, and a failing summarizer never costs a chunk
//! its slot in the output.

use crate::allocator::{CompressionPlan, PlanEntry};
use crate::backends::{summarize, BackendHandle, SummaryRequest};
use crate::chunker::Chunk;
use crate::error::{Result, ScopeError};
use crate::keywords::{substitute_if_truncated, KeywordSet};
use serde::Serialize;
use std::collections::HashMap;

/// A summary may exceed its budget by this factor before a retry.
const OVERSHOOT_TOLERANCE: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkAction {
    Summarized,
    KeptVerbatim,
    SubstitutedKeywords,
    EarlyStopped,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChunkOutcome {
    /// `original_index` of the chunk.
    pub chunk_ref: usize,
    pub action: ChunkAction,
    pub output_text: String,
    pub achieved_tokens: usize,
    pub requested_tokens: usize,
    /// Summarizer invocations made for this chunk.
    pub model_calls: usize,
    /// Present when something unusual happened (fallback, retry, overshoot).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug)]
pub struct PlanExecution {
    /// One outcome per chunk, in the order they were processed.
    pub outcomes: Vec<ChunkOutcome>,
    pub model_calls: usize,
    /// Plan position at which early stop fired, if it did.
    pub early_stop_at: Option<usize>,
    pub warnings: Vec<String>,
}

/// Compress a single chunk to its planned budget. Only misuse (a plan entry
/// for a different chunk, or a non-summarizer handle) is an error; the
/// summarizer failing falls back to keywords or the original text.
pub fn compress_chunk(
    chunk: &Chunk,
    entry: &PlanEntry,
    kw: &KeywordSet,
    summarizer: &BackendHandle,
) -> Result<(ChunkOutcome, Vec<String>)> {
    if entry.chunk_index != chunk.original_index {
        return Err(ScopeError::Internal(format!(
            "plan entry for chunk {} applied to chunk {}",
            entry.chunk_index, chunk.original_index
        )));
    }
    let backend = summarizer.summarizer()?;
    let tokenizer = backend.tokenizer();
    let count = |s: &str| tokenizer.count(s);

    if entry.target_len >= chunk.token_count {
        return Ok((
            ChunkOutcome {
                chunk_ref: chunk.original_index,
                action: ChunkAction::KeptVerbatim,
                achieved_tokens: count(&chunk.text),
                requested_tokens: entry.target_len,
                output_text: chunk.text.clone(),
                model_calls: 0,
                note: None,
            },
            Vec::new(),
        ));
    }

    let target = entry.target_len;
    let request = SummaryRequest {
        text: chunk.text.clone(),
        target_tokens: target,
        min_tokens: target.div_ceil(2),
        keywords: kw.terms.clone(),
    };
    let mut model_calls = 1;
    let mut note = None;
    let summary = match summarize(summarizer, &request) {
        Ok(first) => {
            let achieved = count(&first);
            if achieved as f64 > OVERSHOOT_TOLERANCE * target as f64 {
                // One retry with the budget tightened by the overage.
                let tightened = target.saturating_sub(achieved - target).max(1);
                let retry = SummaryRequest {
                    target_tokens: tightened,
                    min_tokens: tightened.div_ceil(2),
                    ..request
                };
                model_calls += 1;
                match summarize(summarizer, &retry) {
                    Ok(second) => {
                        note = Some(format!(
                            "summary overshot {target} tokens ({achieved}); retried at {tightened}"
                        ));
                        Ok(second)
                    }
                    Err(_) => {
                        note = Some(format!(
                            "summary overshot {target} tokens ({achieved}); retry failed, keeping it"
                        ));
                        Ok(first)
                    }
                }
            } else {
                Ok(first)
            }
        }
        Err(e) => Err(e),
    };

    let mut warnings = Vec::new();
    let outcome = match summary {
        Ok(text) if !text.trim().is_empty() => {
            match substitute_if_truncated(&text, kw, target, &tokenizer) {
                Some(subst) => ChunkOutcome {
                    chunk_ref: chunk.original_index,
                    action: ChunkAction::SubstitutedKeywords,
                    achieved_tokens: count(&subst),
                    requested_tokens: target,
                    output_text: subst,
                    model_calls,
                    note: Some("summary fell below the truncation floor".into()),
                },
                None => ChunkOutcome {
                    chunk_ref: chunk.original_index,
                    action: ChunkAction::Summarized,
                    achieved_tokens: count(&text),
                    requested_tokens: target,
                    output_text: text,
                    model_calls,
                    note,
                },
            }
        }
        other => {
            let reason = match other {
                Ok(_) => "summarizer returned empty output".to_string(),
                Err(e) => format!("summarizer failed: {e}"),
            };
            if kw.is_empty() {
                warnings.push(format!(
                    "chunk {} kept verbatim: {reason} and no keywords to fall back on",
                    chunk.original_index
                ));
                ChunkOutcome {
                    chunk_ref: chunk.original_index,
                    action: ChunkAction::KeptVerbatim,
                    achieved_tokens: count(&chunk.text),
                    requested_tokens: target,
                    output_text: chunk.text.clone(),
                    model_calls,
                    note: Some(reason),
                }
            } else {
                let subst = substitute_if_truncated("", kw, target, &tokenizer)
                    .expect("non-empty keyword set substitutes an empty summary");
                ChunkOutcome {
                    chunk_ref: chunk.original_index,
                    action: ChunkAction::SubstitutedKeywords,
                    achieved_tokens: count(&subst),
                    requested_tokens: target,
                    output_text: subst,
                    model_calls,
                    note: Some(reason),
                }
            }
        }
    };
    Ok((outcome, warnings))
}

/// Run a whole plan. Keywords are looked up by chunk index; chunks without
/// an entry in the map are treated as having none.
pub fn run_plan(
    chunks: &[Chunk],
    plan: &CompressionPlan,
    keywords: &HashMap<usize, KeywordSet>,
    summarizer: &BackendHandle,
) -> Result<PlanExecution> {
    let by_index: HashMap<usize, &Chunk> =
        chunks.iter().map(|c| (c.original_index, c)).collect();
    if by_index.len() != chunks.len() {
        return Err(ScopeError::Internal(
            "duplicate chunk indices in plan input".into(),
        ));
    }
    if plan.entries.len() != chunks.len() {
        return Err(ScopeError::Internal(format!(
            "plan covers {} chunks but {} were given",
            plan.entries.len(),
            chunks.len()
        )));
    }
    let tokenizer = summarizer.summarizer()?.tokenizer();

    let mut outcomes = Vec::with_capacity(chunks.len());
    let mut warnings = Vec::new();
    let mut model_calls = 0;
    let mut achieved_reduction: i64 = 0;
    let mut early_stop_at = None;
    for (pos, entry) in plan.entries.iter().enumerate() {
        let chunk = *by_index.get(&entry.chunk_index).ok_or_else(|| {
            ScopeError::Internal(format!("plan entry for unknown chunk {}", entry.chunk_index))
        })?;
        if early_stop_at.is_none() && achieved_reduction >= plan.delta_total as i64 {
            early_stop_at = Some(pos);
        }
        if early_stop_at.is_some() {
            outcomes.push(ChunkOutcome {
                chunk_ref: chunk.original_index,
                action: ChunkAction::EarlyStopped,
                achieved_tokens: tokenizer.count(&chunk.text),
                requested_tokens: entry.target_len,
                output_text: chunk.text.clone(),
                model_calls: 0,
                note: None,
            });
            continue;
        }
        let empty = KeywordSet::empty(entry.chunk_index);
        let kw = keywords.get(&entry.chunk_index).unwrap_or(&empty);
        let (outcome, w) = compress_chunk(chunk, entry, kw, summarizer)?;
        achieved_reduction += chunk.token_count as i64 - outcome.achieved_tokens as i64;
        model_calls += outcome.model_calls;
        warnings.extend(w);
        outcomes.push(outcome);
    }
    Ok(PlanExecution {
        outcomes,
        model_calls,
        early_stop_at,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::allocate;
    use crate::backends::{BackendKind, RecordingSummarizer, TruncateSummarizer};
    use std::sync::Arc;

    fn words(tag: &str, n: usize) -> String {
        (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
    }

    fn chunk(index: usize, tag: &str, tokens: usize, sim: f64) -> Chunk {
        Chunk {
            text: words(tag, tokens),
            original_index: index,
            token_count: tokens,
            embedding: None,
            similarity: sim,
            trailing_separator: " ".into(),
        }
    }

    fn entry(index: usize, length: usize, target: usize) -> PlanEntry {
        PlanEntry {
            chunk_index: index,
            length,
            similarity: 0.5,
            weight: 1.0,
            reduction: length.saturating_sub(target),
            target_len: target,
        }
    }

    fn handle(spec: &str) -> BackendHandle {
        BackendHandle::parse(BackendKind::Summarizer, spec).unwrap()
    }

    #[test]
    fn generous_target_keeps_chunk_verbatim() {
        let c = chunk(0, "w", 50, 0.5);
        let recorder = Arc::new(RecordingSummarizer::new(Arc::new(TruncateSummarizer::default())));
        let h = BackendHandle::from_summarizer("stub:recording", recorder.clone());
        let (out, _) =
            compress_chunk(&c, &entry(0, 50, 60), &KeywordSet::empty(0), &h).unwrap();
        assert_eq!(out.action, ChunkAction::KeptVerbatim);
        assert_eq!(out.output_text, c.text);
        assert_eq!(out.model_calls, 0);
        assert_eq!(recorder.call_count(), 0);
    }

    #[test]
    fn truncate_stub_hits_target_exactly() {
        let c = chunk(0, "w", 50, 0.5);
        let (out, _) =
            compress_chunk(&c, &entry(0, 50, 20), &KeywordSet::empty(0), &handle("stub:truncate"))
                .unwrap();
        assert_eq!(out.action, ChunkAction::Summarized);
        assert_eq!(out.achieved_tokens, 20);
        assert_eq!(out.requested_tokens, 20);
        assert_eq!(out.model_calls, 1);
    }

    #[test]
    fn empty_summary_with_keywords_substitutes() {
        let c = chunk(0, "w", 50, 0.5);
        let kw = KeywordSet {
            chunk_ref: 0,
            terms: vec!["Nobel Prize".into(), "1903".into()],
        };
        let (out, warnings) =
            compress_chunk(&c, &entry(0, 50, 20), &kw, &handle("stub:empty")).unwrap();
        assert_eq!(out.action, ChunkAction::SubstitutedKeywords);
        assert_eq!(out.output_text, "Nobel Prize; 1903");
        assert!(warnings.is_empty());
    }

    #[test]
    fn empty_summary_without_keywords_keeps_verbatim_with_warning() {
        let c = chunk(0, "w", 50, 0.5);
        let (out, warnings) =
            compress_chunk(&c, &entry(0, 50, 20), &KeywordSet::empty(0), &handle("stub:empty"))
                .unwrap();
        assert_eq!(out.action, ChunkAction::KeptVerbatim);
        assert_eq!(out.output_text, c.text);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn failing_summarizer_falls_back() {
        let c = chunk(0, "w", 50, 0.5);
        let kw = KeywordSet {
            chunk_ref: 0,
            terms: vec!["Paris".into()],
        };
        let (out, _) = compress_chunk(&c, &entry(0, 50, 20), &kw, &handle("stub:fail")).unwrap();
        assert_eq!(out.action, ChunkAction::SubstitutedKeywords);
        assert_eq!(out.output_text, "Paris");

        let (out, warnings) =
            compress_chunk(&c, &entry(0, 50, 20), &KeywordSet::empty(0), &handle("stub:fail"))
                .unwrap();
        assert_eq!(out.action, ChunkAction::KeptVerbatim);
        assert!(warnings[0].contains("failed"));
    }

    #[test]
    fn overshooting_summary_is_retried_once() {
        // The echo stub always returns the full 50 tokens against a target
        // of 20, so one retry fires and the second result is accepted.
        let c = chunk(0, "w", 50, 0.5);
        let (out, _) =
            compress_chunk(&c, &entry(0, 50, 20), &KeywordSet::empty(0), &handle("stub:echo"))
                .unwrap();
        assert_eq!(out.model_calls, 2);
        assert_eq!(out.action, ChunkAction::Summarized);
        assert_eq!(out.achieved_tokens, 50);
        assert!(out.note.unwrap().contains("overshot"));
    }

    #[test]
    fn plan_order_drives_model_call_order() {
        let chunks = vec![
            chunk(0, "a", 300, 0.5),
            chunk(1, "b", 300, 0.9),
            chunk(2, "c", 300, 0.1),
        ];
        let plan = allocate(&chunks, 2.0).unwrap();
        let order: Vec<usize> = plan.entries.iter().map(|e| e.chunk_index).collect();
        assert_eq!(order, vec![2, 0, 1]);
        let recorder = Arc::new(RecordingSummarizer::new(Arc::new(TruncateSummarizer::default())));
        let h = BackendHandle::from_summarizer("stub:recording", recorder.clone());
        run_plan(&chunks, &plan, &HashMap::new(), &h).unwrap();
        let seen: Vec<String> = recorder
            .requests()
            .iter()
            .map(|r| r.text.split_whitespace().next().unwrap().to_string())
            .collect();
        let expect: Vec<String> = vec!["c0".into(), "a0".into(), "b0".into()];
        assert_eq!(seen, expect);
    }

    #[test]
    fn zero_delta_early_stops_everything() {
        let chunks = vec![chunk(0, "a", 100, 0.2), chunk(1, "b", 100, 0.8)];
        let plan = allocate(&chunks, 1.0).unwrap();
        let run = run_plan(&chunks, &plan, &HashMap::new(), &handle("stub:truncate")).unwrap();
        assert_eq!(run.early_stop_at, Some(0));
        assert_eq!(run.model_calls, 0);
        assert!(run
            .outcomes
            .iter()
            .all(|o| o.action == ChunkAction::EarlyStopped));
        assert!(run
            .outcomes
            .iter()
            .all(|o| o.achieved_tokens == 100));
    }

    #[test]
    fn early_stop_spares_the_high_similarity_suffix() {
        // The first chunk alone over-achieves the delta: an empty summary
        // with keywords removes ~198 tokens against a delta of 100.
        let chunks = vec![
            chunk(0, "a", 200, 0.1),
            chunk(1, "b", 200, 0.6),
            chunk(2, "c", 200, 0.9),
        ];
        let mut plan = allocate(&chunks, 1.2).unwrap();
        assert_eq!(plan.entries[0].chunk_index, 0);
        plan.delta_total = 100;
        let kw: HashMap<usize, KeywordSet> = [(
            0,
            KeywordSet {
                chunk_ref: 0,
                terms: vec!["Answer".into()],
            },
        )]
        .into();
        let run = run_plan(&chunks, &plan, &kw, &handle("stub:empty")).unwrap();
        assert_eq!(run.early_stop_at, Some(1));
        assert_eq!(run.outcomes[0].action, ChunkAction::SubstitutedKeywords);
        for o in &run.outcomes[1..] {
            assert_eq!(o.action, ChunkAction::EarlyStopped);
            assert!(o.output_text.starts_with(['b', 'c']));
        }
    }

    #[test]
    fn truncate_stub_yields_exact_plan_total() {
        let chunks = vec![
            chunk(0, "a", 400, 0.3),
            chunk(1, "b", 250, 0.7),
            chunk(2, "c", 350, 0.5),
        ];
        let plan = allocate(&chunks, 2.0).unwrap();
        let run = run_plan(&chunks, &plan, &HashMap::new(), &handle("stub:truncate")).unwrap();
        let total: usize = run.outcomes.iter().map(|o| o.achieved_tokens).sum();
        assert_eq!(total, plan.target_total);
        assert_eq!(run.outcomes.len(), chunks.len());
        let mut refs: Vec<usize> = run.outcomes.iter().map(|o| o.chunk_ref).collect();
        refs.sort_unstable();
        assert_eq!(refs, vec![0, 1, 2]);
    }

    #[test]
    fn mismatched_plan_is_an_internal_error() {
        let chunks = vec![chunk(0, "a", 100, 0.2)];
        let plan = allocate(&chunks, 2.0).unwrap();
        let other = vec![chunk(0, "a", 100, 0.2), chunk(1, "b", 100, 0.2)];
        assert!(run_plan(&other, &plan, &HashMap::new(), &handle("stub:truncate")).is_err());
        let c = chunk(1, "b", 100, 0.2);
        assert!(
            compress_chunk(&c, &entry(0, 100, 50), &KeywordSet::empty(0), &handle("stub:echo"))
                .is_err()
        );
    }
}
