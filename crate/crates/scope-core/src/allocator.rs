//! Reduction budgeting: how many tokens to remove from each chunk.
//!
//! The total reduction for a target ratio is spread across chunks in
//! proportion to `length * (1 - similarity)`, so long low-relevance chunks
//! absorb most of the cut. Every chunk keeps a small floor of tokens, and
//! fractional shares are rounded with the largest-remainder rule so the
//! integer reductions sum exactly to the requested total.

use crate::chunker::Chunk;
use crate::error::{Result, ScopeError};
use serde::Serialize;

/// Tokens a chunk always keeps: 5% of its length, at least 5, at most all
/// of it.
pub fn keep_floor(len: usize) -> usize {
    len.min(5usize.max(len.div_ceil(20)))
}

/// Total tokens to remove so the output lands at `total / ratio`.
pub fn compute_reduction(total_tokens: usize, ratio: f64) -> Result<usize> {
    if !ratio.is_finite() || ratio < 1.0 {
        return Err(ScopeError::Config(format!(
            "compression ratio must be a finite value >= 1, got {ratio}"
        )));
    }
    let kept = (total_tokens as f64 / ratio).floor() as usize;
    Ok(total_tokens - kept)
}

/// Per-chunk share of the reduction budget.
#[derive(Debug, Clone, Serialize)]
pub struct PlanEntry {
    /// `original_index` of the chunk this entry covers.
    pub chunk_index: usize,
    pub length: usize,
    pub similarity: f64,
    pub weight: f64,
    /// Tokens to remove from this chunk.
    pub reduction: usize,
    /// Tokens the chunk's replacement should have.
    pub target_len: usize,
}

/// Entries are ordered by ascending similarity (ties by original index), the
/// order chunks are later compressed in.
#[derive(Debug, Clone, Serialize)]
pub struct CompressionPlan {
    pub total_tokens: usize,
    pub delta_total: usize,
    pub target_total: usize,
    pub entries: Vec<PlanEntry>,
    pub warnings: Vec<String>,
}

pub fn allocate(chunks: &[Chunk], ratio: f64) -> Result<CompressionPlan> {
    let total: usize = chunks.iter().map(|c| c.token_count).sum();
    if chunks.is_empty() || total == 0 {
        return Err(ScopeError::Input("nothing to allocate: no tokens".into()));
    }
    let requested = compute_reduction(total, ratio)?;
    let mut warnings = Vec::new();

    let mut order: Vec<&Chunk> = chunks.iter().collect();
    order.sort_by(|a, b| {
        a.similarity
            .total_cmp(&b.similarity)
            .then(a.original_index.cmp(&b.original_index))
    });

    let caps: Vec<usize> = order
        .iter()
        .map(|c| c.token_count - keep_floor(c.token_count))
        .collect();
    let cap_sum: usize = caps.iter().sum();
    let delta_total = if requested > cap_sum {
        warnings.push(format!(
            "requested reduction of {requested} tokens exceeds the {cap_sum} \
             available above per-chunk floors; compressing to the floors instead"
        ));
        cap_sum
    } else {
        requested
    };

    let mut weights: Vec<f64> = order
        .iter()
        .map(|c| c.token_count as f64 * (1.0 - c.similarity).max(0.0))
        .collect();
    if delta_total > 0 && weights.iter().sum::<f64>() <= f64::EPSILON {
        warnings.push(
            "every chunk scored fully relevant; weighting reductions by length".into(),
        );
        for (w, c) in weights.iter_mut().zip(&order) {
            *w = c.token_count as f64;
        }
    }

    let reductions = distribute(delta_total, &weights, &caps, &mut warnings);
    let entries = order
        .iter()
        .zip(weights)
        .zip(reductions)
        .map(|((c, weight), reduction)| PlanEntry {
            chunk_index: c.original_index,
            length: c.token_count,
            similarity: c.similarity,
            weight,
            reduction,
            target_len: c.token_count - reduction,
        })
        .collect();
    Ok(CompressionPlan {
        total_tokens: total,
        delta_total,
        target_total: total - delta_total,
        entries,
        warnings,
    })
}

/// Split `delta` into integer parts proportional to `weights`, each part at
/// most its cap. Entries whose proportional share exceeds their cap are
/// pinned there and the remainder is re-spread; the final fractional shares
/// round by largest remainder. Requires `delta <= sum(caps)`.
fn distribute(
    delta: usize,
    weights: &[f64],
    caps: &[usize],
    warnings: &mut Vec<String>,
) -> Vec<usize> {
    let n = weights.len();
    let mut out = vec![0usize; n];
    if delta == 0 {
        return out;
    }
    let mut active: Vec<usize> = (0..n).filter(|&i| caps[i] > 0).collect();
    let mut weights = weights.to_vec();
    let mut remaining = delta;
    let shares = loop {
        let wsum: f64 = active.iter().map(|&i| weights[i]).sum();
        if wsum <= f64::EPSILON {
            // Relevance weights ran dry before the budget did; spread the
            // rest by remaining capacity.
            warnings.push(
                "reduction weights exhausted before the budget; spreading the rest by capacity"
                    .into(),
            );
            for &i in &active {
                weights[i] = caps[i] as f64;
            }
            continue;
        }
        let shares: Vec<(usize, f64)> = active
            .iter()
            .map(|&i| (i, remaining as f64 * weights[i] / wsum))
            .collect();
        let saturated: Vec<usize> = shares
            .iter()
            .filter(|&&(i, q)| q > caps[i] as f64)
            .map(|&(i, _)| i)
            .collect();
        if saturated.is_empty() {
            break shares;
        }
        for &i in &saturated {
            out[i] = caps[i];
            remaining -= caps[i];
        }
        active.retain(|i| !saturated.contains(i));
    };

    let mut leftover = remaining;
    let mut fractional: Vec<(usize, f64)> = Vec::with_capacity(shares.len());
    for &(i, q) in &shares {
        let base = q.floor() as usize;
        out[i] = base;
        leftover -= base;
        fractional.push((i, q - base as f64));
    }
    fractional.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(weights[b.0].total_cmp(&weights[a.0]))
            .then(a.0.cmp(&b.0))
    });
    for (i, _) in fractional {
        if leftover == 0 {
            break;
        }
        if out[i] < caps[i] {
            out[i] += 1;
            leftover -= 1;
        }
    }
    debug_assert_eq!(leftover, 0);
    out
}
