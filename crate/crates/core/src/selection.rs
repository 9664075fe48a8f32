//! Token and chunk selection policies.
//!
//! All ranking is on `f32` scores with the lowest index winning ties, so every
//! policy is a deterministic function of its inputs.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kvstore::{BudgetConfig, ChunkedKVStore};
use crate::numerics::{dot, TensorF32};

/// How per-query-head dot products combine into one score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum HeadAggregation {
    #[default]
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub chunk_ids: BTreeSet<usize>,
    /// Selected tokens plus every resident token.
    pub token_ids: BTreeSet<usize>,
    /// Ranking score of every chunk (of every token for token-level policies).
    pub scores: Vec<f32>,
    pub loaded_fraction: f64,
    pub n_tokens: usize,
}

impl SelectionResult {
    fn new(chunk_ids: BTreeSet<usize>, token_ids: BTreeSet<usize>, scores: Vec<f32>, n: usize) -> Self {
        let loaded_fraction = token_ids.len() as f64 / n as f64;
        Self { chunk_ids, token_ids, scores, loaded_fraction, n_tokens: n }
    }
}

/// Aggregated score of every row of `rows` (`[m × D]`) against `queries` (`[H × D]`).
pub fn group_scores(rows: &TensorF32, queries: &TensorF32, agg: HeadAggregation) -> Result<Vec<f32>> {
    let (_, d) = rows.shape2()?;
    let (h, qd) = queries.shape2()?;
    if qd != d || h == 0 {
        return Err(Error::shape(format!("queries {:?} against rows {:?}", queries.dims(), rows.dims())));
    }
    Ok(rows
        .row_iter()
        .map(|r| {
            let mut s = dot(queries.row(0), r);
            for q in queries.row_iter().skip(1) {
                let v = dot(q, r);
                s = match agg {
                    HeadAggregation::Sum => s + v,
                    HeadAggregation::Max => s.max(v),
                };
            }
            s
        })
        .collect())
}

fn by_score_desc(scores: &[f32]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The `m` best of `candidates`, best first.
pub(crate) fn top_indices(scores: &[f32], mut candidates: Vec<usize>, m: usize) -> Vec<usize> {
    let cmp = by_score_desc(scores);
    if m < candidates.len() {
        if m == 0 {
            return Vec::new();
        }
        candidates.select_nth_unstable_by(m - 1, &cmp);
        candidates.truncate(m);
    }
    candidates.sort_unstable_by(&cmp);
    candidates
}

fn non_resident_chunks(store: &ChunkedKVStore) -> Vec<usize> {
    (0..store.n_chunks()).filter(|&c| store.chunk_range(c).any(|t| !store.is_resident(t))).collect()
}

pub fn select_by_landmarks(
    store: &ChunkedKVStore,
    queries: &TensorF32,
    budget: &BudgetConfig,
) -> Result<SelectionResult> {
    select_by_landmarks_with(store, queries, budget, HeadAggregation::Sum)
}

/// Loads the `ceil(f·n / chunk)` best-scoring non-resident chunks.
pub fn select_by_landmarks_with(
    store: &ChunkedKVStore,
    queries: &TensorF32,
    budget: &BudgetConfig,
    agg: HeadAggregation,
) -> Result<SelectionResult> {
    let n = store.n_tokens();
    let scores = group_scores(store.landmark_matrix(), queries, agg)?;
    let m = budget.sparse_tokens(n).div_ceil(store.chunk_size());
    let chunk_ids: BTreeSet<usize> = top_indices(&scores, non_resident_chunks(store), m).into_iter().collect();
    let mut token_ids: BTreeSet<usize> = store.resident_tokens().into_iter().collect();
    for &c in &chunk_ids {
        token_ids.extend(store.chunk_range(c));
    }
    Ok(SelectionResult::new(chunk_ids, token_ids, scores, n))
}

/// Exact top-`k` tokens by summed query–key dot product.
pub fn oracle_select(keys: &TensorF32, queries: &TensorF32, k: usize) -> Result<SelectionResult> {
    let n = keys.rows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("oracle k={k} outside 1..={n}")));
    }
    let scores = group_scores(keys, queries, HeadAggregation::Sum)?;
    let top: BTreeSet<usize> = top_indices(&scores, (0..n).collect(), k).into_iter().collect();
    Ok(SelectionResult::new(top.clone(), top, scores, n))
}

/// Exact top-`k` among non-resident tokens of `store`, plus the resident set.
pub fn oracle_select_in_store(store: &ChunkedKVStore, queries: &TensorF32, k: usize) -> Result<SelectionResult> {
    let n = store.n_tokens();
    let scores = group_scores(store.keys(), queries, HeadAggregation::Sum)?;
    let free: Vec<usize> = (0..n).filter(|&t| !store.is_resident(t)).collect();
    let top: BTreeSet<usize> = top_indices(&scores, free, k).into_iter().collect();
    let mut token_ids: BTreeSet<usize> = store.resident_tokens().into_iter().collect();
    token_ids.extend(&top);
    let chunk_ids = top.iter().map(|&t| store.chunk_of(t)).collect();
    Ok(SelectionResult::new(chunk_ids, token_ids, scores, n))
}

/// Per-token scores `repeat(q·L̂) + q·R̂`, summed over the head group.
pub fn residual_scores(store: &ChunkedKVStore, queries: &TensorF32) -> Result<Vec<f32>> {
    let r = store.residual_matrix()?;
    let landmark = group_scores(store.landmark_matrix(), queries, HeadAggregation::Sum)?;
    let residual = group_scores(r, queries, HeadAggregation::Sum)?;
    Ok(residual.iter().enumerate().map(|(i, &s)| landmark[store.chunk_of(i)] + s).collect())
}

/// Landmark-filtered residual top-`k`.
///
/// The best `candidate_multiplier · ceil(k / chunk)` non-resident chunks by
/// landmark score become candidates; residual scores are computed for their
/// non-resident tokens only and the best `k` are loaded.
pub fn approx_topk_residual(
    store: &ChunkedKVStore,
    queries: &TensorF32,
    k: usize,
    candidate_multiplier: usize,
) -> Result<SelectionResult> {
    if candidate_multiplier == 0 {
        return Err(Error::invalid("candidate_multiplier must be >= 1"));
    }
    let r = store.residual_matrix()?;
    let n = store.n_tokens();
    let landmark = group_scores(store.landmark_matrix(), queries, HeadAggregation::Sum)?;
    let m = candidate_multiplier.saturating_mul(k.div_ceil(store.chunk_size()));
    let candidates = top_indices(&landmark, non_resident_chunks(store), m);

    let mut token_scores = vec![f32::NEG_INFINITY; n];
    let mut pool = Vec::new();
    for &c in &candidates {
        for t in store.chunk_range(c).filter(|&t| !store.is_resident(t)) {
            let rs = queries.row_iter().fold(0.0f32, |acc, q| acc + dot(q, r.row(t)));
            token_scores[t] = landmark[c] + rs;
            pool.push(t);
        }
    }
    let top = top_indices(&token_scores, pool, k);
    let chunk_ids = top.iter().map(|&t| store.chunk_of(t)).collect();
    let mut token_ids: BTreeSet<usize> = store.resident_tokens().into_iter().collect();
    token_ids.extend(top);
    Ok(SelectionResult::new(chunk_ids, token_ids, landmark, n))
}

/// `|selected ∩ oracle| / |oracle|` over token ids.
pub fn recall(selected: &SelectionResult, oracle: &SelectionResult) -> Result<f64> {
    if oracle.token_ids.is_empty() {
        return Err(Error::invalid("recall against an empty oracle set"));
    }
    if selected.n_tokens != oracle.n_tokens {
        return Err(Error::shape(format!(
            "selection over {} tokens vs oracle over {}",
            selected.n_tokens, oracle.n_tokens
        )));
    }
    let hit = oracle.token_ids.intersection(&selected.token_ids).count();
    Ok(hit as f64 / oracle.token_ids.len() as f64)
}
