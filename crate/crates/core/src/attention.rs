//! Single-step decode attention: exact over all tokens, or renormalized over a selection.

use crate::error::{Error, Result};
use crate::kvstore::ChunkedKVStore;
use crate::numerics::TensorF32;
use crate::selection::SelectionResult;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `[H × D]`.
    pub output: TensorF32,
    pub tokens_used: usize,
    pub rel_error_vs_full: Option<f64>,
}

/// `softmax(q·Kᵀ/√D)·V` per query head, accumulated in 64-bit.
pub fn full_attention(queries: &TensorF32, keys: &TensorF32, values: &TensorF32) -> Result<AttentionOutput> {
    let output = attend(queries, keys, values)?;
    Ok(AttentionOutput { output, tokens_used: keys.rows(), rel_error_vs_full: None })
}

fn attend(queries: &TensorF32, keys: &TensorF32, values: &TensorF32) -> Result<TensorF32> {
    let (h, d) = queries.shape2()?;
    let (n, kd) = keys.shape2()?;
    let (vn, vd) = values.shape2()?;
    if n == 0 {
        return Err(Error::invalid("attention over zero tokens"));
    }
    if kd != d || vn != n {
        return Err(Error::shape(format!(
            "queries {:?}, keys {:?}, values {:?}",
            queries.dims(),
            keys.dims(),
            values.dims()
        )));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = Vec::with_capacity(h * vd);
    let mut logits = vec![0.0f64; n];
    let mut acc = vec![0.0f64; vd];
    for q in queries.row_iter() {
        for (l, k) in logits.iter_mut().zip(keys.row_iter()) {
            *l = q.iter().zip(k).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() * scale;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0f64;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        acc.fill(0.0);
        for (&w, v) in logits.iter().zip(values.row_iter()) {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += w * x as f64;
            }
        }
        out.extend(acc.iter().map(|a| (a / total) as f32));
    }
    TensorF32::matrix(h, vd, out)
}

/// Attention over `sel.token_ids` only. Resident tokens are read from the fast
/// tier at full precision, the rest through the store's slow-tier scheme.
pub fn sparse_attention(
    queries: &TensorF32,
    store: &ChunkedKVStore,
    sel: &SelectionResult,
    baseline: Option<&AttentionOutput>,
) -> Result<AttentionOutput> {
    if sel.token_ids.is_empty() {
        return Err(Error::invalid("sparse attention over an empty selection"));
    }
    if sel.n_tokens != store.n_tokens() {
        return Err(Error::shape(format!("selection over {} tokens, store holds {}", sel.n_tokens, store.n_tokens())));
    }
    let ids: Vec<usize> = sel.token_ids.iter().copied().collect();
    let loaded = store.load_tokens(&ids)?;
    let d = store.head_dim();
    let mut keys = Vec::with_capacity(ids.len() * d);
    let mut values = Vec::with_capacity(ids.len() * d);
    let mut next = 0;
    for &t in &ids {
        if store.is_resident(t) {
            keys.extend_from_slice(store.keys().row(t));
            values.extend_from_slice(store.values().row(t));
        } else {
            keys.extend_from_slice(loaded.keys.row(next));
            values.extend_from_slice(loaded.values.row(next));
            next += 1;
        }
    }
    let output = attend(queries, &TensorF32::matrix(ids.len(), d, keys)?, &TensorF32::matrix(ids.len(), d, values)?)?;
    let rel_error_vs_full = baseline.map(|b| relative_error(&output, &b.output)).transpose()?;
    Ok(AttentionOutput { output, tokens_used: ids.len(), rel_error_vs_full })
}

/// `‖approx − exact‖₂ / ‖exact‖₂`; the absolute norm when `exact` is zero.
pub fn relative_error(approx: &TensorF32, exact: &TensorF32) -> Result<f64> {
    let diff = approx.sub(exact)?.frobenius_norm();
    let norm = exact.frobenius_norm();
    Ok(if norm > 0.0 { diff / norm } else { diff })
}
