use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

use super::{matmul, TensorF32};

const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Rank-`r` factorisation `A ≈ left · right`.
///
/// `right` holds the leading right singular vectors as orthonormal rows
/// (`[r × D]`), `left` the per-row coefficients `U·Σ` (`[n × r]`). This is the
/// two-projection layout a low-rank key cache stores.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub left: TensorF32,
    pub right: TensorF32,
    pub singular_values: Vec<f32>,
    pub rank: usize,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Result<TensorF32> {
        matmul(&self.left, &self.right)
    }

    /// Largest deviation of `right · rightᵀ` from the identity.
    pub fn basis_orthonormality_error(&self) -> f64 {
        let d = self.right.cols();
        let mut worst = 0.0f64;
        for i in 0..self.rank {
            for j in 0..self.rank {
                let (a, b) = (self.right.row(i), self.right.row(j));
                let s: f64 = (0..d).map(|p| a[p] as f64 * b[p] as f64).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }
}

/// Best rank-`rank` approximation of `k` in Frobenius norm.
///
/// Works on the smaller Gram matrix (`KᵀK` or `KKᵀ`) in 64-bit and takes its
/// leading eigenvectors, so the result is the exact truncated SVD up to
/// floating point and is fully deterministic. Eigenvector signs are fixed by
/// making the largest-magnitude component positive.
pub fn truncated_svd(k: &TensorF32, rank: usize) -> Result<SvdFactors> {
    let (n, d) = k.shape2()?;
    let max_rank = n.min(d);
    if rank == 0 || rank > max_rank {
        return Err(Error::invalid(format!("svd rank {rank} outside 1..={max_rank}")));
    }
    if n >= d {
        let gram = gram_columns(k);
        let (values, vectors) = leading_eigenpairs(gram, rank)?;
        // right = Vᵀ, left = K·V.
        let mut right = vec![0.0f32; rank * d];
        for j in 0..rank {
            for p in 0..d {
                right[j * d + p] = vectors[(p, j)] as f32;
            }
        }
        let mut left = vec![0.0f32; n * rank];
        for i in 0..n {
            let row = k.row(i);
            for j in 0..rank {
                let mut s = 0.0f64;
                for p in 0..d {
                    s += row[p] as f64 * vectors[(p, j)];
                }
                left[i * rank + j] = s as f32;
            }
        }
        Ok(SvdFactors {
            left: TensorF32::matrix(n, rank, left)?,
            right: TensorF32::matrix(rank, d, right)?,
            singular_values: values.iter().map(|v| v.max(0.0).sqrt() as f32).collect(),
            rank,
        })
    } else {
        let gram = gram_rows(k);
        let (values, vectors) = leading_eigenpairs(gram, rank)?;
        let sigma: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let cutoff = sigma[0] * 1e-12;
        let mut left = vec![0.0f32; n * rank];
        let mut right = vec![0.0f32; rank * d];
        for j in 0..rank {
            if sigma[j] <= cutoff {
                continue;
            }
            for i in 0..n {
                left[i * rank + j] = (vectors[(i, j)] * sigma[j]) as f32;
            }
            for p in 0..d {
                let mut s = 0.0f64;
                for i in 0..n {
                    s += vectors[(i, j)] * k.data()[i * d + p] as f64;
                }
                right[j * d + p] = (s / sigma[j]) as f32;
            }
        }
        Ok(SvdFactors {
            left: TensorF32::matrix(n, rank, left)?,
            right: TensorF32::matrix(rank, d, right)?,
            singular_values: sigma.iter().map(|&s| s as f32).collect(),
            rank,
        })
    }
}

/// `KᵀK` accumulated row by row over the upper triangle.
fn gram_columns(k: &TensorF32) -> DMatrix<f64> {
    let d = k.cols();
    let mut g = vec![0.0f64; d * d];
    let mut buf = vec![0.0f64; d];
    for row in k.row_iter() {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = v as f64;
        }
        for j in 0..d {
            let aj = buf[j];
            if aj == 0.0 {
                continue;
            }
            let dst = &mut g[j * d + j..(j + 1) * d];
            for (o, &al) in dst.iter_mut().zip(&buf[j..]) {
                *o += aj * al;
            }
        }
    }
    symmetric_from_upper(g, d)
}

/// `KKᵀ`.
fn gram_rows(k: &TensorF32) -> DMatrix<f64> {
    let n = k.rows();
    let mut g = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = k.row(i).iter().zip(k.row(j)).map(|(a, b)| *a as f64 * *b as f64).sum();
            g[i * n + j] = s;
        }
    }
    symmetric_from_upper(g, n)
}

fn symmetric_from_upper(g: Vec<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i <= j { g[i * d + j] } else { g[j * d + i] })
}

fn leading_eigenpairs(gram: DMatrix<f64>, rank: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = gram.nrows();
    let eig = SymmetricEigen::try_new(gram, 1e-14, EIGEN_MAX_ITERATIONS)
        .ok_or(Error::NoConvergence { what: "symmetric eigensolver", iterations: EIGEN_MAX_ITERATIONS })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(rank);
    let mut vectors = DMatrix::<f64>::zeros(dim, rank);
    for (j, &src) in order.iter().take(rank).enumerate() {
        values.push(eig.eigenvalues[src]);
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..dim {
            vectors[(i, j)] = sign * col[i];
        }
    }
    Ok((values, vectors))
}
