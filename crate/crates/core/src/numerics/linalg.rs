use crate::error::{Error, Result};

use super::TensorF32;

const LANES: usize = 8;

/// Dot product with a fixed summation order.
///
/// Products are accumulated into eight interleaved lanes which are then folded
/// left to right, so the result is identical on every call for the same build.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    let mut s = 0.0f32;
    for v in acc {
        s += v;
    }
    s + tail
}

/// `a [m×k] · b [k×n] -> [m×n]`, accumulating over `k` in ascending order.
pub fn matmul(a: &TensorF32, b: &TensorF32) -> Result<TensorF32> {
    let (m, k) = a.shape2()?;
    let (k2, n) = b.shape2()?;
    if k != k2 {
        return Err(Error::shape(format!("matmul inner dims {k} vs {k2}")));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    finite(vec![m, n], out)
}

/// `a [m×k] · bᵀ` where `b` is `[n×k]`, i.e. all pairwise row dot products.
pub fn matmul_transposed(a: &TensorF32, b: &TensorF32) -> Result<TensorF32> {
    let (m, k) = a.shape2()?;
    let (n, k2) = b.shape2()?;
    if k != k2 {
        return Err(Error::shape(format!("matmul_transposed inner dims {k} vs {k2}")));
    }
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let ar = a.row(i);
        for j in 0..n {
            out.push(dot(ar, b.row(j)));
        }
    }
    finite(vec![m, n], out)
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(x: &TensorF32) -> Result<TensorF32> {
    let (m, n) = x.shape2()?;
    if n == 0 {
        return Err(Error::invalid("softmax over an empty row"));
    }
    let mut out = Vec::with_capacity(m * n);
    for row in x.row_iter() {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let exps: Vec<f64> = row.iter().map(|&v| ((v - max) as f64).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| (e / sum) as f32));
    }
    finite(vec![m, n], out)
}

fn finite(dims: Vec<usize>, data: Vec<f32>) -> Result<TensorF32> {
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(TensorF32::from_parts_unchecked(dims, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> TensorF32 {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        TensorF32::matrix(rows, cols, data).unwrap()
    }

    fn naive_matmul(a: &TensorF32, b: &TensorF32) -> Vec<f64> {
        let (m, k) = a.shape2().unwrap();
        let (_, n) = b.shape2().unwrap();
        let mut out = vec![0.0f64; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0f64;
                for p in 0..k {
                    s += a.data()[i * k + p] as f64 * b.data()[p * n + j] as f64;
                }
                out[i * n + j] = s;
            }
        }
        out
    }

    #[test]
    fn identity_times_matrix() {
        let m = TensorF32::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&TensorF32::identity(2), &m).unwrap(), m);
        assert_eq!(matmul(&m, &TensorF32::identity(2)).unwrap(), m);
    }

    #[test]
    fn orthogonal_pick() {
        let a = TensorF32::from_rows(&[[1.0, 0.0]]).unwrap();
        let b = TensorF32::from_rows(&[[0.0], [5.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[0.0]);
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(7, 5, &mut rng);
        let b = random(5, 3, &mut rng);
        let got = matmul(&a, &b).unwrap();
        assert_eq!(got.dims(), &[7, 3]);
        for (g, e) in got.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((*g as f64 - e).abs() < 1e-6, "{g} vs {e}");
        }
        let bt = b.transpose().unwrap();
        let via_t = matmul_transposed(&a, &bt).unwrap();
        for (g, e) in via_t.data().iter().zip(naive_matmul(&a, &b)) {
            assert!((*g as f64 - e).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = TensorF32::zeros(vec![2, 3]);
        assert!(matches!(matmul(&a, &a), Err(Error::Shape(_))));
    }

    #[test]
    fn dot_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f32> = (0..1027).map(|_| rng.gen()).collect();
        let b: Vec<f32> = (0..1027).map(|_| rng.gen()).collect();
        assert_eq!(dot(&a, &b).to_bits(), dot(&a, &b).to_bits());
        let exact: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) as f64 - exact).abs() < 1e-3);
    }

    #[test]
    fn softmax_symmetric_row() {
        let s = softmax_rows(&TensorF32::from_rows(&[[0.0, 0.0, 0.0]]).unwrap()).unwrap();
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let s = softmax_rows(&TensorF32::from_rows(&[[1000.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(s.data()[0], 1.0);
        assert!(s.data()[1] < 1e-30);
    }

    #[test]
    fn softmax_matches_f64_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let row: Vec<f32> = (0..17).map(|_| rng.gen_range(-8.0f32..8.0)).collect();
        let s = softmax_rows(&TensorF32::matrix(1, 17, row.clone()).unwrap()).unwrap();
        let z: f64 = row.iter().map(|&v| (v as f64).exp()).sum();
        let mut total = 0.0f64;
        for (got, &v) in s.data().iter().zip(&row) {
            let expect = (v as f64).exp() / z;
            assert!((*got as f64 - expect).abs() < 1e-7);
            total += *got as f64;
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_rejects_empty_row() {
        assert!(softmax_rows(&TensorF32::zeros(vec![2, 0])).is_err());
    }
}
