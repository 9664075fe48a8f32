//! HIGGS: randomized Hadamard rotation, per-group RMS scaling, and nearest-codeword
//! vector quantization against a Gaussian-fitted grid.
//!
//! After rotation the coordinates of a group are close to i.i.d. Gaussian, so a
//! single data-free codebook (k-means on standard-normal samples) serves every
//! input.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use half::f16;
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{self, TensorF32};

use super::packed::PackedBits;
use super::{HiggsParams, QuantizedBlock, SchemeDescriptor};

pub const KMEANS_SAMPLES: usize = 1 << 18;
pub const KMEANS_ITERATIONS: usize = 30;

/// `n` codewords of dimension `d`, sorted lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct HiggsCodebook {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub codewords: TensorF32,
}

impl HiggsCodebook {
    pub fn codeword(&self, i: usize) -> &[f32] {
        self.codewords.row(i)
    }

    /// Index of the nearest codeword; ties resolve to the lowest index.
    pub fn nearest(&self, point: &[f32]) -> usize {
        nearest_sorted(self.codewords.data(), self.d, point).0
    }

    /// Builds a codebook from explicit codewords (sorted on the way in).
    pub fn from_codewords(d: usize, seed: u64, codewords: TensorF32) -> Result<Self> {
        let (n, cols) = codewords.shape2()?;
        if cols != d || n < 1 {
            return Err(Error::shape(format!("codewords {:?} for d={d}", codewords.dims())));
        }
        let mut rows: Vec<Vec<f32>> = codewords.row_iter().map(<[f32]>::to_vec).collect();
        sort_lexicographic(&mut rows);
        if rows.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate codewords"));
        }
        Ok(Self { d, n, seed, codewords: TensorF32::from_rows(&rows)? })
    }
}

/// k-means codebook for `d`-dimensional standard-normal data.
///
/// k-means++ seeding and a fixed number of Lloyd iterations over
/// [`KMEANS_SAMPLES`] samples, all driven by `seed`. A cluster that empties
/// is re-seeded by splitting the most populated cluster.
pub fn build_higgs_codebook(d: usize, n: usize, seed: u64) -> Result<HiggsCodebook> {
    if ![1, 2, 4].contains(&d) {
        return Err(Error::invalid(format!("codebook d={d} not in {{1,2,4}}")));
    }
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("codebook n={n} is not a power of two >= 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f32> = (0..KMEANS_SAMPLES * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut centroids = kmeans_plus_plus(&samples, d, n, &mut rng);

    let count = KMEANS_SAMPLES;
    let mut assign = vec![0usize; count];
    for _ in 0..KMEANS_ITERATIONS {
        let (sorted, order) = sorted_view(&centroids, d);
        for (i, a) in assign.iter_mut().enumerate() {
            *a = order[nearest_sorted(&sorted, d, &samples[i * d..(i + 1) * d]).0];
        }
        let mut sums = vec![0.0f64; n * d];
        let mut counts = vec![0usize; n];
        for (i, &a) in assign.iter().enumerate() {
            counts[a] += 1;
            for k in 0..d {
                sums[a * d + k] += samples[i * d + k] as f64;
            }
        }
        for c in 0..n {
            if counts[c] > 0 {
                for k in 0..d {
                    centroids[c * d + k] = (sums[c * d + k] / counts[c] as f64) as f32;
                }
            }
        }
        for c in 0..n {
            if counts[c] == 0 {
                let donor = (0..n).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).expect("n >= 2");
                for k in 0..d {
                    let nudge = if k % 2 == 0 { 1e-3 } else { -1e-3 };
                    centroids[c * d + k] = centroids[donor * d + k] + nudge;
                }
                counts[c] = counts[donor] / 2;
                counts[donor] -= counts[c];
            }
        }
    }

    let mut rows: Vec<Vec<f32>> = centroids.chunks_exact(d).map(<[f32]>::to_vec).collect();
    sort_lexicographic(&mut rows);
    for i in 1..rows.len() {
        if rows[i] == rows[i - 1] {
            rows[i][d - 1] += 1e-6 * i as f32;
        }
    }
    sort_lexicographic(&mut rows);
    Ok(HiggsCodebook { d, n, seed, codewords: TensorF32::from_rows(&rows)? })
}

type CodebookCache = Mutex<HashMap<(usize, usize, u64), Arc<HiggsCodebook>>>;

/// Process-wide memo of [`build_higgs_codebook`]; codebooks are immutable once built.
pub fn cached_codebook(d: usize, n: usize, seed: u64) -> Result<Arc<HiggsCodebook>> {
    static CACHE: OnceLock<CodebookCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(cb) = guard.get(&(d, n, seed)) {
        return Ok(Arc::clone(cb));
    }
    let cb = Arc::new(build_higgs_codebook(d, n, seed)?);
    guard.insert((d, n, seed), Arc::clone(&cb));
    Ok(cb)
}

/// Quantizes `x` (flattened, final group zero-padded) group by group.
pub fn higgs_quantize(
    x: &TensorF32,
    codebook: &HiggsCodebook,
    group_size: usize,
    hadamard_seed: u64,
) -> Result<QuantizedBlock> {
    let params = HiggsParams { d: codebook.d, n: codebook.n, group_size, hadamard_seed, codebook_seed: codebook.seed };
    let scheme = SchemeDescriptor::Higgs(params);
    scheme.validate()?;
    let g = group_size;
    let width = params.index_bits();
    let groups = x.len().div_ceil(g);
    let signs = numerics::random_signs(g, hadamard_seed);
    let zero_code = codebook.nearest(&vec![0.0; codebook.d]) as u64;

    let mut codes = PackedBits::with_capacity(groups * (g / codebook.d) * width as usize);
    let mut scales = Vec::with_capacity(groups);
    let mut buf = vec![0.0f32; g];
    for gi in 0..groups {
        let start = gi * g;
        let end = (start + g).min(x.len());
        buf.fill(0.0);
        buf[..end - start].copy_from_slice(&x.data()[start..end]);
        numerics::randomized_hadamard_slice(&mut buf, &signs);
        let scale = group_scale(&buf);
        scales.push(scale);
        if scale == 0.0 {
            for _ in 0..g / codebook.d {
                codes.push(zero_code, width);
            }
            continue;
        }
        for v in buf.iter_mut() {
            *v /= scale;
        }
        for sub in buf.chunks_exact(codebook.d) {
            codes.push(codebook.nearest(sub) as u64, width);
        }
    }
    Ok(QuantizedBlock { scheme, codes, scales: TensorF32::vector(scales)?, original_dims: x.dims().to_vec() })
}

/// Group RMS rounded to `f16` (saturating); zero only for an all-zero group.
fn group_scale(y: &[f32]) -> f32 {
    let ms = y.iter().map(|&v| v as f64 * v as f64).sum::<f64>() / y.len() as f64;
    let rms = ms.sqrt() as f32;
    let h = f16::from_f32(rms);
    if h.is_infinite() {
        f16::MAX.to_f32()
    } else {
        h.to_f32()
    }
}

pub(super) fn dequantize(b: &QuantizedBlock, p: &HiggsParams) -> Result<Vec<f32>> {
    let count = b.value_count();
    let g = p.group_size;
    let groups = count.div_ceil(g);
    let width = p.index_bits();
    super::expect_layout(b, groups * (g / p.d) * width as usize, groups)?;
    for (i, &s) in b.scales.data().iter().enumerate() {
        if f16::from_f32(s).to_f32() != s || s < 0.0 {
            return Err(Error::CorruptBlock(format!("group scale {i} ({s}) is not a non-negative f16")));
        }
    }
    let codebook = cached_codebook(p.d, p.n, p.codebook_seed)?;
    let signs = numerics::random_signs(g, p.hadamard_seed);
    let mut out = Vec::with_capacity(groups * g);
    let mut buf = vec![0.0f32; g];
    let per_group = g / p.d;
    let mut codes = b.codes.codes(width);
    for gi in 0..groups {
        let scale = b.scales.data()[gi];
        for s in 0..per_group {
            let c = codes.next().expect("layout checked") as usize;
            let cw = codebook.codeword(c);
            for k in 0..p.d {
                buf[s * p.d + k] = cw[k] * scale;
            }
        }
        numerics::inverse_randomized_hadamard_slice(&mut buf, &signs);
        out.extend_from_slice(&buf);
    }
    out.truncate(count);
    Ok(out)
}

fn sort_lexicographic(rows: &mut [Vec<f32>]) {
    rows.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// Centroids reordered by first coordinate, plus the map back to cluster ids.
fn sorted_view(centroids: &[f32], d: usize) -> (Vec<f32>, Vec<usize>) {
    let n = centroids.len() / d;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centroids[a * d].total_cmp(&centroids[b * d]).then(a.cmp(&b)));
    let sorted = order.iter().flat_map(|&i| centroids[i * d..(i + 1) * d].iter().copied()).collect();
    (sorted, order)
}

/// Exact nearest neighbour over codewords sorted by their first coordinate.
///
/// Scans outward from the insertion point and stops once the first-coordinate
/// gap alone exceeds the best distance. Equal distances keep the lower index.
pub(crate) fn nearest_sorted(codewords: &[f32], d: usize, point: &[f32]) -> (usize, f32) {
    let n = codewords.len() / d;
    let x0 = point[0];
    let start = partition_point_first(codewords, d, n, x0);
    let mut best = (usize::MAX, f32::INFINITY);
    let dist = |i: usize| -> f32 {
        let c = &codewords[i * d..(i + 1) * d];
        let mut s = 0.0f32;
        for k in 0..d {
            let t = c[k] - point[k];
            s += t * t;
        }
        s
    };
    let consider = |i: usize, best: &mut (usize, f32)| {
        let dd = dist(i);
        if dd < best.1 || (dd == best.1 && i < best.0) {
            *best = (i, dd);
        }
    };
    for i in start..n {
        let gap = codewords[i * d] - x0;
        if gap * gap > best.1 {
            break;
        }
        consider(i, &mut best);
    }
    for i in (0..start).rev() {
        let gap = x0 - codewords[i * d];
        if gap * gap > best.1 {
            break;
        }
        consider(i, &mut best);
    }
    best
}

fn partition_point_first(codewords: &[f32], d: usize, n: usize, x0: f32) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if codewords[mid * d] < x0 {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

fn kmeans_plus_plus(samples: &[f32], d: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let count = samples.len() / d;
    let point = |i: usize| &samples[i * d..(i + 1) * d];
    let sq = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f32>();
    let first = rand::Rng::gen_range(rng, 0..count);
    let mut centroids = point(first).to_vec();
    let mut best: Vec<f32> = (0..count).map(|i| sq(point(i), point(first))).collect();
    for _ in 1..n {
        let next = match WeightedIndex::new(best.iter().map(|&v| v as f64 + 1e-30)) {
            Ok(w) => w.sample(rng),
            Err(_) => rand::Rng::gen_range(rng, 0..count),
        };
        let c = point(next).to_vec();
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq(point(i), &c));
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}
