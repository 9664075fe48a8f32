//! The tiered KV cache of one kv-head.
//!
//! Keys are cut into consecutive chunks. Each chunk is summarized by a
//! landmark (the channel-wise mean of its keys), quantized as one
//! `[chunks × D]` matrix. Optional residuals `K − repeat(L̂)` are quantized as
//! one `[n × D]` matrix. Outlier chunks and the local window stay resident in
//! the fast tier at full precision; every other token is fetched from the
//! slow tier, through `slow_tier_scheme`, when selected.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{dot, kvt, TensorF32};
use crate::quantization::{self, Bits, QuantizedBlock, SchemeDescriptor};

/// Bits charged per resident key or value coordinate.
pub const RESIDENT_BITS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConfig {
    /// Fraction of all tokens fetched from the slow tier per step, in `(0, 1]`.
    pub sparse_fraction: f64,
    /// Tokens (not chunks) kept permanently resident as outlier chunks.
    pub outlier_tokens: usize,
    /// Most recent tokens kept resident.
    pub local_window: usize,
}

impl BudgetConfig {
    pub fn new(sparse_fraction: f64, outlier_tokens: usize, local_window: usize) -> Result<Self> {
        if !(sparse_fraction > 0.0 && sparse_fraction <= 1.0) {
            return Err(Error::invalid(format!("sparse_fraction {sparse_fraction} not in (0, 1]")));
        }
        Ok(Self { sparse_fraction, outlier_tokens, local_window })
    }

    /// 1.56% sparse, 384 outlier tokens, 32-token local window.
    pub fn shadowkv_default() -> Self {
        Self { sparse_fraction: 0.0156, outlier_tokens: 384, local_window: 32 }
    }

    /// `ceil(sparse_fraction · n)`, tolerant of binary rounding in the fraction.
    pub fn sparse_tokens(&self, n: usize) -> usize {
        ((self.sparse_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreConfig {
    pub chunk_size: usize,
    pub landmark_scheme: SchemeDescriptor,
    pub residual_scheme: Option<SchemeDescriptor>,
    /// Compression of offloaded keys.
    pub slow_tier_scheme: SchemeDescriptor,
    /// Compression of offloaded values. `None` follows the key scheme, except
    /// that low-rank key schemes leave values uncompressed.
    pub value_scheme: Option<SchemeDescriptor>,
    pub budget: BudgetConfig,
}

impl StoreConfig {
    pub fn new(chunk_size: usize, landmark_scheme: SchemeDescriptor, budget: BudgetConfig) -> Self {
        Self {
            chunk_size,
            landmark_scheme,
            residual_scheme: None,
            slow_tier_scheme: SchemeDescriptor::None,
            value_scheme: None,
            budget,
        }
    }

    pub fn with_residual(mut self, scheme: SchemeDescriptor) -> Self {
        self.residual_scheme = Some(scheme);
        self
    }

    pub fn with_slow_tier(mut self, scheme: SchemeDescriptor) -> Self {
        self.slow_tier_scheme = scheme;
        self
    }

    pub fn effective_value_scheme(&self) -> SchemeDescriptor {
        match (&self.value_scheme, &self.slow_tier_scheme) {
            (Some(v), _) => v.clone(),
            (None, SchemeDescriptor::Svd { .. }) => SchemeDescriptor::None,
            (None, k) => k.clone(),
        }
    }

    /// Fast-tier bits per key coordinate spent on landmarks and residuals.
    pub fn bits_per_key(&self) -> Result<Bits> {
        quantization::bits_per_key(&self.landmark_scheme, self.chunk_size, self.residual_scheme.as_ref())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TierTraffic {
    pub tokens_loaded_from_slow_tier: usize,
    pub fast_tier_resident_bits: u64,
}

/// Slow-tier tokens fetched by [`ChunkedKVStore::load_chunks`], in token order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedChunks {
    pub token_ids: Vec<usize>,
    pub keys: TensorF32,
    pub values: TensorF32,
    pub traffic: TierTraffic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkedKVStore {
    config: StoreConfig,
    keys: TensorF32,
    values: TensorF32,
    landmarks: QuantizedBlock,
    landmark_matrix: TensorF32,
    residuals: Option<QuantizedBlock>,
    residual_matrix: Option<TensorF32>,
    slow_keys: TensorF32,
    slow_values: TensorF32,
    outlier_chunks: BTreeSet<usize>,
    resident: Vec<bool>,
}

impl ChunkedKVStore {
    /// Builds the store for `keys`/`values` of shape `[n × D]`.
    pub fn build(keys: &TensorF32, values: &TensorF32, config: &StoreConfig) -> Result<Self> {
        let mut store = Self::summarize(keys.clone(), values.clone(), config.clone())?;
        store.outlier_chunks = store.pick_outliers();
        store.refresh_residency();
        Ok(store)
    }

    fn summarize(keys: TensorF32, values: TensorF32, config: StoreConfig) -> Result<Self> {
        let (n, d) = keys.shape2()?;
        if n == 0 || d == 0 {
            return Err(Error::invalid("store needs at least one token of positive dimension"));
        }
        if values.shape2()? != (n, d) {
            return Err(Error::shape(format!("keys {:?} vs values {:?}", keys.dims(), values.dims())));
        }
        if config.chunk_size == 0 {
            return Err(Error::invalid("chunk_size must be >= 1"));
        }
        config.landmark_scheme.validate()?;
        let cs = config.chunk_size;
        let n_chunks = n.div_ceil(cs);

        let mut means = vec![0.0f32; n_chunks * d];
        let mut acc = vec![0.0f64; d];
        for c in 0..n_chunks {
            let (lo, hi) = (c * cs, ((c + 1) * cs).min(n));
            acc.fill(0.0);
            for i in lo..hi {
                for (a, &v) in acc.iter_mut().zip(keys.row(i)) {
                    *a += v as f64;
                }
            }
            for (m, a) in means[c * d..(c + 1) * d].iter_mut().zip(&acc) {
                *m = (a / (hi - lo) as f64) as f32;
            }
        }
        let landmarks = quantization::quantize(&TensorF32::matrix(n_chunks, d, means)?, &config.landmark_scheme)?;
        let landmark_matrix = quantization::dequantize(&landmarks)?;

        let (residuals, residual_matrix) = match &config.residual_scheme {
            None => (None, None),
            Some(scheme) => {
                let mut r = keys.data().to_vec();
                for (i, row) in r.chunks_exact_mut(d).enumerate() {
                    for (v, &l) in row.iter_mut().zip(landmark_matrix.row(i / cs)) {
                        *v -= l;
                    }
                }
                let block = quantization::quantize(&TensorF32::matrix(n, d, r)?, scheme)?;
                let m = quantization::dequantize(&block)?;
                (Some(block), Some(m))
            }
        };

        let slow_keys = quantization::roundtrip(&keys, &config.slow_tier_scheme)?;
        let slow_values = quantization::roundtrip(&values, &config.effective_value_scheme())?;
        Ok(Self {
            config,
            keys,
            values,
            landmarks,
            landmark_matrix,
            residuals,
            residual_matrix,
            slow_keys,
            slow_values,
            outlier_chunks: BTreeSet::new(),
            resident: vec![false; n],
        })
    }

    /// Chunk 0 first, then chunks by ascending mean key/landmark cosine, taken
    /// greedily while the token total fits the outlier budget. Chunks wholly
    /// inside the local window are skipped.
    fn pick_outliers(&self) -> BTreeSet<usize> {
        let budget = self.config.budget.outlier_tokens;
        let window_start = self.window_start();
        let mut scored: Vec<(usize, f64)> = (0..self.n_chunks())
            .filter(|&c| c * self.config.chunk_size < window_start)
            .map(|c| (c, if c == 0 { f64::NEG_INFINITY } else { self.mean_cosine(c) }))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut picked = BTreeSet::new();
        let mut used = 0;
        for (c, _) in scored {
            let len = self.chunk_range(c).len();
            if used + len <= budget {
                used += len;
                picked.insert(c);
            }
        }
        picked
    }

    fn mean_cosine(&self, c: usize) -> f64 {
        let l = self.landmark_matrix.row(c);
        let ln = dot(l, l).sqrt();
        let range = self.chunk_range(c);
        let len = range.len();
        range
            .map(|i| {
                let k = self.keys.row(i);
                let kn = dot(k, k).sqrt();
                match (kn > 0.0, ln > 0.0) {
                    (false, false) => 1.0,
                    (true, true) => (dot(k, l) / (kn * ln)) as f64,
                    _ => 0.0,
                }
            })
            .sum::<f64>()
            / len as f64
    }

    fn window_start(&self) -> usize {
        self.n_tokens().saturating_sub(self.config.budget.local_window)
    }

    fn refresh_residency(&mut self) {
        let ws = self.window_start();
        let mut resident = vec![false; self.n_tokens()];
        for r in resident.iter_mut().skip(ws) {
            *r = true;
        }
        for &c in &self.outlier_chunks {
            for i in self.chunk_range(c) {
                resident[i] = true;
            }
        }
        self.resident = resident;
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn n_tokens(&self) -> usize {
        self.keys.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.keys.cols()
    }

    pub fn chunk_size(&self) -> usize {
        self.config.chunk_size
    }

    pub fn n_chunks(&self) -> usize {
        self.n_tokens().div_ceil(self.config.chunk_size)
    }

    pub fn chunk_of(&self, token: usize) -> usize {
        token / self.config.chunk_size
    }

    pub fn chunk_range(&self, c: usize) -> std::ops::Range<usize> {
        let cs = self.config.chunk_size;
        (c * cs).min(self.n_tokens())..((c + 1) * cs).min(self.n_tokens())
    }

    pub fn keys(&self) -> &TensorF32 {
        &self.keys
    }

    pub fn values(&self) -> &TensorF32 {
        &self.values
    }

    pub fn landmarks(&self) -> &QuantizedBlock {
        &self.landmarks
    }

    /// Dequantized landmarks, `[chunks × D]`.
    pub fn landmark_matrix(&self) -> &TensorF32 {
        &self.landmark_matrix
    }

    pub fn residuals(&self) -> Option<&QuantizedBlock> {
        self.residuals.as_ref()
    }

    /// Dequantized residuals, `[n × D]`.
    pub fn residual_matrix(&self) -> Result<&TensorF32> {
        self.residual_matrix.as_ref().ok_or(Error::ResidualsAbsent)
    }

    pub fn outlier_chunks(&self) -> &BTreeSet<usize> {
        &self.outlier_chunks
    }

    pub fn is_resident(&self, token: usize) -> bool {
        self.resident[token]
    }

    /// Outlier-chunk and local-window tokens, ascending.
    pub fn resident_tokens(&self) -> Vec<usize> {
        (0..self.n_tokens()).filter(|&i| self.resident[i]).collect()
    }

    pub fn landmark_of(&self, chunk: usize) -> Result<TensorF32> {
        if chunk >= self.n_chunks() {
            return Err(Error::OutOfRange { index: chunk, len: self.n_chunks() });
        }
        TensorF32::vector(self.landmark_matrix.row(chunk).to_vec())
    }

    /// `L̂[chunk(i)] + R̂[i]`.
    pub fn approx_key(&self, token: usize) -> Result<TensorF32> {
        let r = self.residual_matrix()?;
        if token >= self.n_tokens() {
            return Err(Error::OutOfRange { index: token, len: self.n_tokens() });
        }
        let l = self.landmark_matrix.row(self.chunk_of(token));
        TensorF32::vector(l.iter().zip(r.row(token)).map(|(a, b)| a + b).collect())
    }

    /// Landmark, residual and resident K/V bits held in the fast tier.
    pub fn fast_tier_resident_bits(&self) -> u64 {
        let d = self.head_dim() as u64;
        let mut bits = self.config.landmark_scheme.code_bits() * Bits::from_integer(self.n_chunks() as u64 * d);
        if let Some(r) = &self.config.residual_scheme {
            bits += r.code_bits() * Bits::from_integer(self.n_tokens() as u64 * d);
        }
        let resident = self.resident.iter().filter(|&&r| r).count() as u64;
        bits.ceil().to_integer() + 2 * RESIDENT_BITS * d * resident
    }

    /// Fetches the non-resident tokens of `chunks` from the slow tier.
    pub fn load_chunks(&self, chunks: &BTreeSet<usize>) -> Result<LoadedChunks> {
        let mut tokens = Vec::new();
        for &c in chunks {
            if c >= self.n_chunks() {
                return Err(Error::OutOfRange { index: c, len: self.n_chunks() });
            }
            tokens.extend(self.chunk_range(c));
        }
        self.load_tokens(&tokens)
    }

    /// Like [`load_chunks`](Self::load_chunks) for an explicit ascending token list.
    pub fn load_tokens(&self, tokens: &[usize]) -> Result<LoadedChunks> {
        let n = self.n_tokens();
        if let Some(&bad) = tokens.iter().find(|&&t| t >= n) {
            return Err(Error::OutOfRange { index: bad, len: n });
        }
        let token_ids: Vec<usize> = tokens.iter().copied().filter(|&t| !self.resident[t]).collect();
        Ok(LoadedChunks {
            keys: self.slow_keys.select_rows(&token_ids)?,
            values: self.slow_values.select_rows(&token_ids)?,
            traffic: TierTraffic {
                tokens_loaded_from_slow_tier: token_ids.len(),
                fast_tier_resident_bits: self.fast_tier_resident_bits(),
            },
            token_ids,
        })
    }

    /// Appends decoded tokens. Landmarks, residuals and the slow tier are
    /// recomputed over the grown sequence; the local window slides and the
    /// prefill outlier set is kept.
    pub fn append(&mut self, keys: &TensorF32, values: &TensorF32) -> Result<()> {
        let d = self.head_dim();
        if keys.shape2()?.1 != d || values.shape2()? != keys.shape2()? {
            return Err(Error::shape(format!("append {:?}/{:?} to D={d}", keys.dims(), values.dims())));
        }
        let n = self.n_tokens() + keys.rows();
        let cat = |a: &TensorF32, b: &TensorF32| {
            let mut v = a.data().to_vec();
            v.extend_from_slice(b.data());
            TensorF32::matrix(n, d, v)
        };
        let outliers = std::mem::take(&mut self.outlier_chunks);
        let mut grown = Self::summarize(cat(&self.keys, keys)?, cat(&self.values, values)?, self.config.clone())?;
        grown.outlier_chunks = outliers;
        grown.refresh_residency();
        *self = grown;
        Ok(())
    }

    /// Writes `keys.kvt`, `values.kvt` and `manifest.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        kvt::write(dir.join("keys.kvt"), &self.keys)?;
        kvt::write(dir.join("values.kvt"), &self.values)?;
        let c = &self.config;
        let mut m = String::new();
        let _ = writeln!(m, "chunk_size={}", c.chunk_size);
        let _ = writeln!(m, "landmark_scheme={}", c.landmark_scheme);
        if let Some(r) = &c.residual_scheme {
            let _ = writeln!(m, "residual_scheme={r}");
        }
        let _ = writeln!(m, "slow_tier_scheme={}", c.slow_tier_scheme);
        if let Some(v) = &c.value_scheme {
            let _ = writeln!(m, "value_scheme={v}");
        }
        let _ = writeln!(m, "sparse_fraction={}", c.budget.sparse_fraction);
        let _ = writeln!(m, "outlier_tokens={}", c.budget.outlier_tokens);
        let _ = writeln!(m, "local_window={}", c.budget.local_window);
        let ids: Vec<String> = self.outlier_chunks.iter().map(usize::to_string).collect();
        let _ = writeln!(m, "outlier_chunks={}", ids.join(","));
        let path = dir.join("manifest.txt");
        std::fs::write(&path, m).map_err(Error::at_path(&path))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.txt");
        let text = std::fs::read_to_string(&path).map_err(Error::at_path(&path))?;
        let mut kv = std::collections::HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("manifest line `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Config(format!("manifest lacks `{k}`")));
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Config(format!("manifest `{k}` is not an integer")))
        };
        let sparse_fraction: f64 =
            get("sparse_fraction")?.parse().map_err(|_| Error::Config("manifest `sparse_fraction`".into()))?;
        let config = StoreConfig {
            chunk_size: num("chunk_size")?,
            landmark_scheme: get("landmark_scheme")?.parse()?,
            residual_scheme: kv.get("residual_scheme").map(|s| s.parse()).transpose()?,
            slow_tier_scheme: get("slow_tier_scheme")?.parse()?,
            value_scheme: kv.get("value_scheme").map(|s| s.parse()).transpose()?,
            budget: BudgetConfig::new(sparse_fraction, num("outlier_tokens")?, num("local_window")?)?,
        };
        let keys = kvt::read(dir.join("keys.kvt"))?;
        let values = kvt::read(dir.join("values.kvt"))?;
        let mut store = Self::summarize(keys, values, config)?;
        let outliers = get("outlier_chunks")?;
        for id in outliers.split(',').filter(|s| !s.is_empty()) {
            let c: usize = id.trim().parse().map_err(|_| Error::Config(format!("outlier chunk `{id}`")))?;
            if c >= store.n_chunks() {
                return Err(Error::OutOfRange { index: c, len: store.n_chunks() });
            }
            store.outlier_chunks.insert(c);
        }
        store.refresh_residency();
        Ok(store)
    }
}
