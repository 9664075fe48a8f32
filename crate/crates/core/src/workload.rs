//! Planted multi-needle decode workloads and import of exported tensors.
//!
//! Background keys are i.i.d. `N(0, noise²/head_dim)`. At every decode step a
//! fresh unit direction `q̂` is drawn per kv-head; the step's needle keys are
//! set to `‖k‖max · (α·q̂ + √(1−α²)·u)` with `u` a unit vector orthogonal to
//! `q̂`, and each query head of the group looks along a jittered copy of `q̂`.

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, kvt, TensorF32};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub n_tokens: usize,
    pub kv_heads: usize,
    pub query_heads_per_group: usize,
    pub head_dim: usize,
    pub n_needles: usize,
    /// Cosine between a needle and its step's query direction, in `(0, 1]`.
    pub needle_alignment: f64,
    pub noise_scale: f64,
    pub decode_steps: usize,
    pub seed: u64,
    /// Trailing tokens that never hold needles.
    pub local_window: usize,
    /// Per-query-head perturbation of the step direction.
    pub query_jitter: f64,
    /// Query norm.
    pub query_gain: f64,
}

impl WorkloadSpec {
    pub fn new(n_tokens: usize, head_dim: usize, n_needles: usize, needle_alignment: f64, seed: u64) -> Self {
        Self {
            n_tokens,
            kv_heads: 1,
            query_heads_per_group: 4,
            head_dim,
            n_needles,
            needle_alignment,
            noise_scale: 1.0,
            decode_steps: 4,
            seed,
            local_window: 32,
            query_jitter: 0.2,
            query_gain: 2.0 * head_dim as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.needle_alignment;
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::invalid(format!("needle alignment {a} not in (0, 1]")));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(format!("noise scale {} must be positive", self.noise_scale)));
        }
        if self.kv_heads == 0 || self.query_heads_per_group == 0 || self.decode_steps == 0 || self.n_needles == 0 {
            return Err(Error::invalid("kv_heads, query heads, decode steps and needles must be >= 1"));
        }
        if self.head_dim < 2 {
            return Err(Error::invalid("head_dim must be >= 2"));
        }
        if !(self.query_jitter >= 0.0 && self.query_gain > 0.0) {
            return Err(Error::invalid("query jitter must be >= 0 and gain > 0"));
        }
        let eligible = self.n_tokens.saturating_sub(self.local_window);
        if self.n_needles * self.decode_steps > eligible {
            return Err(Error::invalid(format!(
                "{} steps x {} needles do not fit in {eligible} tokens outside the local window",
                self.decode_steps, self.n_needles
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub spec: WorkloadSpec,
    /// Per kv-head `[n × head_dim]`.
    pub keys: Vec<TensorF32>,
    pub values: Vec<TensorF32>,
    /// `queries[step][kv_head]` is `[query_heads × head_dim]`.
    pub queries: Vec<Vec<TensorF32>>,
    /// Ascending planted token ids per step.
    pub needles: Vec<Vec<usize>>,
}

fn unit(v: &mut [f32]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f32> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn generate(spec: &WorkloadSpec) -> Result<Workload> {
    spec.validate()?;
    let (n, hd) = (spec.n_tokens, spec.head_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let key_dist = Normal::new(0.0f32, (spec.noise_scale / (hd as f64).sqrt()) as f32)
        .map_err(|e| Error::invalid(e.to_string()))?;

    let mut keys = Vec::with_capacity(spec.kv_heads);
    let mut values = Vec::with_capacity(spec.kv_heads);
    for _ in 0..spec.kv_heads {
        keys.push((0..n * hd).map(|_| key_dist.sample(&mut rng)).collect::<Vec<f32>>());
        values.push(gaussian_vec(&mut rng, n * hd));
    }
    let eligible = n - spec.local_window;
    let picks = index::sample(&mut rng, eligible, spec.n_needles * spec.decode_steps).into_vec();
    let needles: Vec<Vec<usize>> = picks
        .chunks_exact(spec.n_needles)
        .map(|c| {
            let mut v = c.to_vec();
            v.sort_unstable();
            v
        })
        .collect();

    let alpha = spec.needle_alignment as f32;
    let ortho = (1.0 - alpha * alpha).max(0.0).sqrt();
    let norm = spec.noise_scale as f32;
    let mut queries = Vec::with_capacity(spec.decode_steps);
    for step in &needles {
        let mut per_head = Vec::with_capacity(spec.kv_heads);
        for k in keys.iter_mut() {
            let mut qhat = gaussian_vec(&mut rng, hd);
            unit(&mut qhat);
            for &t in step {
                let mut u = gaussian_vec(&mut rng, hd);
                let proj = dot(&u, &qhat);
                u.iter_mut().zip(&qhat).for_each(|(x, q)| *x -= proj * q);
                unit(&mut u);
                let row = &mut k[t * hd..(t + 1) * hd];
                for p in 0..hd {
                    row[p] = norm * (alpha * qhat[p] + ortho * u[p]);
                }
            }
            let mut q = Vec::with_capacity(spec.query_heads_per_group * hd);
            for _ in 0..spec.query_heads_per_group {
                let w = gaussian_vec(&mut rng, hd);
                let jitter = spec.query_jitter as f32 / (hd as f32).sqrt();
                let mut dir: Vec<f32> = qhat.iter().zip(&w).map(|(a, b)| a + jitter * b).collect();
                unit(&mut dir);
                q.extend(dir.iter().map(|x| x * spec.query_gain as f32));
            }
            per_head.push(TensorF32::matrix(spec.query_heads_per_group, hd, q)?);
        }
        queries.push(per_head);
    }

    Ok(Workload {
        spec: spec.clone(),
        keys: keys.into_iter().map(|k| TensorF32::matrix(n, hd, k)).collect::<Result<_>>()?,
        values: values.into_iter().map(|v| TensorF32::matrix(n, hd, v)).collect::<Result<_>>()?,
        queries,
        needles,
    })
}

/// Reads one KVT1 tensor.
pub fn import_kvt(path: impl AsRef<Path>) -> Result<TensorF32> {
    kvt::read(path)
}

#[derive(Serialize, Deserialize)]
struct NeedleFile {
    spec: Option<WorkloadSpec>,
    needles: Vec<Vec<usize>>,
}

impl Workload {
    /// Writes `keys.kvt` and `values.kvt` (`[kv_heads × n × D]`), `queries.kvt`
    /// (`[steps × kv_heads × H × D]`) and `needles.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        let (n, hd, g) = (self.keys[0].rows(), self.keys[0].cols(), self.keys.len());
        let stack = |ts: &[TensorF32]| ts.iter().flat_map(|t| t.data().iter().copied()).collect::<Vec<f32>>();
        kvt::write(dir.join("keys.kvt"), &TensorF32::new(vec![g, n, hd], stack(&self.keys))?)?;
        kvt::write(dir.join("values.kvt"), &TensorF32::new(vec![g, n, hd], stack(&self.values))?)?;
        let h = self.queries[0][0].rows();
        let q: Vec<f32> = self.queries.iter().flat_map(|s| stack(s)).collect();
        kvt::write(dir.join("queries.kvt"), &TensorF32::new(vec![self.queries.len(), g, h, hd], q)?)?;
        let path = dir.join("needles.json");
        let file = NeedleFile { spec: Some(self.spec.clone()), needles: self.needles.clone() };
        std::fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(Error::at_path(&path))
    }

    /// Loads a directory in the [`save`](Self::save) layout. `keys.kvt` and
    /// `values.kvt` may also be plain `[n × D]` single-head matrices, and
    /// `queries.kvt` `[steps × H × D]`. Without `needles.json` the needle
    /// lists are empty.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let keys = import_kvt(dir.join("keys.kvt"))?;
        let values = import_kvt(dir.join("values.kvt"))?;
        let queries = import_kvt(dir.join("queries.kvt"))?;
        let split_heads = |t: &TensorF32| -> Result<Vec<TensorF32>> {
            match *t.dims() {
                [n, d] => Ok(vec![TensorF32::matrix(n, d, t.data().to_vec())?]),
                [g, n, d] => {
                    (0..g).map(|i| TensorF32::matrix(n, d, t.data()[i * n * d..(i + 1) * n * d].to_vec())).collect()
                }
                _ => Err(Error::shape(format!("expected [n, D] or [heads, n, D], got {:?}", t.dims()))),
            }
        };
        let keys = split_heads(&keys)?;
        let values = split_heads(&values)?;
        let (g, n, hd) = (keys.len(), keys[0].rows(), keys[0].cols());
        if values.len() != g || values.iter().any(|v| v.dims() != [n, hd]) {
            return Err(Error::shape("values do not match keys".to_string()));
        }
        let (steps, qg, h) = match *queries.dims() {
            [s, h, d] if g == 1 && d == hd => (s, 1, h),
            [s, qg, h, d] if d == hd => (s, qg, h),
            _ => return Err(Error::shape(format!("queries {:?} do not match keys [{g}, {n}, {hd}]", queries.dims()))),
        };
        if qg != g || steps == 0 || h == 0 {
            return Err(Error::shape(format!("queries {:?} do not match {g} kv-heads", queries.dims())));
        }
        let per = h * hd;
        let queries: Vec<Vec<TensorF32>> = (0..steps)
            .map(|s| {
                (0..g)
                    .map(|i| {
                        let off = (s * g + i) * per;
                        TensorF32::matrix(h, hd, queries.data()[off..off + per].to_vec())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;

        let path = dir.join("needles.json");
        let file = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<NeedleFile>(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                NeedleFile { spec: None, needles: vec![Vec::new(); steps] }
            }
            Err(e) => return Err(Error::at_path(&path)(e)),
        };
        if file.needles.len() != steps || file.needles.iter().flatten().any(|&t| t >= n) {
            return Err(Error::shape("needles.json does not match the tensors".to_string()));
        }
        let mut spec = file.spec.unwrap_or_else(|| WorkloadSpec {
            local_window: 0,
            ..WorkloadSpec::new(n, hd, file.needles.first().map_or(1, Vec::len).max(1), 1.0, 0)
        });
        spec.n_tokens = n;
        spec.head_dim = hd;
        spec.kv_heads = g;
        spec.query_heads_per_group = h;
        spec.decode_steps = steps;
        Ok(Self { spec, keys, values, queries, needles: file.needles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::oracle_select;

    fn small(alpha: f64, seed: u64) -> WorkloadSpec {
        WorkloadSpec { decode_steps: 3, ..WorkloadSpec::new(512, 32, 4, alpha, seed) }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(&small(0.9, 1)).unwrap(), generate(&small(0.9, 1)).unwrap());
        assert_ne!(generate(&small(0.9, 1)).unwrap().keys, generate(&small(0.9, 2)).unwrap().keys);
    }

    #[test]
    fn needles_distinct_and_outside_window() {
        let w = generate(&small(0.9, 3)).unwrap();
        let mut all: Vec<usize> = w.needles.iter().flatten().copied().collect();
        assert!(all.iter().all(|&t| t < 512 - 32));
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 12);
    }

    #[test]
    fn perfectly_aligned_needles_are_the_oracle_top_k() {
        for seed in 0..5 {
            let spec = WorkloadSpec { query_heads_per_group: 1, query_jitter: 0.0, ..small(1.0, seed) };
            let w = generate(&spec).unwrap();
            for (step, needles) in w.needles.iter().enumerate() {
                let sel = oracle_select(&w.keys[0], &w.queries[step][0], needles.len()).unwrap();
                assert_eq!(sel.token_ids.into_iter().collect::<Vec<_>>(), *needles);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(generate(&small(0.0, 0)).is_err());
        assert!(generate(&small(1.5, 0)).is_err());
        assert!(generate(&WorkloadSpec { n_needles: 200, ..small(0.9, 0) }).is_err());
        assert!(generate(&WorkloadSpec { noise_scale: 0.0, ..small(0.9, 0) }).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let w = generate(&WorkloadSpec { kv_heads: 2, ..small(0.8, 4) }).unwrap();
        w.save(dir.path()).unwrap();
        assert_eq!(Workload::load(dir.path()).unwrap(), w);
    }

    #[test]
    fn load_plain_matrices_without_needles() {
        let dir = tempfile::tempdir().unwrap();
        let k = TensorF32::matrix(6, 2, (0..12).map(|i| i as f32).collect()).unwrap();
        kvt::write(dir.path().join("keys.kvt"), &k).unwrap();
        kvt::write(dir.path().join("values.kvt"), &k).unwrap();
        kvt::write(dir.path().join("queries.kvt"), &TensorF32::new(vec![2, 3, 2], vec![1.0; 12]).unwrap()).unwrap();
        let w = Workload::load(dir.path()).unwrap();
        assert_eq!(w.keys, vec![k]);
        assert_eq!(w.queries.len(), 2);
        assert_eq!(w.queries[1][0].dims(), &[3, 2]);
        assert!(w.needles.iter().all(Vec::is_empty));
    }
}
