//! Experiment driver: seeded sweeps over schemes and budgets.
//!
//! Loop order is seed, then scheme, then budget. For every decode step and
//! kv-head the chosen policy selects tokens, recall is measured against the
//! exact top-k of the step, and the attention output over the selection is
//! compared with full attention. Means are taken over steps and heads per
//! seed, then over seeds.

mod config;
mod output;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::attention::{full_attention, sparse_attention, AttentionOutput};
use crate::error::{Error, Result};
use crate::kvstore::{BudgetConfig, ChunkedKVStore, StoreConfig};
use crate::quantization::{bits_to_f64, SchemeDescriptor};
use crate::selection::{
    approx_topk_residual, oracle_select, oracle_select_in_store, recall, select_by_landmarks_with, HeadAggregation,
    SelectionResult,
};
use crate::workload::{generate, Workload, WorkloadSpec};

pub use config::{parse_config, read_config};
pub use output::{emit_csv, emit_plot_data, read_csv, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Top chunks by landmark score.
    Landmark,
    /// Exact top tokens by true dot product.
    Oracle,
    /// Landmark-filtered residual top-k.
    ResidualTopk,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Landmark => "landmark",
            Policy::Oracle => "oracle",
            Policy::ResidualTopk => "residual-topk",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "landmark" => Ok(Policy::Landmark),
            "oracle" => Ok(Policy::Oracle),
            "residual-topk" | "residual_topk" | "residual" => Ok(Policy::ResidualTopk),
            other => Err(Error::Config(format!("unknown policy `{other}`"))),
        }
    }
}

/// One row of the scheme matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub id: String,
    pub landmark: SchemeDescriptor,
    pub chunk_size: usize,
    pub residual: Option<SchemeDescriptor>,
    pub slow_tier: SchemeDescriptor,
}

impl SchemeSpec {
    pub fn new(id: impl Into<String>, landmark: SchemeDescriptor, chunk_size: usize) -> Self {
        Self { id: id.into(), landmark, chunk_size, residual: None, slow_tier: SchemeDescriptor::None }
    }

    pub fn with_residual(mut self, residual: SchemeDescriptor) -> Self {
        self.residual = Some(residual);
        self
    }

    fn store_config(&self, budget: BudgetConfig) -> StoreConfig {
        StoreConfig {
            chunk_size: self.chunk_size,
            landmark_scheme: self.landmark.clone(),
            residual_scheme: self.residual.clone(),
            slow_tier_scheme: self.slow_tier.clone(),
            value_scheme: None,
            budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    /// Regenerated per seed; the spec's own seed is replaced.
    Synthetic(WorkloadSpec),
    /// A directory in the [`Workload::save`] layout, identical for every seed.
    Import(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub workload: WorkloadSource,
    pub schemes: Vec<SchemeSpec>,
    /// Ascending by sparse fraction.
    pub budgets: Vec<BudgetConfig>,
    pub policy: Policy,
    pub seeds: Vec<u64>,
    pub candidate_multiplier: usize,
    /// Oracle size for recall; defaults to the workload's needles per step.
    pub oracle_k: Option<usize>,
    pub aggregation: HeadAggregation,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(workload: WorkloadSpec, schemes: Vec<SchemeSpec>, budgets: Vec<BudgetConfig>, seeds: Vec<u64>) -> Self {
        Self {
            workload: WorkloadSource::Synthetic(workload),
            schemes,
            budgets,
            policy: Policy::Landmark,
            seeds,
            candidate_multiplier: 4,
            oracle_k: None,
            aggregation: HeadAggregation::Sum,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.budgets.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("need at least one scheme, budget and seed".into()));
        }
        if self.budgets.windows(2).any(|w| w[0].sparse_fraction > w[1].sparse_fraction) {
            return Err(Error::Config("budgets must be sorted ascending".into()));
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.schemes {
            if !ids.insert(&s.id) {
                return Err(Error::Config(format!("duplicate scheme id `{}`", s.id)));
            }
            s.store_config(self.budgets[0]).bits_per_key().map_err(|e| grid_error(&s.id, None, None, e))?;
            if self.policy == Policy::ResidualTopk && s.residual.is_none() {
                return Err(Error::Config(format!("scheme `{}` has no residual for residual-topk", s.id)));
            }
        }
        if self.candidate_multiplier == 0 {
            return Err(Error::Config("candidate_multiplier must be >= 1".into()));
        }
        if let WorkloadSource::Synthetic(spec) = &self.workload {
            spec.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: String,
    pub chunk: usize,
    pub bits_per_key: f64,
    pub loaded_fraction: f64,
    pub recall: f64,
    pub rel_error: f64,
    pub n_seeds: usize,
}

fn grid_error(scheme: &str, budget: Option<&BudgetConfig>, seed: Option<u64>, e: Error) -> Error {
    let mut point = format!("scheme={scheme}");
    if let Some(b) = budget {
        point += &format!(" budget={}", b.sparse_fraction);
    }
    if let Some(s) = seed {
        point += &format!(" seed={s}");
    }
    Error::GridPoint { point, source: Box::new(e) }
}

/// Per-step, per-head ground truth shared by every grid point of a seed.
struct Reference {
    oracle: SelectionResult,
    full: AttentionOutput,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    loaded: f64,
    recall: f64,
    rel_error: f64,
}

/// Seeds run on up to `available_parallelism` threads. Per-seed means are
/// summed in seed order, so the output does not depend on the thread count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    run_sweep_with(cfg, std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn run_sweep_with(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let imported = match &cfg.workload {
        WorkloadSource::Import(dir) => Some(Workload::load(dir)?),
        WorkloadSource::Synthetic(_) => None,
    };
    let n_points = cfg.schemes.len() * cfg.budgets.len();
    let workers = threads.min(cfg.seeds.len());
    let per_seed: Vec<Result<Vec<Acc>>> = if workers <= 1 {
        cfg.seeds.iter().map(|&seed| run_seed(cfg, imported.as_ref(), seed)).collect()
    } else {
        let mut slots: Vec<Option<Result<Vec<Acc>>>> = (0..cfg.seeds.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let imported = imported.as_ref();
                    scope.spawn(move || {
                        (w..cfg.seeds.len())
                            .step_by(workers)
                            .map(|i| (i, run_seed(cfg, imported, cfg.seeds[i])))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, r) in h.join().expect("sweep worker panicked") {
                    slots[i] = Some(r);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every seed ran")).collect()
    };

    let mut sums = vec![Acc::default(); n_points];
    for accs in per_seed {
        for (s, a) in sums.iter_mut().zip(accs?) {
            s.loaded += a.loaded;
            s.recall += a.recall;
            s.rel_error += a.rel_error;
        }
    }

    let n = cfg.seeds.len() as f64;
    let mut rows = Vec::with_capacity(n_points);
    for (si, scheme) in cfg.schemes.iter().enumerate() {
        let bits = bits_to_f64(scheme.store_config(cfg.budgets[0]).bits_per_key()?);
        for bi in 0..cfg.budgets.len() {
            let s = sums[si * cfg.budgets.len() + bi];
            rows.push(SweepRow {
                scheme: scheme.id.clone(),
                chunk: scheme.chunk_size,
                bits_per_key: bits,
                loaded_fraction: s.loaded / n,
                recall: s.recall / n,
                rel_error: s.rel_error / n,
                n_seeds: cfg.seeds.len(),
            });
        }
    }
    if let Some(path) = &cfg.output {
        emit_csv(&rows, path)?;
    }
    Ok(rows)
}

/// Means for every grid point of one seed, scheme-major.
fn run_seed(cfg: &ExperimentConfig, imported: Option<&Workload>, seed: u64) -> Result<Vec<Acc>> {
    let generated;
    let w = match (imported, &cfg.workload) {
        (Some(w), _) => w,
        (None, WorkloadSource::Synthetic(spec)) => {
            generated = generate(&WorkloadSpec { seed, ..spec.clone() })?;
            &generated
        }
        (None, WorkloadSource::Import(_)) => unreachable!("imports are loaded before the sweep"),
    };
    let k = cfg.oracle_k.unwrap_or_else(|| w.needles.first().map_or(0, Vec::len));
    if k == 0 {
        return Err(Error::Config("workload has no needles; set oracle_k".into()));
    }
    let reference = references(w, k)?;

    let mut out = Vec::with_capacity(cfg.schemes.len() * cfg.budgets.len());
    for scheme in &cfg.schemes {
        let mut stores: HashMap<(usize, usize), Vec<ChunkedKVStore>> = HashMap::new();
        for budget in &cfg.budgets {
            let fail = |e| grid_error(&scheme.id, Some(budget), Some(seed), e);
            let key = (budget.outlier_tokens, budget.local_window);
            if let std::collections::hash_map::Entry::Vacant(e) = stores.entry(key) {
                let built = w
                    .keys
                    .iter()
                    .zip(&w.values)
                    .map(|(k, v)| ChunkedKVStore::build(k, v, &scheme.store_config(*budget)))
                    .collect::<Result<Vec<_>>>()
                    .map_err(fail)?;
                e.insert(built);
            }
            out.push(evaluate(cfg, w, &stores[&key], budget, &reference).map_err(fail)?);
        }
    }
    Ok(out)
}

fn references(w: &Workload, k: usize) -> Result<Vec<Vec<Reference>>> {
    w.queries
        .iter()
        .map(|step| {
            step.iter()
                .enumerate()
                .map(|(g, q)| {
                    Ok(Reference {
                        oracle: oracle_select(&w.keys[g], q, k)?,
                        full: full_attention(q, &w.keys[g], &w.values[g])?,
                    })
                })
                .collect()
        })
        .collect()
}

/// Mean over steps and kv-heads for one grid point and seed.
fn evaluate(
    cfg: &ExperimentConfig,
    w: &Workload,
    stores: &[ChunkedKVStore],
    budget: &BudgetConfig,
    reference: &[Vec<Reference>],
) -> Result<Acc> {
    let mut acc = Acc::default();
    let mut count = 0.0;
    for (step, queries) in w.queries.iter().enumerate() {
        for (g, q) in queries.iter().enumerate() {
            let store = &stores[g];
            let r = &reference[step][g];
            let k = budget.sparse_tokens(store.n_tokens());
            let sel = match cfg.policy {
                Policy::Landmark => select_by_landmarks_with(store, q, budget, cfg.aggregation)?,
                Policy::Oracle => oracle_select_in_store(store, q, k)?,
                Policy::ResidualTopk => approx_topk_residual(store, q, k, cfg.candidate_multiplier)?,
            };
            let att = sparse_attention(q, store, &sel, Some(&r.full))?;
            acc.loaded += sel.loaded_fraction;
            acc.recall += recall(&sel, &r.oracle)?;
            acc.rel_error += att.rel_error_vs_full.unwrap_or(0.0);
            count += 1.0;
        }
    }
    Ok(Acc { loaded: acc.loaded / count, recall: acc.recall / count, rel_error: acc.rel_error / count })
}
