//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use kvlab::harness::{run_sweep, ExperimentConfig, Policy, SchemeSpec, SweepRow};
use kvlab::kvstore::{BudgetConfig, ChunkedKVStore, StoreConfig};
use kvlab::numerics::matmul_transposed;
use kvlab::quantization::{self, bits_to_f64, SchemeDescriptor as S};
use kvlab::selection::{oracle_select, residual_scores, select_by_landmarks};
use kvlab::text2json::{self, EntryRecord, Subset};
use kvlab::workload::{generate, WorkloadSpec};
use kvlab::TensorF32;

const SEEDS: u64 = 200;
const GRID: [f64; 6] = [1.0 / 256.0, 1.0 / 128.0, 1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0];
/// 1.56% of the sequence.
const FIXED: f64 = 1.0 / 64.0;

type Check = fn() -> Result<Verdict>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict { pass, detail: detail.into() })
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> TensorF32 {
    let data = (0..rows * cols).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    TensorF32::matrix(rows, cols, data).unwrap()
}

fn budgets(fractions: &[f64]) -> Vec<BudgetConfig> {
    fractions.iter().map(|&f| BudgetConfig::new(f, 0, 0).unwrap()).collect()
}

fn needle_workload() -> WorkloadSpec {
    WorkloadSpec::new(8192, 128, 16, 0.9, 0)
}

fn higgs(bits: u32) -> S {
    S::higgs(bits).unwrap()
}

fn residual_scheme() -> SchemeSpec {
    SchemeSpec::new("h4@8+r1", higgs(4), 8).with_residual(higgs(1))
}

struct Sweeps {
    landmark: Vec<SweepRow>,
    residual: Vec<SweepRow>,
    oracle: Vec<SweepRow>,
}

/// Shared by the selection criteria: every policy over the full budget grid.
fn sweeps() -> Result<&'static Sweeps> {
    static CELL: OnceLock<Sweeps> = OnceLock::new();
    if let Some(s) = CELL.get() {
        return Ok(s);
    }
    let schemes = vec![
        SchemeSpec::new("bf16@1", S::None, 1),
        SchemeSpec::new("bf16@8", S::None, 8),
        SchemeSpec::new("h2@1", higgs(2), 1),
        SchemeSpec::new("h4@2", higgs(4), 2),
        SchemeSpec::new("h1@1", higgs(1), 1),
    ];
    let seeds: Vec<u64> = (0..SEEDS).collect();
    let landmark =
        run_sweep(&ExperimentConfig::new(needle_workload(), schemes.clone(), budgets(&GRID), seeds.clone()))?;

    // Candidates cover every chunk, so the ranking is the full residual top-k.
    let mut cfg = ExperimentConfig::new(needle_workload(), vec![residual_scheme()], budgets(&GRID), seeds.clone());
    cfg.policy = Policy::ResidualTopk;
    cfg.candidate_multiplier = 8192 / 8;
    let residual = run_sweep(&cfg)?;

    let mut all = schemes;
    all.push(residual_scheme());
    let mut cfg = ExperimentConfig::new(needle_workload(), all, budgets(&GRID), seeds);
    cfg.policy = Policy::Oracle;
    let oracle = run_sweep(&cfg)?;
    Ok(CELL.get_or_init(|| Sweeps { landmark, residual, oracle }))
}

fn row<'a>(rows: &'a [SweepRow], scheme: &str, fraction: f64) -> Result<&'a SweepRow> {
    rows.iter()
        .find(|r| r.scheme == scheme && (r.loaded_fraction - fraction).abs() < 1e-9)
        .with_context(|| format!("no row for {scheme} at loaded fraction {fraction}"))
}

fn decomposition_identity() -> Result<Verdict> {
    let schemes = [S::None, S::fp8(), S::nvfp4(), higgs(4), higgs(2), higgs(1), S::svd(4)];
    let combos: Vec<(usize, usize)> =
        (0..schemes.len()).flat_map(|a| (0..schemes.len()).map(move |b| (a, b))).collect();
    let (mut checked, mut failures, mut worst) = (0usize, 0usize, 0.0f64);
    for i in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let (li, ri) = combos[i as usize % combos.len()];
        let chunk = [1, 2, 4, 8][rng.gen_range(0..4)];
        let n = rng.gen_range(64..400);
        let d = [16, 32, 64, 128][rng.gen_range(0..4)];
        let mut keys = gaussian(&mut rng, n, d).into_data();
        let offsets: Vec<f32> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        keys.iter_mut().enumerate().for_each(|(j, k)| *k += offsets[j % d]);
        let keys = TensorF32::matrix(n, d, keys)?;
        let values = gaussian(&mut rng, n, d);
        let heads = rng.gen_range(1..=4);
        let queries = gaussian(&mut rng, heads, d);
        let cfg = StoreConfig::new(chunk, schemes[li].clone(), BudgetConfig::new(0.1, 0, 0)?)
            .with_residual(schemes[ri].clone());
        let store = ChunkedKVStore::build(&keys, &values, &cfg)?;
        let scores = residual_scores(&store, &queries)?;
        for (t, &s) in scores.iter().enumerate() {
            let k = store.approx_key(t)?;
            let k = k.data();
            let knorm = k.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            let (mut direct, mut scale) = (0.0f64, 0.0f64);
            for q in queries.row_iter() {
                direct += q.iter().zip(k).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>();
                scale += q.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt() * knorm;
            }
            let rel = (s as f64 - direct).abs() / direct.abs().max(scale).max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            failures += usize::from(rel > 1e-5);
            checked += 1;
        }
    }
    verdict(
        failures == 0,
        format!(
            "{checked} token scores over 100 stores and 49 scheme pairs, {failures} outside 1e-5, worst {worst:.2e}"
        ),
    )
}

fn oracle_equivalence() -> Result<Verdict> {
    let mut mismatches = 0;
    let mut compared = 0;
    for seed in 0..100u64 {
        let mut spec = WorkloadSpec::new(2048, 64, 8, 0.9, seed);
        spec.local_window = 0;
        let w = generate(&spec)?;
        let budget = BudgetConfig::new(GRID[seed as usize % GRID.len()], 0, 0)?;
        let store = ChunkedKVStore::build(&w.keys[0], &w.values[0], &StoreConfig::new(1, S::None, budget))?;
        for q in w.queries.iter().map(|step| &step[0]) {
            let by_landmark = select_by_landmarks(&store, q, &budget)?;
            let oracle = oracle_select(&w.keys[0], q, budget.sparse_tokens(2048))?;
            mismatches += usize::from(by_landmark.token_ids != oracle.token_ids);
            compared += 1;
        }
    }
    verdict(mismatches == 0, format!("{compared} selections on 100 instances, {mismatches} differ"))
}

fn chunking_hurts() -> Result<Verdict> {
    let s = sweeps()?;
    let c1 = row(&s.landmark, "bf16@1", FIXED)?.recall;
    let c8 = row(&s.landmark, "bf16@8", FIXED)?.recall;
    verdict(c1 - c8 > 0.05, format!("recall at 1.56%: chunk 1 {c1:.4}, chunk 8 {c8:.4}, margin {:.4}", c1 - c8))
}

fn equal_memory_ordering() -> Result<Verdict> {
    let s = sweeps()?;
    let r = |id| row(&s.landmark, id, FIXED).map(|r| (r.recall, r.bits_per_key));
    let (h2, b2) = r("h2@1")?;
    let (h4, b4) = r("h4@2")?;
    let (bf, b16) = r("bf16@8")?;
    let (full, _) = r("bf16@1")?;
    let bits_ok = [b2, b4, b16].iter().all(|&b| b == 2.0);
    verdict(
        bits_ok && h2 >= h4 && h4 >= bf && full - h2 <= 0.05,
        format!("2 bits/key: h2@1 {h2:.4} >= h4@2 {h4:.4} >= bf16@8 {bf:.4}; lossless chunk 1 {full:.4}"),
    )
}

fn residual_config() -> Result<Verdict> {
    let s = sweeps()?;
    let res = row(&s.residual, "h4@8+r1", FIXED)?;
    let h1 = row(&s.landmark, "h1@1", FIXED)?.recall;
    let h2 = row(&s.landmark, "h2@1", FIXED)?.recall;
    let exact =
        StoreConfig::new(8, higgs(4), BudgetConfig::new(FIXED, 0, 0)?).with_residual(higgs(1)).bits_per_key()?;
    let bits_ok = (*exact.numer(), *exact.denom()) == (3, 2) && res.bits_per_key == 1.5;
    verdict(
        bits_ok && res.recall >= h1 && h2 - res.recall <= 0.08,
        format!("{} bits/key: recall {:.4} vs h1@1 {h1:.4}, h2@1 {h2:.4}", res.bits_per_key, res.recall),
    )
}

fn fidelity_ordering() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let keys = gaussian(&mut rng, 4096, 1024);
    let queries = gaussian(&mut rng, 1000, 1024);
    let score_rms = |scheme: &S| -> Result<f64> {
        let err = quantization::roundtrip(&keys, scheme)?.sub(&keys)?;
        let s = matmul_transposed(&err, &queries)?;
        Ok((s.data().iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / s.len() as f64).sqrt())
    };
    let fp8 = score_rms(&S::fp8())?;
    let svd: Vec<f64> = [160, 256, 512].iter().map(|&r| score_rms(&S::svd(r))).collect::<Result<_>>()?;
    verdict(
        svd[0] > fp8 && svd[0] > svd[1] && svd[1] > svd[2],
        format!("score RMS: fp8 {fp8:.4}, svd 160/256/512 {:.3}/{:.3}/{:.3}", svd[0], svd[1], svd[2]),
    )
}

fn bit_accounting() -> Result<Verdict> {
    let nvfp4 = bits_to_f64(S::nvfp4().bits_per_value()?);
    let h = bits_to_f64(higgs(4).bits_per_value()?);
    let b = BudgetConfig::new(FIXED, 0, 0)?;
    let triple: Vec<f64> = [(higgs(2), 1), (higgs(4), 2), (S::None, 8)]
        .into_iter()
        .map(|(s, c)| StoreConfig::new(c, s, b).bits_per_key().map(bits_to_f64))
        .collect::<kvlab::Result<_>>()?;
    let res = StoreConfig::new(8, higgs(4), b).with_residual(higgs(1)).bits_per_key()?;
    verdict(
        nvfp4 == 4.5
            && (h - 4.02).abs() <= 0.02
            && triple.iter().all(|&x| x == 2.0)
            && (*res.numer(), *res.denom()) == (3, 2),
        format!("nvfp4 {nvfp4}, higgs 4-bit {h:.4}, 2-bit triple {triple:?}, residual {res}"),
    )
}

fn record_json(records: &[EntryRecord]) -> String {
    serde_json::to_string(records).unwrap()
}

fn text2json_metric() -> Result<Verdict> {
    let mut problems = Vec::new();
    let mut perturbations = 0;
    for t in 0..1000u64 {
        let subset = Subset::ALL[t as usize % Subset::ALL.len()];
        let inst = text2json::generate_instance(subset, t, None)?;
        if !(3..=20).contains(&inst.gold.len()) || !(3..=10).contains(&inst.n_passages) {
            problems.push(format!("instance {t}: {} entries, {} passages", inst.gold.len(), inst.n_passages));
        }
        if text2json::score(&record_json(&inst.gold), &inst.gold).score != 1.0 {
            problems.push(format!("instance {t}: gold does not score 1"));
        }
        if text2json::score("", &inst.gold).score != 0.0 {
            problems.push(format!("instance {t}: empty prediction scores above 0"));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(t);
        let mut pred: Vec<EntryRecord> = inst.gold.iter().filter(|_| rng.gen_bool(0.8)).cloned().collect();
        for r in pred.iter_mut() {
            for v in r.fields.values_mut() {
                if rng.gen_bool(0.3) {
                    v.push_str(" (revised)");
                }
            }
        }
        let before = text2json::score(&record_json(&pred), &inst.gold).score;
        for j in 0..rng.gen_range(1..=3) {
            let mut fake = inst.gold[0].clone();
            fake.name = format!("Unlisted Entry {t}-{j}");
            let at = rng.gen_range(0..=pred.len());
            pred.insert(at, fake);
        }
        let after = text2json::score(&record_json(&pred), &inst.gold).score;
        if !(after < before || before == 0.0 && after == 0.0) {
            problems.push(format!("perturbation {t}: {before} -> {after}"));
        }
        perturbations += 1;
    }
    verdict(
        problems.is_empty(),
        match problems.first() {
            None => format!("1000 instances in range and self-scoring 1.0, {perturbations} spurious insertions all lowered the score"),
            Some(p) => format!("{} problems, first: {p}", problems.len()),
        },
    )
}

fn sweep_determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("sweep.ini");
    std::fs::write(
        &config,
        "[workload]\nn_tokens = 1024\nhead_dim = 32\nn_needles = 4\nneedle_alignment = 0.9\n\n\
         [sweep]\npolicy = landmark\nbudgets = 0.015625, 0.0625\nseeds = 0..3\n\n\
         [scheme.bf16-c8]\nlandmark = bf16\nchunk = 8\n\n\
         [scheme.h2-c1]\nlandmark = higgs2\nchunk = 1\n",
    )?;
    let run = |name: &str| -> Result<Vec<u8>> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_kvlab"))
            .args(["run-sweep", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(&out)
            .output()?;
        ensure!(status.status.success(), "run-sweep failed: {}", String::from_utf8_lossy(&status.stderr));
        Ok(std::fs::read(out)?)
    };
    let (a, b) = (run("a.csv")?, run("b.csv")?);
    verdict(a == b && !a.is_empty(), format!("two runs, {} bytes each, identical: {}", a.len(), a == b))
}

fn budget_monotonicity() -> Result<Verdict> {
    let s = sweeps()?;
    let mut violations = Vec::new();
    let mut series = 0;
    for (policy, rows) in [("landmark", &s.landmark), ("residual-topk", &s.residual), ("oracle", &s.oracle)] {
        let mut schemes: Vec<&str> = rows.iter().map(|r| r.scheme.as_str()).collect();
        schemes.dedup();
        for scheme in schemes {
            let recalls: Vec<f64> = rows.iter().filter(|r| r.scheme == scheme).map(|r| r.recall).collect();
            series += 1;
            if recalls.len() != GRID.len() || recalls.windows(2).any(|w| w[1] < w[0]) {
                violations.push(format!("{policy}/{scheme} {recalls:?}"));
            }
        }
    }
    verdict(
        violations.is_empty(),
        if violations.is_empty() {
            format!("{series} policy/scheme series non-decreasing over 6 budgets")
        } else {
            violations.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("decomposition identity", decomposition_identity),
        ("oracle equivalence", oracle_equivalence),
        ("chunking hurts selection", chunking_hurts),
        ("equal-memory ordering", equal_memory_ordering),
        ("residual landmark config", residual_config),
        ("compression fidelity ordering", fidelity_ordering),
        ("bit accounting", bit_accounting),
        ("text2json metric", text2json_metric),
        ("sweep determinism", sweep_determinism),
        ("recall/budget monotonicity", budget_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e:#}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name}: {detail} ({:.1}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
