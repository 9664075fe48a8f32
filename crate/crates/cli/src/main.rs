use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use kvlab::harness::{self, Policy};
use kvlab::kvstore::BudgetConfig;
use kvlab::text2json::{self, Subset};
use kvlab::workload::{self, Workload, WorkloadSpec};

#[derive(Parser)]
#[command(name = "kvlab", version, about = "Sparse-attention KV offloading experiments")]
struct Cli {
    /// Seed override; for run-sweep it replaces the seed list with this one seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-needle workload directory.
    GenWorkload(GenWorkload),
    /// Run an experiment config and write the result CSV.
    RunSweep(RunSweep),
    /// Generate one Text2JSON prompt with its gold records.
    GenText2json(GenText2json),
    /// Score a model prediction against gold records.
    ScoreText2json(ScoreText2json),
    /// Validate exported KVT tensors and write them as a workload directory.
    ImportKvt(ImportKvt),
}

#[derive(Args)]
struct GenWorkload {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8192)]
    n_tokens: usize,
    #[arg(long, default_value_t = 128)]
    head_dim: usize,
    #[arg(long, default_value_t = 16)]
    n_needles: usize,
    #[arg(long, default_value_t = 0.9)]
    needle_alignment: f64,
    #[arg(long)]
    kv_heads: Option<usize>,
    #[arg(long)]
    query_heads_per_group: Option<usize>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    decode_steps: Option<usize>,
    #[arg(long)]
    local_window: Option<usize>,
    #[arg(long)]
    query_jitter: Option<f64>,
    #[arg(long)]
    query_gain: Option<f64>,
}

#[derive(Args)]
struct RunSweep {
    /// INI experiment file.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write one TSV series per scheme here.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
    #[arg(long)]
    policy: Option<Policy>,
    /// Comma-separated sparse fractions, ascending.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<f64>>,
    #[arg(long)]
    candidate_multiplier: Option<usize>,
    #[arg(long)]
    oracle_k: Option<usize>,
}

#[derive(Args)]
struct GenText2json {
    #[arg(long)]
    subset: Subset,
    #[arg(long)]
    out: PathBuf,
    /// File stem; defaults to `<subset>-<seed>`.
    #[arg(long)]
    stem: Option<String>,
    /// Plain-text filler corpus, passages separated by blank lines.
    #[arg(long)]
    filler: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreText2json {
    #[arg(long)]
    prediction: PathBuf,
    #[arg(long)]
    gold: PathBuf,
}

#[derive(Args)]
struct ImportKvt {
    #[arg(long)]
    keys: PathBuf,
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenWorkload(a) => gen_workload(a, seed.unwrap_or(0)),
        Command::RunSweep(a) => run_sweep(a, seed),
        Command::GenText2json(a) => gen_text2json(a, seed.unwrap_or(0)),
        Command::ScoreText2json(a) => score_text2json(a),
        Command::ImportKvt(a) => import_kvt(a),
    }
}

fn gen_workload(a: GenWorkload, seed: u64) -> Result<()> {
    let mut spec = WorkloadSpec::new(a.n_tokens, a.head_dim, a.n_needles, a.needle_alignment, seed);
    spec.kv_heads = a.kv_heads.unwrap_or(spec.kv_heads);
    spec.query_heads_per_group = a.query_heads_per_group.unwrap_or(spec.query_heads_per_group);
    spec.noise_scale = a.noise_scale.unwrap_or(spec.noise_scale);
    spec.decode_steps = a.decode_steps.unwrap_or(spec.decode_steps);
    spec.local_window = a.local_window.unwrap_or(spec.local_window);
    spec.query_jitter = a.query_jitter.unwrap_or(spec.query_jitter);
    spec.query_gain = a.query_gain.unwrap_or(spec.query_gain);
    let w = workload::generate(&spec)?;
    w.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "wrote {} tokens x {} kv-heads, {} steps to {}",
        spec.n_tokens,
        spec.kv_heads,
        spec.decode_steps,
        a.out.display()
    );
    Ok(())
}

fn run_sweep(a: RunSweep, seed: Option<u64>) -> Result<()> {
    let mut cfg = harness::read_config(&a.config).with_context(|| format!("loading {}", a.config.display()))?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(p) = a.policy {
        cfg.policy = p;
    }
    if let Some(fractions) = a.budgets {
        let (outliers, window) = (cfg.budgets[0].outlier_tokens, cfg.budgets[0].local_window);
        cfg.budgets =
            fractions.into_iter().map(|f| BudgetConfig::new(f, outliers, window)).collect::<kvlab::Result<_>>()?;
    }
    if let Some(m) = a.candidate_multiplier {
        cfg.candidate_multiplier = m;
    }
    if a.oracle_k.is_some() {
        cfg.oracle_k = a.oracle_k;
    }
    if a.output.is_some() {
        cfg.output = a.output;
    }
    let Some(output) = cfg.output.take() else {
        bail!("no output path: set `output` in [sweep] or pass --output");
    };
    let rows = harness::run_sweep(&cfg)?;
    harness::emit_csv(&rows, &output)?;
    if let Some(dir) = &a.plot_dir {
        harness::emit_plot_data(&rows, dir)?;
    }
    println!("wrote {} rows to {}", rows.len(), output.display());
    Ok(())
}

fn gen_text2json(a: GenText2json, seed: u64) -> Result<()> {
    let filler = a.filler.as_deref().map(text2json::read_filler_corpus).transpose()?;
    let inst = text2json::generate_instance(a.subset, seed, filler.as_deref())?;
    let stem = a.stem.unwrap_or_else(|| format!("{}-{seed}", a.subset));
    inst.save(&a.out, &stem)?;
    println!("{} entries, {} passages -> {}", inst.gold.len(), inst.n_passages, a.out.join(&stem).display());
    Ok(())
}

fn score_text2json(a: ScoreText2json) -> Result<()> {
    let prediction = read(&a.prediction)?;
    let gold = text2json::read_gold(&a.gold)?;
    let report = text2json::score(&prediction, &gold);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn import_kvt(a: ImportKvt) -> Result<()> {
    let tensors = [(&a.keys, "keys.kvt"), (&a.values, "values.kvt"), (&a.queries, "queries.kvt")].map(|(src, name)| {
        workload::import_kvt(src).with_context(|| format!("reading {}", src.display())).map(|t| (name, t))
    });
    let staging = staging_dir(&a.out)?;
    let loaded = tensors
        .into_iter()
        .try_for_each(|t| {
            let (name, t) = t?;
            kvlab::numerics::kvt::write(staging.join(name), &t).map_err(anyhow::Error::from)
        })
        .and_then(|()| Workload::load(&staging).map_err(anyhow::Error::from));
    std::fs::remove_dir_all(&staging).ok();
    let w = loaded?;
    w.save(&a.out)?;
    println!(
        "imported {} tokens x {} kv-heads, head_dim {}, {} steps to {}",
        w.spec.n_tokens,
        w.spec.kv_heads,
        w.spec.head_dim,
        w.queries.len(),
        a.out.display()
    );
    Ok(())
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let dir = out.join(".import-staging");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}
