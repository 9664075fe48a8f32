//! INI experiment files.
//!
//! ```ini
//! [workload]
//! n_tokens = 8192
//! head_dim = 128
//! n_needles = 16
//! needle_alignment = 0.9
//! ; or: import = path/to/workload_dir
//!
//! [sweep]
//! policy = landmark
//! budgets = 0.00390625, 0.0078125, 0.015625
//! outlier_tokens = 0
//! local_window = 0
//! seeds = 0..200
//! output = results.csv
//!
//! [scheme.h2-c1]
//! landmark = higgs2
//! chunk = 1
//! ```
//!
//! Unset workload keys take their [`WorkloadSpec::new`] defaults. Relative
//! paths resolve against the directory of the config file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use super::{ExperimentConfig, Policy, SchemeSpec, WorkloadSource};
use crate::error::{Error, Result};
use crate::kvstore::BudgetConfig;
use crate::quantization::SchemeDescriptor;
use crate::selection::HeadAggregation;
use crate::workload::WorkloadSpec;

const WORKLOAD_KEYS: &[&str] = &[
    "import",
    "n_tokens",
    "kv_heads",
    "query_heads_per_group",
    "head_dim",
    "n_needles",
    "needle_alignment",
    "noise_scale",
    "decode_steps",
    "local_window",
    "query_jitter",
    "query_gain",
];
const SWEEP_KEYS: &[&str] = &[
    "policy",
    "budgets",
    "outlier_tokens",
    "local_window",
    "seeds",
    "candidate_multiplier",
    "oracle_k",
    "aggregation",
    "output",
];
const SCHEME_KEYS: &[&str] = &["landmark", "chunk", "residual", "slow_tier"];

pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(Error::at_path(path))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::Config(e.to_string()))?;

    let mut workload = None;
    let mut sweep = None;
    let mut schemes = Vec::new();
    for (name, props) in ini.iter() {
        match name {
            None if props.is_empty() => {}
            None => return Err(Error::Config("keys outside a section".into())),
            Some("workload") => workload = Some(props),
            Some("sweep") => sweep = Some(props),
            Some(s) => match s.strip_prefix("scheme.") {
                Some(id) if !id.trim().is_empty() => schemes.push(parse_scheme(id.trim(), props)?),
                _ => return Err(Error::Config(format!("unknown section [{s}]"))),
            },
        }
    }
    let workload = workload.ok_or_else(|| Error::Config("missing [workload]".into()))?;
    let sweep = sweep.ok_or_else(|| Error::Config("missing [sweep]".into()))?;
    if schemes.is_empty() {
        return Err(Error::Config("no [scheme.<id>] sections".into()));
    }

    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };

    check_keys("workload", workload, WORKLOAD_KEYS)?;
    let source = match workload.get("import") {
        Some(dir) => {
            if workload.len() > 1 {
                return Err(Error::Config("[workload] import excludes other keys".into()));
            }
            WorkloadSource::Import(resolve(dir))
        }
        None => WorkloadSource::Synthetic(parse_workload(workload)?),
    };

    check_keys("sweep", sweep, SWEEP_KEYS)?;
    let outlier_tokens = opt(sweep, "outlier_tokens")?.unwrap_or(0);
    let local_window = opt(sweep, "local_window")?.unwrap_or(0);
    let fractions = parse_list::<f64>(required(sweep, "budgets")?, "budgets")?;
    let budgets = fractions
        .into_iter()
        .map(|f| BudgetConfig::new(f, outlier_tokens, local_window))
        .collect::<Result<Vec<_>>>()?;

    let cfg = ExperimentConfig {
        workload: source,
        schemes,
        budgets,
        policy: opt(sweep, "policy")?.unwrap_or(Policy::Landmark),
        seeds: parse_seeds(required(sweep, "seeds")?)?,
        candidate_multiplier: opt(sweep, "candidate_multiplier")?.unwrap_or(4),
        oracle_k: opt(sweep, "oracle_k")?,
        aggregation: match sweep.get("aggregation").map(str::trim) {
            None | Some("sum") => HeadAggregation::Sum,
            Some("max") => HeadAggregation::Max,
            Some(other) => return Err(Error::Config(format!("unknown aggregation `{other}`"))),
        },
        output: sweep.get("output").map(resolve),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn check_keys(section: &str, props: &Properties, allowed: &[&str]) -> Result<()> {
    match props.iter().find(|(k, _)| !allowed.contains(k)) {
        Some((k, _)) => Err(Error::Config(format!("unknown key `{k}` in [{section}]"))),
        None => Ok(()),
    }
}

fn required<'a>(props: &'a Properties, key: &str) -> Result<&'a str> {
    props.get(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

fn opt<T: FromStr>(props: &Properties, key: &str) -> Result<Option<T>> {
    props
        .get(key)
        .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))))
        .transpose()
}

fn parse_list<T: FromStr>(text: &str, key: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("bad entry `{s}` in `{key}`"))))
        .collect()
}

/// `a..b` (half-open) or a comma list.
fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad seed range `{text}`")));
        let (a, b) = (parse(a)?, parse(b)?);
        if a >= b {
            return Err(Error::Config(format!("empty seed range `{text}`")));
        }
        return Ok((a..b).collect());
    }
    let seeds = parse_list(text, "seeds")?;
    if seeds.is_empty() {
        return Err(Error::Config("no seeds".into()));
    }
    Ok(seeds)
}

fn parse_workload(p: &Properties) -> Result<WorkloadSpec> {
    let n = opt(p, "n_tokens")?.ok_or_else(|| Error::Config("missing key `n_tokens`".into()))?;
    let hd = opt(p, "head_dim")?.ok_or_else(|| Error::Config("missing key `head_dim`".into()))?;
    let needles = opt(p, "n_needles")?.ok_or_else(|| Error::Config("missing key `n_needles`".into()))?;
    let alpha = opt(p, "needle_alignment")?.ok_or_else(|| Error::Config("missing key `needle_alignment`".into()))?;
    let mut s = WorkloadSpec::new(n, hd, needles, alpha, 0);
    if let Some(v) = opt(p, "kv_heads")? {
        s.kv_heads = v;
    }
    if let Some(v) = opt(p, "query_heads_per_group")? {
        s.query_heads_per_group = v;
    }
    if let Some(v) = opt(p, "noise_scale")? {
        s.noise_scale = v;
    }
    if let Some(v) = opt(p, "decode_steps")? {
        s.decode_steps = v;
    }
    if let Some(v) = opt(p, "local_window")? {
        s.local_window = v;
    }
    if let Some(v) = opt(p, "query_jitter")? {
        s.query_jitter = v;
    }
    if let Some(v) = opt(p, "query_gain")? {
        s.query_gain = v;
    }
    s.validate()?;
    Ok(s)
}

fn parse_scheme(id: &str, p: &Properties) -> Result<SchemeSpec> {
    check_keys(&format!("scheme.{id}"), p, SCHEME_KEYS)?;
    let scheme = |key: &str| -> Result<Option<SchemeDescriptor>> {
        p.get(key).map(|v| v.parse().map_err(|e| Error::Config(format!("[scheme.{id}] {key}: {e}")))).transpose()
    };
    Ok(SchemeSpec {
        id: id.to_string(),
        landmark: scheme("landmark")?.ok_or_else(|| Error::Config(format!("[scheme.{id}] needs `landmark`")))?,
        chunk_size: opt(p, "chunk")?.ok_or_else(|| Error::Config(format!("[scheme.{id}] needs `chunk`")))?,
        residual: scheme("residual")?,
        slow_tier: scheme("slow_tier")?.unwrap_or(SchemeDescriptor::None),
    })
}
