use std::path::Path;
use std::process::{Command, Output};

fn kvlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvlab")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const SWEEP: &str = "\
[workload]
import = w

[sweep]
budgets = 0.03125, 0.125
seeds = 0, 1

[scheme.bf16-c8]
landmark = bf16
chunk = 8

[scheme.h2-c1]
landmark = higgs2
chunk = 1
";

#[test]
fn workload_then_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(kvlab(
        &[
            "--seed",
            "4",
            "gen-workload",
            "--out",
            "w",
            "--n-tokens",
            "512",
            "--head-dim",
            "32",
            "--n-needles",
            "4",
            "--decode-steps",
            "2",
        ],
        d,
    ));
    for f in ["keys.kvt", "values.kvt", "queries.kvt", "needles.json"] {
        assert!(d.join("w").join(f).exists(), "{f}");
    }
    std::fs::write(d.join("exp.ini"), SWEEP).unwrap();
    let missing = kvlab(&["run-sweep", "--config", "exp.ini"], d);
    assert!(!missing.status.success(), "no output path must fail");

    ok(kvlab(&["run-sweep", "--config", "exp.ini", "--output", "a.csv", "--plot-dir", "plots"], d));
    let csv = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("scheme,chunk,bits_per_key,loaded_fraction,recall,rel_error,n_seeds\n"));
    assert!(d.join("plots/h2-c1.tsv").exists());

    ok(kvlab(
        &[
            "--seed",
            "9",
            "run-sweep",
            "--config",
            "exp.ini",
            "--output",
            "b.csv",
            "--policy",
            "oracle",
            "--budgets",
            "0.0625",
        ],
        d,
    ));
    let rows = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.lines().skip(1).all(|l| l.ends_with(",1")), "{rows}");
}

#[test]
fn grid_point_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(kvlab(
        &[
            "gen-workload",
            "--out",
            "w",
            "--n-tokens",
            "256",
            "--head-dim",
            "16",
            "--n-needles",
            "2",
            "--decode-steps",
            "1",
        ],
        d,
    ));
    let bad = SWEEP.replace("chunk = 1\n", "chunk = 1\nslow_tier = svd:rank=64\n");
    std::fs::write(d.join("exp.ini"), bad).unwrap();
    let out = kvlab(&["run-sweep", "--config", "exp.ini", "--output", "r.csv"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scheme=h2-c1"), "{err}");
    assert!(!d.join("r.csv").exists());

    let out = kvlab(&["run-sweep", "--config", "exp.ini", "--output", "r.csv", "--policy", "psychic"], d);
    assert!(!out.status.success());
}

#[test]
fn text2json_generate_and_score() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let msg = ok(kvlab(&["--seed", "12", "gen-text2json", "--subset", "products", "--out", "t"], d));
    assert!(msg.contains("entries"));
    let prompt = std::fs::read_to_string(d.join("t/products-12.prompt.txt")).unwrap();
    assert!(prompt.ends_with("do not produce duplicates."), "instruction comes last");

    let report = ok(kvlab(
        &["score-text2json", "--prediction", "t/products-12.gold.json", "--gold", "t/products-12.gold.json"],
        d,
    ));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["score"], 1.0);

    std::fs::write(d.join("empty.txt"), "").unwrap();
    let report = ok(kvlab(&["score-text2json", "--prediction", "empty.txt", "--gold", "t/products-12.gold.json"], d));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["score"], 0.0);

    std::fs::write(d.join("filler.txt"), "one\n\ntwo\n").unwrap();
    let out = kvlab(&["gen-text2json", "--subset", "movies", "--out", "t", "--filler", "filler.txt"], d);
    assert!(!out.status.success(), "two passages are too few");
}

#[test]
fn import_exported_tensors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(kvlab(
        &[
            "gen-workload",
            "--out",
            "src",
            "--n-tokens",
            "256",
            "--head-dim",
            "16",
            "--n-needles",
            "2",
            "--decode-steps",
            "1",
        ],
        d,
    ));
    let msg = ok(kvlab(
        &[
            "import-kvt",
            "--keys",
            "src/keys.kvt",
            "--values",
            "src/values.kvt",
            "--queries",
            "src/queries.kvt",
            "--out",
            "dst",
        ],
        d,
    ));
    assert!(msg.contains("256 tokens"), "{msg}");
    for f in ["keys.kvt", "values.kvt", "queries.kvt"] {
        assert_eq!(std::fs::read(d.join("src").join(f)).unwrap(), std::fs::read(d.join("dst").join(f)).unwrap());
    }
    assert!(!d.join("dst/.import-staging").exists());

    std::fs::write(d.join("junk.kvt"), b"nope").unwrap();
    let out = kvlab(
        &[
            "import-kvt",
            "--keys",
            "junk.kvt",
            "--values",
            "src/values.kvt",
            "--queries",
            "src/queries.kvt",
            "--out",
            "bad",
        ],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KVT1"));
    assert!(!d.join("bad/.import-staging").exists());
}
