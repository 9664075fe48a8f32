use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] =
    ["scheme", "chunk", "bits_per_key", "loaded_fraction", "recall", "rel_error", "n_seeds"];

#[derive(Serialize, Deserialize)]
struct Record {
    scheme: String,
    chunk: usize,
    bits_per_key: f64,
    loaded_fraction: f64,
    recall: f64,
    rel_error: f64,
    n_seeds: usize,
}

/// Writes rows under [`CSV_HEADER`]. Floats use shortest round-trip formatting.
pub fn emit_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if rows.is_empty() {
        return Err(Error::invalid("no rows to emit"));
    }
    let file = std::fs::File::create(path).map_err(Error::at_path(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(Record {
            scheme: r.scheme.clone(),
            chunk: r.chunk,
            bits_per_key: r.bits_per_key,
            loaded_fraction: r.loaded_fraction,
            recall: r.recall,
            rel_error: r.rel_error,
            n_seeds: r.n_seeds,
        })?;
    }
    w.flush().map_err(Error::at_path(path))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(Error::invalid(format!("{}: unexpected CSV header", path.display())));
    }
    r.deserialize::<Record>()
        .map(|rec| {
            let rec = rec?;
            Ok(SweepRow {
                scheme: rec.scheme,
                chunk: rec.chunk,
                bits_per_key: rec.bits_per_key,
                loaded_fraction: rec.loaded_fraction,
                recall: rec.recall,
                rel_error: rec.rel_error,
                n_seeds: rec.n_seeds,
            })
        })
        .collect()
}

/// One tab-separated series per scheme, `<dir>/<scheme>.tsv`, in row order.
/// Returns the files written.
pub fn emit_plot_data(rows: &[SweepRow], dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    if rows.is_empty() {
        return Err(Error::invalid("no rows to emit"));
    }
    std::fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.scheme.as_str()) {
            order.push(&r.scheme);
        }
    }
    let mut written = Vec::new();
    for scheme in order {
        let mut text = String::from("# loaded_fraction\trecall\trel_error\tbits_per_key\n");
        for r in rows.iter().filter(|r| r.scheme == scheme) {
            let _ = writeln!(text, "{}\t{}\t{}\t{}", r.loaded_fraction, r.recall, r.rel_error, r.bits_per_key);
        }
        let name: String =
            scheme.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
        let path = dir.join(format!("{name}.tsv"));
        std::fs::write(&path, text).map_err(Error::at_path(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow {
                scheme: "bf16@8".into(),
                chunk: 8,
                bits_per_key: 2.0,
                loaded_fraction: 0.015625,
                recall: 0.1 + 0.2,
                rel_error: 1e-7,
                n_seeds: 3,
            },
            SweepRow {
                scheme: "h2, c1".into(),
                chunk: 1,
                bits_per_key: 1.5,
                loaded_fraction: 1.0 / 3.0,
                recall: 0.0,
                rel_error: 0.25,
                n_seeds: 3,
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_csv(&rows(), &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("scheme,chunk,bits_per_key,loaded_fraction,recall,rel_error,n_seeds\n"));
        assert!(emit_csv(&[], &path).is_err());
        assert!(emit_csv(&rows(), dir.path().join("missing/out.csv")).is_err());
    }

    #[test]
    fn plot_series_per_scheme() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&rows(), dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        assert!(files[1].ends_with("h2__c1.tsv"));
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text.lines().count(), 2);
    }
}
