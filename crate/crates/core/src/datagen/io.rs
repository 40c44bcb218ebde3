//! Dataset file formats.
//!
//! * Multiclass CSV: numeric feature columns followed by an integer label in
//!   `0..K`; the first row may be a header.
//! * Regression CSV: numeric feature columns followed by a nonnegative response.
//! * Sparse multilabel: one example per line, `labels idx:val idx:val ...`
//!   where `labels` is a comma-separated list of integers. Blank lines and
//!   lines starting with `#` are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{MulticlassDataset, MultilabelDataset, RegressionDataset};
use crate::data::SparseVec;
use crate::error::{Error, Result};

/// Small synthetic multiclass benchmark shipped with the crate.
pub const BUNDLED_MULTICLASS: &str = include_str!("../../data/synthetic_multiclass.csv");

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn rows(reader: impl Read, has_header: bool) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("not a finite number: {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature and a target column".into(),
            });
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, got {}", width.unwrap(), vals.len()),
            });
        }
        out.push((line, vals));
    }
    Ok(out)
}

/// `K` is one more than the largest label seen.
pub fn parse_multiclass_csv(reader: impl Read, has_header: bool) -> Result<MulticlassDataset> {
    let mut examples = Vec::new();
    for (line, mut vals) in rows(reader, has_header)? {
        let y = vals.pop().expect("width checked");
        if y < 0.0 || y.fract() != 0.0 {
            return Err(Error::Parse {
                line,
                message: format!("label must be a nonnegative integer, got {y}"),
            });
        }
        examples.push((SparseVec::from_dense(&vals), y as usize));
    }
    let k = examples.iter().map(|(_, y)| y + 1).max().unwrap_or(0);
    MulticlassDataset::new(k, examples)
}

pub fn read_multiclass_csv(path: impl AsRef<Path>, has_header: bool) -> Result<MulticlassDataset> {
    parse_multiclass_csv(open(path.as_ref())?, has_header)
}

pub fn render_multiclass_csv(dataset: &MulticlassDataset) -> String {
    let dim = dataset.dim();
    let mut out = String::new();
    for (x, y) in &dataset.examples {
        for v in x.to_dense(dim) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    out
}

pub fn parse_regression_csv(reader: impl Read, has_header: bool) -> Result<RegressionDataset> {
    let examples = rows(reader, has_header)?
        .into_iter()
        .map(|(_, mut vals)| {
            let v = vals.pop().expect("width checked");
            (SparseVec::from_dense(&vals), v)
        })
        .collect();
    RegressionDataset::new(examples)
}

pub fn read_regression_csv(path: impl AsRef<Path>, has_header: bool) -> Result<RegressionDataset> {
    parse_regression_csv(open(path.as_ref())?, has_header)
}

pub fn render_regression_csv(dataset: &RegressionDataset) -> String {
    let dim = dataset
        .examples
        .iter()
        .map(|(x, _)| x.dim())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (x, v) in &dataset.examples {
        for f in x.to_dense(dim) {
            out.push_str(&format!("{f},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// `K` is one more than the largest label seen unless given.
pub fn parse_multilabel_sparse(
    reader: impl BufRead,
    k: Option<usize>,
) -> Result<MultilabelDataset> {
    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<multilabel>", e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::Parse {
            line: line_no,
            message: m,
        };
        let mut parts = t.split_whitespace();
        let labels = parts
            .next()
            .expect("nonempty line")
            .split(',')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| bad(format!("bad label {s:?}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let pairs = parts
            .map(|p| {
                let (i, v) = p
                    .split_once(':')
                    .ok_or_else(|| bad(format!("expected idx:val, got {p:?}")))?;
                let i = i
                    .parse::<u32>()
                    .map_err(|_| bad(format!("bad index {i:?}")))?;
                let v = v
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad value {v:?}")))?;
                Ok((i, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let x = SparseVec::from_pairs(pairs).map_err(|e| bad(e.to_string()))?;
        examples.push((x, labels));
    }
    let k = k.unwrap_or_else(|| {
        examples
            .iter()
            .flat_map(|(_, y)| y.iter().map(|a| a + 1))
            .max()
            .unwrap_or(0)
    });
    MultilabelDataset::new(k, examples)
}

pub fn read_multilabel_sparse(
    path: impl AsRef<Path>,
    k: Option<usize>,
) -> Result<MultilabelDataset> {
    parse_multilabel_sparse(BufReader::new(open(path.as_ref())?), k)
}

pub fn render_multilabel_sparse(dataset: &MultilabelDataset) -> String {
    let mut out = String::new();
    for (x, y) in &dataset.examples {
        let labels: Vec<String> = y.iter().map(|a| a.to_string()).collect();
        out.push_str(&labels.join(","));
        for (i, v) in x.iter() {
            out.push_str(&format!(" {i}:{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiclass_csv_with_header() {
        let ds = parse_multiclass_csv("f1,f2,label\n0.5,1,2\n0,0,0\n".as_bytes(), true).unwrap();
        assert_eq!(ds.k, 3);
        assert_eq!(ds.examples[0].1, 2);
        assert_eq!(ds.examples[1].0, SparseVec::default());
        let again = parse_multiclass_csv(render_multiclass_csv(&ds).as_bytes(), false).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn multiclass_csv_errors_carry_line() {
        match parse_multiclass_csv("1,2\n1,x\n".as_bytes(), false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_multiclass_csv("1,2.5\n".as_bytes(), false).is_err());
    }

    #[test]
    fn multilabel_roundtrip() {
        let text = "# comment\n0,2 1:0.5 4:1\n\n1 0:2\n";
        let ds = parse_multilabel_sparse(text.as_bytes(), None).unwrap();
        assert_eq!(ds.k, 3);
        assert_eq!(ds.examples[0].1, vec![0, 2]);
        assert_eq!(ds.examples[0].0.get(4), 1.0);
        assert_eq!(
            parse_multilabel_sparse(render_multilabel_sparse(&ds).as_bytes(), Some(3)).unwrap(),
            ds
        );
        assert!(parse_multilabel_sparse("0 1:x\n".as_bytes(), None).is_err());
    }

    #[test]
    fn regression_csv() {
        let ds = parse_regression_csv("1,2,3\n0,1,0.5\n".as_bytes(), false).unwrap();
        assert_eq!(ds.examples[0].1, 3.0);
        assert!(parse_regression_csv("1,-1\n".as_bytes(), false).is_err());
    }

    #[test]
    fn bundled_set_parses() {
        let ds = parse_multiclass_csv(BUNDLED_MULTICLASS.as_bytes(), false).unwrap();
        assert!(!ds.is_empty());
    }
}
