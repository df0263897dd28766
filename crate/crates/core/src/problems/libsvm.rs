//! Reader and writer for the LIBSVM sparse text format
//! (`label idx:val idx:val ...`, 1-based strictly increasing indices).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse feature vector with 0-based, strictly increasing column indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::arg("sparse indices must be strictly increasing"));
        }
        Ok(SparseRow { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// One past the largest index, 0 for an empty row.
    pub fn extent(&self) -> usize {
        self.entries.last().map_or(0, |(i, _)| i + 1)
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    /// `sum_j row[j] * dense[j]`.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, v)| v * dense[j]).sum()
    }
}

/// A labelled dataset. Labels are `1..=classes`, numbered by first
/// appearance; `label_names` holds the original tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub rows: Vec<SparseRow>,
    pub labels: Vec<usize>,
    pub dim: usize,
    pub classes: usize,
    pub label_names: Vec<String>,
}

impl Samples {
    /// Builds a dataset from rows and 1-based labels.
    pub fn new(rows: Vec<SparseRow>, labels: Vec<usize>, dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::arg("one label per row required"));
        }
        if rows.iter().any(|r| r.extent() > dim) {
            return Err(Error::arg("feature index beyond the declared dimension"));
        }
        if labels.contains(&0) {
            return Err(Error::arg("labels are 1-based"));
        }
        let classes = labels.iter().copied().max().unwrap_or(0);
        Ok(Samples {
            rows,
            labels,
            dim,
            classes,
            label_names: (1..=classes).map(|c| c.to_string()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Samples> {
    parse_libsvm(BufReader::new(File::open(path)?))
}

pub fn parse_libsvm(reader: impl BufRead) -> Result<Samples> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut dim = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("nonempty line has a token");
        if label.contains(':') {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("missing label before {label:?}"),
            });
        }
        let class = match names.iter().position(|n| n == label) {
            Some(p) => p + 1,
            None => {
                names.push(label.to_string());
                names.len()
            }
        };
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| bad(format!("expected idx:val, found {tok:?}")))?;
            let i: usize = i
                .parse()
                .map_err(|_| bad(format!("bad feature index {i:?}")))?;
            if i == 0 {
                return Err(bad("feature indices are 1-based".into()));
            }
            let v: f64 = v
                .parse()
                .map_err(|_| bad(format!("bad feature value {v:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite feature value {v}")));
            }
            if let Some(&(last, _)) = entries.last() {
                if i - 1 <= last {
                    return Err(bad(format!("index {i} does not increase")));
                }
            }
            entries.push((i - 1, v));
        }
        let row = SparseRow { entries };
        dim = dim.max(row.extent());
        rows.push(row);
        labels.push(class);
    }
    Ok(Samples {
        rows,
        labels,
        dim,
        classes: names.len(),
        label_names: names,
    })
}

pub fn write_libsvm(path: impl AsRef<Path>, samples: &Samples) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (row, &label) in samples.rows.iter().zip(&samples.labels) {
        let name = samples
            .label_names
            .get(label - 1)
            .cloned()
            .unwrap_or_else(|| label.to_string());
        write!(w, "{name}")?;
        for &(j, v) in row.entries() {
            write!(w, " {}:{v:?}", j + 1)?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
