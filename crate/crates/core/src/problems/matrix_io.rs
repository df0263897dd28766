//! Dense matrix persistence.
//!
//! CSV: a `rows,cols` header line, then one line per row. Values are written
//! in Rust's shortest round-trip form, so reading back is bit-exact.
//!
//! Binary (`MMX1`): the 4-byte magic `MMX1`, little-endian `u64` rows and
//! cols, then `rows * cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MMX_MAGIC: &[u8; 4] = b"MMX1";

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing rows,cols header".into(),
    })??;
    let dims: Vec<usize> = header
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad header {header:?}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line: 1,
            msg: "header must be rows,cols".into(),
        });
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        if vals.len() != cols {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {cols} values, found {}", vals.len()),
            });
        }
        data.extend(vals);
    }
    if data.len() != rows * cols {
        return Err(Error::Parse {
            line: rows + 1,
            msg: format!("expected {rows} rows, found {}", data.len() / cols.max(1)),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_matrix_bin(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MMX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MMX_MAGIC {
        return Err(Error::Parse {
            line: 0,
            msg: "not an MMX1 matrix file".into(),
        });
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows.checked_mul(cols).ok_or(Error::Parse {
        line: 0,
        msg: "matrix dimensions overflow".into(),
    })?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Reads either format, choosing by the file's leading bytes.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let is_bin = File::open(path)?.read(&mut head)? == 4 && &head == MMX_MAGIC;
    if is_bin {
        read_matrix_bin(path)
    } else {
        read_matrix_csv(path)
    }
}
