//! Text formats for tensors, dense matrices and factor sets.
//!
//! Tensor files start with `shape I_0 .. I_{N-1}` followed by one
//! `i_0 .. i_{N-1} value` line per nonzero (0-based). Matrices are one row
//! per line. Blank lines and lines starting with `#` are ignored. Numbers
//! are written in the shortest form that parses back to the same double.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Result, SwiftError};
use crate::tensor::{FactorSet, SparseTensor};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> SwiftError {
    SwiftError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SwiftError::io(format!("reading {}", path.display()), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| SwiftError::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| SwiftError::io(format!("writing {}", path.display()), e))
}

/// Parses the tensor text format; `path` is used in error messages only.
pub fn parse_tensor(text: &str, path: &Path) -> Result<SparseTensor> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing shape header"))?;
    let mut words = header.split_whitespace();
    if words.next() != Some("shape") {
        return Err(parse_err(path, hline, "expected `shape I_0 .. I_{N-1}`"));
    }
    let shape = words
        .map(|w| w.parse::<usize>().map_err(|_| parse_err(path, hline, format!("bad extent {w:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if shape.len() < 2 {
        return Err(parse_err(path, hline, "tensor order must be at least 2"));
    }

    let mut entries = Vec::new();
    let mut line_of = std::collections::HashMap::new();
    for (ln, line) in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.len() != shape.len() + 1 {
            return Err(parse_err(
                path,
                ln,
                format!("expected {} indices and a value", shape.len()),
            ));
        }
        let index = words[..shape.len()]
            .iter()
            .map(|w| w.parse::<usize>().map_err(|_| parse_err(path, ln, format!("bad index {w:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let value: f64 = words[shape.len()]
            .parse()
            .map_err(|_| parse_err(path, ln, format!("bad value {:?}", words[shape.len()])))?;
        if let Some(k) = index.iter().zip(&shape).position(|(i, d)| i >= d) {
            return Err(parse_err(
                path,
                ln,
                format!("index {} out of range for extent {}", index[k], shape[k]),
            ));
        }
        if !(value >= 0.0) || !value.is_finite() {
            return Err(parse_err(path, ln, format!("value {value} must be finite and nonnegative")));
        }
        if let Some(first) = line_of.insert(index.clone(), ln) {
            return Err(parse_err(
                path,
                ln,
                format!("duplicate coordinate {index:?} (first on line {first})"),
            ));
        }
        entries.push((index, value));
    }
    SparseTensor::new(shape, entries)
}

pub fn load_tensor(path: &Path) -> Result<SparseTensor> {
    parse_tensor(&read_text(path)?, path)
}

pub fn format_tensor(tensor: &SparseTensor) -> String {
    let mut out = String::from("shape");
    for d in tensor.shape() {
        write!(out, " {d}").unwrap();
    }
    out.push('\n');
    for (idx, v) in tensor.iter() {
        for i in idx {
            write!(out, "{i} ").unwrap();
        }
        writeln!(out, "{v}").unwrap();
    }
    out
}

pub fn save_tensor(path: &Path, tensor: &SparseTensor) -> Result<()> {
    write_text(path, &format_tensor(tensor))
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in content_lines(text) {
        let row = line
            .split_whitespace()
            .map(|w| w.parse::<f64>().map_err(|_| parse_err(path, ln, format!("bad number {w:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    ln,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty matrix"));
    }
    let cols = rows[0].len();
    Ok(Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j]))
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    parse_matrix(&read_text(path)?, path)
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in m.rows() {
        let words: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

pub fn save_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_text(path, &format_matrix(m))
}

/// File holding factor `n` inside a factor directory.
pub fn factor_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("factor_{n}.txt"))
}

/// Writes one matrix file per mode and returns their paths.
pub fn save_factors(dir: &Path, factors: &FactorSet) -> Result<Vec<PathBuf>> {
    factors
        .factors()
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let p = factor_path(dir, n);
            save_matrix(&p, a)?;
            Ok(p)
        })
        .collect()
}

/// Reads `factor_0.txt`, `factor_1.txt`, .. until the first missing file.
pub fn load_factors(dir: &Path) -> Result<FactorSet> {
    let mut factors = Vec::new();
    loop {
        let p = factor_path(dir, factors.len());
        if !p.exists() {
            break;
        }
        factors.push(load_matrix(&p)?);
    }
    FactorSet::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_file() {
        let t = parse_tensor("shape 2 2 2\n0 1 1 5.0\n", Path::new("t")).unwrap();
        assert_eq!(t.shape(), &[2, 2, 2]);
        assert_eq!(t.nnz(), 1);
        assert_eq!(t.get(&[0, 1, 1]), 5.0);
    }

    #[test]
    fn duplicate_names_the_line() {
        let err = parse_tensor("shape 2 2\n0 1 1\n\n0 1 2\n", Path::new("t")).unwrap_err();
        match err {
            SwiftError::Parse { line, message, .. } => {
                assert_eq!(line, 4);
                assert!(message.contains("line 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs() {
        for text in [
            "",
            "dims 2 2\n",
            "shape 2 2\n0 2 1\n",
            "shape 2 2\n0 0 -1\n",
            "shape 2 2\n0 0\n",
            "shape 2 2\n0 x 1\n",
        ] {
            assert!(parse_tensor(text, Path::new("t")).is_err(), "{text:?}");
        }
    }

    #[test]
    fn tensor_round_trip_is_exact() {
        let t = SparseTensor::new(
            vec![3, 2, 2],
            vec![(vec![0, 1, 1], 0.1 + 0.2), (vec![2, 0, 1], 1e-300), (vec![1, 1, 0], 7.0 / 3.0)],
        )
        .unwrap();
        let back = parse_tensor(&format_tensor(&t), Path::new("t")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = Array2::from_shape_fn((3, 2), |(i, j)| (i as f64 + 0.1) / (j as f64 + 3.0));
        assert_eq!(parse_matrix(&format_matrix(&m), Path::new("m")).unwrap(), m);
        assert!(parse_matrix("1 2\n3\n", Path::new("m")).is_err());
    }
}
