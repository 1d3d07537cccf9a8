//! Matrix Market reader and writer for symmetric / Hermitian matrices.
//!
//! Supports `coordinate` and `array` layouts with `real`, `integer` or
//! `complex` fields and `symmetric`, `hermitian` or `general` symmetry.
//! `general` input is accepted only when it is Hermitian to `1e-12`
//! (relative to the largest entry) and is then symmetrized.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{LocgError, Result};
use crate::operator::HermitianOperator;
use crate::scalar::{Block, Scalar};

/// Compressed sparse row Hermitian matrix.
#[derive(Debug, Clone)]
pub struct SparseOperator<T: Scalar> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
    scale: f64,
}

impl<T: Scalar> SparseOperator<T> {
    /// Builds from a full (both triangles) entry map.
    fn from_entries(n: usize, entries: &BTreeMap<(usize, usize), T>) -> Self {
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (&(i, j), &v) in entries {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let scale = (0..n)
            .map(|i| values[row_ptr[i]..row_ptr[i + 1]].iter().map(|v| v.modulus()).sum::<f64>())
            .fold(0.0, f64::max);
        Self { n, row_ptr, col_idx, values, scale }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

impl<T: Scalar> HermitianOperator<T> for SparseOperator<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &Block<T>) -> Block<T> {
        let mut y = Block::zeros(self.n, x.ncols());
        for (xc, mut yc) in x.column_iter().zip(y.column_iter_mut()) {
            for i in 0..self.n {
                let mut acc = T::zero();
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.values[p] * xc[self.col_idx[p]];
                }
                yc[i] = acc;
            }
        }
        y
    }

    fn dense(&self) -> Option<DMatrix<T>> {
        if self.n > crate::eig::DENSE_LIMIT {
            return None;
        }
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[p])] = self.values[p];
            }
        }
        Some(m)
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

/// A parsed matrix; the field decides the scalar type.
#[derive(Debug, Clone)]
pub enum LoadedMatrix {
    Real(SparseOperator<f64>),
    Complex(SparseOperator<Complex64>),
}

impl LoadedMatrix {
    pub fn dim(&self) -> usize {
        match self {
            LoadedMatrix::Real(op) => op.dim(),
            LoadedMatrix::Complex(op) => op.dim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
}

fn err(msg: impl Into<String>) -> LocgError {
    LocgError::MatrixMarket(msg.into())
}

fn parse_header(line: &str) -> Result<(Layout, Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(format!("bad banner line: {line:?}")));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(err(format!("unsupported layout {other:?}"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" | "integer" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(err(format!("unsupported field {other:?}"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(err(format!("unsupported symmetry {other:?}"))),
    };
    Ok((layout, field, symmetry))
}

fn parse_value(tokens: &[&str], field: Field, line_no: usize) -> Result<Complex64> {
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| err(format!("line {line_no}: cannot parse number {s:?}")))
    };
    match (field, tokens) {
        (Field::Real, [re]) => Ok(Complex64::new(num(re)?, 0.0)),
        (Field::Complex, [re, im]) => Ok(Complex64::new(num(re)?, num(im)?)),
        _ => Err(err(format!("line {line_no}: wrong number of value fields"))),
    }
}

/// Parses Matrix Market text.
pub fn parse_matrix_market(text: &str) -> Result<LoadedMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| err("empty file"))?;
    let (layout, field, symmetry) = parse_header(banner)?;
    let mut data = lines
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (size_line_no, size_line) = data.next().ok_or_else(|| err("missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| err(format!("line {size_line_no}: bad size entry {t:?}"))))
        .collect::<Result<_>>()?;
    let (rows, cols) = match (layout, dims.as_slice()) {
        (Layout::Coordinate, [r, c, _]) | (Layout::Array, [r, c]) => (*r, *c),
        _ => return Err(err(format!("line {size_line_no}: malformed size line"))),
    };
    if rows != cols {
        return Err(err(format!("matrix is not square: {rows}x{cols}")));
    }
    if rows == 0 {
        return Err(err("matrix is empty"));
    }
    let n = rows;
    let width = if field == Field::Complex { 2 } else { 1 };

    let mut raw: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    match layout {
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut seen = 0;
            for (line_no, line) in data {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() != 2 + width {
                    return Err(err(format!("line {line_no}: expected {} fields", 2 + width)));
                }
                let idx = |s: &str| -> Result<usize> {
                    let v = s.parse::<usize>().map_err(|_| err(format!("line {line_no}: bad index {s:?}")))?;
                    if v == 0 || v > n {
                        return Err(err(format!("line {line_no}: index {v} out of range")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (idx(tokens[0])?, idx(tokens[1])?);
                let v = parse_value(&tokens[2..], field, line_no)?;
                *raw.entry((i, j)).or_insert(Complex64::new(0.0, 0.0)) += v;
                seen += 1;
            }
            if seen != nnz {
                return Err(err(format!("expected {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // column-major; symmetric storage keeps the lower triangle only
            let mut slots = Vec::new();
            for j in 0..n {
                let start = if symmetry == Symmetry::General { 0 } else { j };
                for i in start..n {
                    slots.push((i, j));
                }
            }
            let mut count = 0;
            for (line_no, line) in data {
                let tokens: Vec<&str> = line.split_whitespace().collect();
                let v = parse_value(&tokens, field, line_no)?;
                let slot = *slots.get(count).ok_or_else(|| err(format!("line {line_no}: too many entries")))?;
                if v != Complex64::new(0.0, 0.0) {
                    raw.insert(slot, v);
                }
                count += 1;
            }
            if count != slots.len() {
                return Err(err(format!("expected {} entries, found {count}", slots.len())));
            }
        }
    }

    let mut full: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    match symmetry {
        Symmetry::Symmetric | Symmetry::Hermitian => {
            for (&(i, j), &v) in &raw {
                if i < j {
                    return Err(err(format!("entry ({}, {}) above the diagonal in symmetric storage", i + 1, j + 1)));
                }
                if i == j {
                    if v.im.abs() > 1e-12 * v.norm().max(1.0) {
                        return Err(err(format!("diagonal entry ({0}, {0}) is not real", i + 1)));
                    }
                    full.insert((i, i), Complex64::new(v.re, 0.0));
                } else {
                    let mirrored = if symmetry == Symmetry::Hermitian { v.conj() } else { v };
                    full.insert((i, j), v);
                    full.insert((j, i), mirrored);
                }
            }
            if symmetry == Symmetry::Symmetric && field == Field::Complex {
                if full.values().any(|v| v.im != 0.0) {
                    return Err(err("complex symmetric (non-Hermitian) matrices are not supported"));
                }
            }
        }
        Symmetry::General => {
            let big = raw.values().fold(0.0f64, |a, v| a.max(v.norm()));
            let zero = Complex64::new(0.0, 0.0);
            let mut worst = 0.0f64;
            for (&(i, j), &v) in &raw {
                let w = raw.get(&(j, i)).copied().unwrap_or(zero);
                worst = worst.max((v - w.conj()).norm());
            }
            let asymmetry = if big > 0.0 { worst / big } else { 0.0 };
            if asymmetry > 1e-12 {
                return Err(err(format!("general matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")));
            }
            for (&(i, j), &v) in &raw {
                let w = raw.get(&(j, i)).copied().unwrap_or(zero);
                full.insert((i, j), (v + w.conj()) * 0.5);
            }
        }
    }

    let is_real = full.values().all(|v| v.im == 0.0);
    if is_real {
        let entries = full.into_iter().map(|(k, v)| (k, v.re)).collect();
        Ok(LoadedMatrix::Real(SparseOperator::from_entries(n, &entries)))
    } else {
        Ok(LoadedMatrix::Complex(SparseOperator::from_entries(n, &full)))
    }
}

pub fn load_matrix_market(path: &Path) -> Result<LoadedMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| LocgError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_market(&text)
}

/// Writes the lower triangle of a real symmetric operator in coordinate
/// format with 17 significant digits.
pub fn write_matrix_market<O: HermitianOperator<f64> + ?Sized>(path: &Path, op: &O) -> Result<()> {
    let n = op.dim();
    let mut entries = Vec::new();
    let mut e = Block::<f64>::zeros(n, 1);
    for j in 0..n {
        e[(j, 0)] = 1.0;
        let col = op.apply(&e);
        e[(j, 0)] = 0.0;
        for i in j..n {
            if col[(i, 0)] != 0.0 {
                entries.push((i, j, col[(i, 0)]));
            }
        }
    }
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{n} {n} {}", entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::unit_vector;

    #[test]
    fn diag_coordinate() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 3\n1 1 1\n2 2 2\n3 3 3\n";
        let LoadedMatrix::Real(op) = parse_matrix_market(text).unwrap() else { panic!() };
        let y = op.apply(&unit_vector(3, 1));
        assert_eq!(y.column(0).as_slice(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn asymmetric_general_rejected() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 1.0\n2 1 1.5\n";
        assert!(matches!(parse_matrix_market(text), Err(LocgError::MatrixMarket(_))));
    }

    #[test]
    fn symmetric_general_accepted() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 2\n1 2 1.0\n2 1 1.0\n2 2 2\n";
        let LoadedMatrix::Real(op) = parse_matrix_market(text).unwrap() else { panic!() };
        assert_eq!(op.dense().unwrap(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn array_symmetric_lower() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n4\n1\n3\n";
        let LoadedMatrix::Real(op) = parse_matrix_market(text).unwrap() else { panic!() };
        assert_eq!(op.dense().unwrap(), DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]));
    }

    #[test]
    fn hermitian_complex() {
        let text = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 3\n1 1 2 0\n2 1 0 1\n2 2 2 0\n";
        let LoadedMatrix::Complex(op) = parse_matrix_market(text).unwrap() else { panic!() };
        let d = op.dense().unwrap();
        assert_eq!(d[(1, 0)], Complex64::new(0.0, 1.0));
        assert_eq!(d[(0, 1)], Complex64::new(0.0, -1.0));
    }

    #[test]
    fn malformed_inputs() {
        for text in [
            "",
            "%%MatrixMarket matrix coordinate real symmetric\n2 3 0\n",
            "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 x\n",
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n",
        ] {
            assert!(parse_matrix_market(text).is_err(), "{text:?}");
        }
    }
}
