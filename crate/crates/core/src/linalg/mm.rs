//! Matrix Market reader and writer (real general only).
//!
//! Matrices use the coordinate format and vectors the array format:
//!
//! ```text
//! %%MatrixMarket matrix coordinate real general
//! 2 3 4
//! 1 1 1.0
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sparse::SparseMatrix;
use crate::error::{LseError, Result};

pub const COORDINATE_BANNER: &str = "%%MatrixMarket matrix coordinate real general";
pub const ARRAY_BANNER: &str = "%%MatrixMarket matrix array real general";

#[derive(Clone, Debug, PartialEq)]
pub enum MmObject {
    Matrix(SparseMatrix),
    Vector(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<MmObject> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, path)
}

/// Reads a matrix; array-format files are converted to sparse storage.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (format, nrows, ncols, entries) = parse_raw(&text, path)?;
    match format {
        Format::Coordinate => {
            SparseMatrix::from_triplets(nrows, ncols, &entries).map_err(|e| parse_err(path, 0, e.to_string()))
        }
        Format::Array => {
            let nz: Vec<_> = entries.into_iter().filter(|t| t.2 != 0.0).collect();
            SparseMatrix::from_triplets(nrows, ncols, &nz).map_err(|e| parse_err(path, 0, e.to_string()))
        }
    }
}

/// Reads a vector stored as an `n×1` or `1×n` matrix in either format.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (_, nrows, ncols, entries) = parse_raw(&text, path)?;
    if nrows != 1 && ncols != 1 {
        return Err(parse_err(path, 0, format!("expected a vector, found a {nrows}x{ncols} matrix")));
    }
    let mut v = vec![0.0; nrows * ncols];
    for (i, j, x) in entries {
        v[i.max(j)] += x;
    }
    Ok(v)
}

pub fn mm_write_matrix(path: impl AsRef<Path>, m: &SparseMatrix) -> Result<()> {
    write_text(path.as_ref(), &format_matrix(m))
}

pub fn mm_write_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write_text(path.as_ref(), &format_vector(v))
}

pub fn mm_write(path: impl AsRef<Path>, object: &MmObject) -> Result<()> {
    match object {
        MmObject::Matrix(m) => mm_write_matrix(path, m),
        MmObject::Vector(v) => mm_write_vector(path, v),
    }
}

pub fn format_matrix(m: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * (m.nnz() + 2));
    out.push_str(COORDINATE_BANNER);
    out.push('\n');
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (i, j, v) in m.triplets() {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn format_vector(v: &[f64]) -> String {
    let mut out = String::with_capacity(24 * (v.len() + 2));
    out.push_str(ARRAY_BANNER);
    out.push('\n');
    let _ = writeln!(out, "{} 1", v.len());
    for x in v {
        let _ = writeln!(out, "{x:e}");
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| LseError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> LseError {
    LseError::Parse {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

/// Parses Matrix Market text; `n×1` array files become vectors.
pub fn parse(text: &str, path: &Path) -> Result<MmObject> {
    let (format, nrows, ncols, entries) = parse_raw(text, path)?;
    match format {
        Format::Array if ncols == 1 => Ok(MmObject::Vector(entries.into_iter().map(|t| t.2).collect())),
        Format::Array => {
            let nz: Vec<_> = entries.into_iter().filter(|t| t.2 != 0.0).collect();
            Ok(MmObject::Matrix(
                SparseMatrix::from_triplets(nrows, ncols, &nz).map_err(|e| parse_err(path, 0, e.to_string()))?,
            ))
        }
        Format::Coordinate => Ok(MmObject::Matrix(
            SparseMatrix::from_triplets(nrows, ncols, &entries).map_err(|e| parse_err(path, 0, e.to_string()))?,
        )),
    }
}

type RawEntries = (Format, usize, usize, Vec<(usize, usize, f64)>);

fn parse_raw(text: &str, path: &Path) -> Result<RawEntries> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, format!("malformed header: {banner:?}")));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(path, 1, format!("unknown storage format {other:?}"))),
    };
    if tokens[3] != "real" {
        return Err(parse_err(path, 1, format!("unsupported field {:?} (only real)", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(parse_err(path, 1, format!("unsupported symmetry {:?} (only general)", tokens[4])));
    }

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, size_line, format!("bad size line: {e}")))?;

    let parse_value = |line: usize, tok: &str| -> Result<f64> {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(path, line, format!("cannot parse value {tok:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        Ok(v)
    };

    match format {
        Format::Coordinate => {
            let [nrows, ncols, nnz] = dims[..] else {
                return Err(parse_err(path, size_line, "coordinate size line needs rows, cols, nnz"));
            };
            let mut entries = Vec::with_capacity(nnz);
            for (line, l) in data.by_ref().take(nnz) {
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(parse_err(path, line, "expected `row col value`"));
                }
                let i: usize = t[0].parse().map_err(|_| parse_err(path, line, "bad row index"))?;
                let j: usize = t[1].parse().map_err(|_| parse_err(path, line, "bad column index"))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(
                        path,
                        line,
                        format!("index ({i}, {j}) out of bounds for {nrows}x{ncols}"),
                    ));
                }
                entries.push((i - 1, j - 1, parse_value(line, t[2])?));
            }
            if entries.len() != nnz {
                return Err(parse_err(
                    path,
                    size_line,
                    format!("expected {nnz} entries, found {}", entries.len()),
                ));
            }
            if let Some((line, _)) = data.next() {
                return Err(parse_err(path, line, "trailing data after the declared entries"));
            }
            Ok((format, nrows, ncols, entries))
        }
        Format::Array => {
            let [nrows, ncols] = dims[..] else {
                return Err(parse_err(path, size_line, "array size line needs rows and cols"));
            };
            let mut entries = Vec::with_capacity(nrows * ncols);
            for (line, l) in data {
                for tok in l.split_whitespace() {
                    let k = entries.len();
                    if k >= nrows * ncols {
                        return Err(parse_err(path, line, "too many values"));
                    }
                    // array format is column-major
                    entries.push((k % nrows.max(1), k / nrows.max(1), parse_value(line, tok)?));
                }
            }
            if entries.len() != nrows * ncols {
                return Err(parse_err(
                    path,
                    size_line,
                    format!("expected {} values, found {}", nrows * ncols, entries.len()),
                ));
            }
            Ok((format, nrows, ncols, entries))
        }
    }
}
