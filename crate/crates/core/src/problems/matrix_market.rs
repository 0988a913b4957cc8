//! Matrix Market exchange for `coordinate real symmetric` matrices.
//!
//! Reading accepts comment lines (they are not preserved on write) and
//! entries in either triangle; writing emits the lower triangle with
//! shortest round-trip decimal values, so `read(write(m)) == m` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

const HEADER: &str = "%%MatrixMarket matrix coordinate real symmetric";

/// Read a `coordinate real symmetric` Matrix Market file.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    let header = header?;
    parse_header(&header)?;

    let mut size: Option<(usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut n = 0usize;
    let mut declared_nnz = 0usize;

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if size.is_none() {
            let mut it = trimmed.split_whitespace();
            let rows: usize = parse_tok(it.next(), lineno, "row count")?;
            let cols: usize = parse_tok(it.next(), lineno, "column count")?;
            let nnz: usize = parse_tok(it.next(), lineno, "entry count")?;
            if it.next().is_some() {
                return Err(Error::parse(lineno, "trailing tokens on size line"));
            }
            if rows != cols {
                return Err(Error::parse(
                    lineno,
                    format!("symmetric matrix must be square, got {rows} x {cols}"),
                ));
            }
            n = rows;
            declared_nnz = nnz;
            size = Some((rows, nnz));
            triplets.reserve(nnz);
            continue;
        }
        if triplets.len() == declared_nnz {
            return Err(Error::parse(
                lineno,
                format!("more than the declared {declared_nnz} entries"),
            ));
        }
        let mut it = trimmed.split_whitespace();
        let i: usize = parse_tok(it.next(), lineno, "row index")?;
        let j: usize = parse_tok(it.next(), lineno, "column index")?;
        let v: f64 = parse_tok(it.next(), lineno, "value")?;
        if it.next().is_some() {
            return Err(Error::parse(lineno, "trailing tokens on entry line"));
        }
        if i < 1 || i > n || j < 1 || j > n {
            return Err(Error::parse(
                lineno,
                format!("index ({i}, {j}) out of range for dimension {n}"),
            ));
        }
        let (r, c) = if i >= j { (i - 1, j - 1) } else { (j - 1, i - 1) };
        triplets.push((r, c, v));
    }

    if size.is_none() {
        return Err(Error::parse(2, "missing size line"));
    }
    if triplets.len() != declared_nnz {
        return Err(Error::parse(
            0,
            format!(
                "declared {declared_nnz} entries but found {}",
                triplets.len()
            ),
        ));
    }
    SparseSymMatrix::from_lower_triplets(n, &triplets)
}

fn parse_header(line: &str) -> Result<()> {
    let mut it = line.split_whitespace();
    let banner = it.next().unwrap_or("");
    if !banner.eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(Error::parse(1, "missing %%MatrixMarket banner"));
    }
    let object = it.next().unwrap_or("").to_ascii_lowercase();
    if object != "matrix" {
        return Err(Error::parse(1, format!("unsupported object '{object}'")));
    }
    let format = it.next().unwrap_or("").to_ascii_lowercase();
    if format != "coordinate" {
        return Err(Error::parse(
            1,
            format!("unsupported format '{format}' (only coordinate)"),
        ));
    }
    let field = it.next().unwrap_or("").to_ascii_lowercase();
    if field != "real" {
        return Err(Error::parse(
            1,
            format!("unsupported field '{field}' (only real)"),
        ));
    }
    let symmetry = it.next().unwrap_or("").to_ascii_lowercase();
    if symmetry != "symmetric" {
        return Err(Error::parse(
            1,
            format!("matrix structure must be declared symmetric, got '{symmetry}'"),
        ));
    }
    Ok(())
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, lineno: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(lineno, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(lineno, format!("invalid {what} '{tok}'")))
}

/// Write the lower triangle in `coordinate real symmetric` format.
pub fn write_matrix_market(m: &SparseSymMatrix, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    let triplets = m.lower_triplets();
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", m.n(), m.n(), triplets.len())?;
    for (i, j, v) in triplets {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}
