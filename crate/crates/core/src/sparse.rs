//! Compressed sparse row storage for symmetric matrices.
//!
//! The full matrix (both triangles) is stored so that matrix-vector products
//! need no branching on the triangle; construction goes through the lower
//! triangle only, which makes the stored matrix symmetric by construction
//! rather than by averaging.

use crate::error::{Error, Result};

/// Sparse symmetric matrix in CSR format.
///
/// Invariants: column indices are sorted ascending within each row, there are
/// no duplicate entries, and `entry(i, j) == entry(j, i)` exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from entries of the lower triangle (`row >= col`). Each entry is
    /// mirrored to the upper triangle, so symmetry is exact. Duplicate
    /// coordinates are rejected.
    pub fn from_lower_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::usage(format!(
                    "triplet index ({i}, {j}) out of range for dimension {n}"
                )));
            }
            if i < j {
                return Err(Error::usage(format!(
                    "triplet ({i}, {j}) lies in the upper triangle; supply the lower triangle"
                )));
            }
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        full.sort_by_key(|&(i, j, _)| (i, j));
        for w in full.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::usage(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let mut row_ptr = vec![0usize; n + 1];
        for &(i, _, _) in &full {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = full.iter().map(|&(_, j, _)| j).collect();
        let values = full.iter().map(|&(_, _, v)| v).collect();
        Ok(SparseSymMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_lower_triplets(n, &triplets).expect("identity triplets are valid")
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let triplets: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_lower_triplets(diag.len(), &triplets).expect("diagonal triplets are valid")
    }

    /// Build from a dense symmetric matrix, dropping exact zeros.
    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::usage("dense matrix is not square"));
        }
        if *m != m.transpose() {
            return Err(Error::usage("dense matrix is not symmetric"));
        }
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..=i {
                let v = m[(i, j)];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_lower_triplets(m.nrows(), &triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.values[self.row_ptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    /// Stored entries of row `i` as `(col, value)` pairs, ascending by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n, "matvec input dimension mismatch");
        assert_eq!(y.len(), self.n, "matvec output dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `A x` into a fresh vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Maximum absolute diagonal entry.
    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// Trace.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// 1-norm (maximum absolute column sum; equals the infinity norm here).
    pub fn norm_1(&self) -> f64 {
        let mut col_sums = vec![0.0; self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                col_sums[j] += v.abs();
            }
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    /// Lower-triangle entries `(row, col, value)` with `row >= col`, ordered
    /// by row then column.
    pub fn lower_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j <= i {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Densify (test- and oracle-scale helper).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `A + shift * I`, preserving structure.
    pub fn shifted_diag(&self, shift: f64) -> Self {
        let mut triplets = self.lower_triplets();
        let mut seen_diag = vec![false; self.n];
        for t in triplets.iter_mut() {
            if t.0 == t.1 {
                t.2 += shift;
                seen_diag[t.0] = true;
            }
        }
        for (i, seen) in seen_diag.iter().enumerate() {
            if !seen {
                triplets.push((i, i, shift));
            }
        }
        Self::from_lower_triplets(self.n, &triplets).expect("shifted triplets are valid")
    }
}
