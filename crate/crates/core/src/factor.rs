//! Sparse LDL^T factorization of symmetric positive-definite matrices.
//!
//! Up-looking factorization in natural order with the elimination tree built
//! on the fly (Davis, "Direct Methods for Sparse Linear Systems", ch. 4).
//! No pivoting: a pivot falling below the tolerance is a breakdown, reported
//! to the caller so it can decide whether to regularize and retry.

use crate::error::{Error, Result};
use crate::sparse::SparseSymMatrix;

const NONE: usize = usize::MAX;

/// Relative diagonal pivot tolerance for positive definiteness.
pub const PIVOT_REL_TOL: f64 = 1e-14;

/// Relative static regularization added to the diagonal after a breakdown.
pub const REGULARIZATION_REL: f64 = 1e-14;

/// Sparse LDL^T factors: unit lower-triangular `L` (strict part stored by
/// columns) and diagonal `d`.
#[derive(Debug, Clone)]
pub struct LdltFactor {
    n: usize,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
    d: Vec<f64>,
    regularized: bool,
}

impl LdltFactor {
    /// Factorize a symmetric positive-definite matrix.
    ///
    /// Pivots are accepted while `d_k > PIVOT_REL_TOL * max|a_ii|`. On
    /// breakdown the factorization is retried once on
    /// `a + (REGULARIZATION_REL * trace(a) / n) * I`; the retry is recorded in
    /// [`LdltFactor::regularized`]. A second breakdown is an error.
    pub fn factorize_spd(a: &SparseSymMatrix) -> Result<Self> {
        let pivot_tol = PIVOT_REL_TOL * a.max_abs_diag();
        match Self::factorize(a, pivot_tol, false) {
            Ok(f) => Ok(f),
            Err(_) => {
                let shift = REGULARIZATION_REL * a.trace() / a.n() as f64;
                if !(shift > 0.0) {
                    return Err(Error::numerical(
                        "matrix is not positive definite and has non-positive trace",
                    ));
                }
                let regularized = a.shifted_diag(shift);
                // the retry only insists on positive pivots: the added shift
                // may legitimately sit below the original tolerance
                Self::factorize(&regularized, 0.0, true).map_err(|e| {
                    Error::numerical(format!(
                        "matrix is not positive definite even after static regularization: {e}"
                    ))
                })
            }
        }
    }

    /// One factorization attempt with the given absolute pivot tolerance.
    pub fn factorize(a: &SparseSymMatrix, pivot_tol: f64, regularized: bool) -> Result<Self> {
        let n = a.n();
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut pattern = vec![0usize; n];
        let mut y = vec![0.0; n];
        // Growable columns of strict L; rows are appended in ascending order
        // because outer rows are processed in order.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut d = vec![0.0; n];

        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            let mut dk = 0.0;
            // Row k of CSR restricted to columns <= k is the upper-triangular
            // column k of A.
            for (i, aik) in a.row(k) {
                if i > k {
                    break;
                }
                if i == k {
                    dk = aik;
                    continue;
                }
                y[i] = aik;
                let mut len = 0;
                let mut ii = i;
                while flag[ii] != k {
                    if parent[ii] == NONE {
                        parent[ii] = k;
                    }
                    pattern[len] = ii;
                    len += 1;
                    flag[ii] = k;
                    ii = parent[ii];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            // Sparse triangular solve along the elimination-tree pattern,
            // visited in topological order.
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let lki = yi / d[i];
                for &(r, v) in &cols[i] {
                    y[r] -= v * yi;
                }
                dk -= lki * yi;
                cols[i].push((k, lki));
            }
            if !dk.is_finite() || dk <= pivot_tol {
                return Err(Error::numerical(format!(
                    "pivot {dk:.3e} at column {k} below tolerance {pivot_tol:.3e}"
                )));
            }
            d[k] = dk;
        }

        let mut col_ptr = vec![0usize; n + 1];
        for (j, c) in cols.iter().enumerate() {
            col_ptr[j + 1] = col_ptr[j] + c.len();
        }
        let mut rows = Vec::with_capacity(col_ptr[n]);
        let mut vals = Vec::with_capacity(col_ptr[n]);
        for c in &cols {
            for &(r, v) in c {
                rows.push(r);
                vals.push(v);
            }
        }
        Ok(LdltFactor {
            n,
            col_ptr,
            rows,
            vals,
            d,
            regularized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the factorization required static diagonal regularization.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    /// Diagonal of `D`.
    pub fn diag(&self) -> &[f64] {
        &self.d
    }

    fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.rows[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    /// Solve `L z = b` in place.
    fn forward(&self, z: &mut [f64]) {
        for j in 0..self.n {
            let zj = z[j];
            if zj != 0.0 {
                for (r, v) in self.col(j) {
                    z[r] -= v * zj;
                }
            }
        }
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "solve dimension mismatch");
        let mut x = b.to_vec();
        self.forward(&mut x);
        for (xj, dj) in x.iter_mut().zip(&self.d) {
            *xj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for (r, v) in self.col(j) {
                acc -= v * x[r];
            }
            x[j] = acc;
        }
        x
    }

    /// Solve `L^T x = b`.
    pub fn solve_lt(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "solve_lt dimension mismatch");
        let mut x = b.to_vec();
        for j in (0..self.n).rev() {
            let mut acc = x[j];
            for (r, v) in self.col(j) {
                acc -= v * x[r];
            }
            x[j] = acc;
        }
        x
    }

    /// `b^T A^{-1} b`, evaluated as `sum z_i^2 / d_i` with `L z = b`.
    /// Nonnegative by construction for positive pivots.
    pub fn quadratic_form_inv(&self, b: &[f64]) -> f64 {
        assert_eq!(b.len(), self.n, "quadratic form dimension mismatch");
        let mut z = b.to_vec();
        self.forward(&mut z);
        z.iter().zip(&self.d).map(|(zi, di)| zi * zi / di).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian_1d(n: usize) -> SparseSymMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        SparseSymMatrix::from_lower_triplets(n, &t).unwrap()
    }

    #[test]
    fn solves_tridiagonal_system() {
        let a = laplacian_1d(8);
        let f = LdltFactor::factorize_spd(&a).unwrap();
        assert!(!f.regularized());
        let b: Vec<f64> = (0..8).map(|i| (i as f64) - 3.0).collect();
        let x = f.solve(&b);
        let r = a.apply(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert_relative_eq!(ri, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn solves_with_fill_in() {
        // Arrow matrix: dense last row/column forces fill into the tree.
        let n = 10;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64));
        }
        for j in 0..n - 1 {
            t.push((n - 1, j, 1.0));
        }
        let a = SparseSymMatrix::from_lower_triplets(n, &t).unwrap();
        let f = LdltFactor::factorize_spd(&a).unwrap();
        let b = vec![1.0; n];
        let x = f.solve(&b);
        let r = a.apply(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert_relative_eq!(ri, bi, epsilon = 1e-12);
        }
    }

    #[test]
    fn quadratic_form_matches_solve() {
        let a = laplacian_1d(6);
        let f = LdltFactor::factorize_spd(&a).unwrap();
        let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let x = f.solve(&b);
        let direct: f64 = b.iter().zip(&x).map(|(bi, xi)| bi * xi).sum();
        assert_relative_eq!(f.quadratic_form_inv(&b), direct, epsilon = 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = SparseSymMatrix::from_diag(&[1.0, -1.0]);
        assert!(LdltFactor::factorize_spd(&a).is_err());
    }

    #[test]
    fn near_singular_matrix_regularizes() {
        let a = SparseSymMatrix::from_diag(&[1.0, 1e-30]);
        let f = LdltFactor::factorize_spd(&a).unwrap();
        assert!(f.regularized());
    }
}
