//! Dense generalized-eigenvalue oracle for test- and analysis-scale pencils.
//!
//! The pencil is reduced to a standard symmetric problem by congruence with
//! the cached `S = L D L^T` factors: `C = D^{-1/2} L^{-1} H L^{-T} D^{-1/2}`,
//! eigendecomposed with a dense symmetric solver, and transformed back so
//! that the eigenvector matrix is S-orthonormal. Deterministic and
//! self-contained; not meant for production-scale matrices, hence the cap.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pencil::{EigPair, Pencil};

/// Default dimension cap for the dense oracle.
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Full dense decomposition of a pencil: ascending eigenvalues and an
/// S-orthonormal eigenvector matrix (`U^T S U = I`, `U^T H U = diag(values)`).
#[derive(Debug, Clone)]
pub struct DenseDecomp {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    /// True when the factorization of `S` needed regularization; the
    /// decomposition then belongs to the regularized pencil.
    pub regularized: bool,
}

impl DenseDecomp {
    /// Compute the decomposition; errors when `n` exceeds `cap`.
    pub fn new(p: &Pencil, cap: usize) -> Result<Self> {
        let n = p.n();
        if n > cap {
            return Err(Error::usage(format!(
                "pencil dimension {n} exceeds the dense oracle cap {cap}"
            )));
        }
        let f = p.s_factor();
        // M = L^{-T} D^{-1/2}, column by column.
        let mut m = DMatrix::zeros(n, n);
        let mut hm = DMatrix::zeros(n, n);
        let mut unit = vec![0.0; n];
        for k in 0..n {
            unit[k] = 1.0 / f.diag()[k].sqrt();
            let col = f.solve_lt(&unit);
            unit[k] = 0.0;
            let hcol = p.h().apply(&col);
            for i in 0..n {
                m[(i, k)] = col[i];
                hm[(i, k)] = hcol[i];
            }
        }
        let mut c = m.transpose() * hm;
        // absorb rounding asymmetry before the symmetric eigensolver
        let ct = c.transpose();
        c = (c + ct) * 0.5;
        let se = c.symmetric_eigen();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[a]
                .partial_cmp(&se.eigenvalues[b])
                .expect("eigenvalues are finite")
        });
        let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let q_sorted = se.eigenvectors.select_columns(&order);
        let mut vectors = m * q_sorted;

        // S-normalize and fix signs so results are deterministic.
        for k in 0..n {
            let col: Vec<f64> = vectors.column(k).iter().copied().collect();
            let nrm = p.s_norm(&col);
            let mut scale = 1.0 / nrm;
            let lead = col
                .iter()
                .cloned()
                .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap())
                .unwrap_or(0.0);
            if lead < 0.0 {
                scale = -scale;
            }
            for i in 0..n {
                vectors[(i, k)] *= scale;
            }
        }

        Ok(DenseDecomp {
            values,
            vectors,
            regularized: p.s_regularized(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector `k` (0-based) as a slice-backed vector.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// Columns `from..n` (0-based) of the eigenvector matrix.
    pub fn vectors_from(&self, from: usize) -> DMatrix<f64> {
        self.vectors.columns(from, self.n() - from).into_owned()
    }
}

/// Full eigendecomposition of the pencil, ascending, under the default cap.
pub fn dense_gev_oracle(p: &Pencil) -> Result<Vec<EigPair>> {
    dense_gev_oracle_capped(p, DEFAULT_ORACLE_CAP)
}

/// Full eigendecomposition of the pencil, ascending, under the given cap.
pub fn dense_gev_oracle_capped(p: &Pencil, cap: usize) -> Result<Vec<EigPair>> {
    let d = DenseDecomp::new(p, cap)?;
    Ok(d.values
        .iter()
        .enumerate()
        .map(|(k, &value)| EigPair {
            value,
            vector: d.vector(k),
        })
        .collect())
}
