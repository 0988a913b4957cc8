//! The matrix pencil `(H, S)` and its S-geometry primitives.

use crate::error::{Error, Result};
use crate::factor::LdltFactor;
use crate::sparse::SparseSymMatrix;

/// An approximate eigenpair; `vector` is S-normalized.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Symmetric-definite pencil: sparse symmetric `H`, sparse symmetric
/// positive-definite `S` together with a cached factorization of `S`.
#[derive(Debug)]
pub struct Pencil {
    h: SparseSymMatrix,
    s: SparseSymMatrix,
    s_factor: LdltFactor,
}

impl Pencil {
    /// Build a pencil, factorizing `S`. Fails if the dimensions differ or if
    /// `S` is not positive definite (after one regularization retry, see
    /// [`LdltFactor::factorize_spd`]).
    pub fn new(h: SparseSymMatrix, s: SparseSymMatrix) -> Result<Self> {
        if h.n() != s.n() {
            return Err(Error::usage(format!(
                "pencil dimension mismatch: H is {}, S is {}",
                h.n(),
                s.n()
            )));
        }
        let s_factor = LdltFactor::factorize_spd(&s)?;
        Ok(Pencil { h, s, s_factor })
    }

    pub fn n(&self) -> usize {
        self.h.n()
    }

    pub fn h(&self) -> &SparseSymMatrix {
        &self.h
    }

    pub fn s(&self) -> &SparseSymMatrix {
        &self.s
    }

    pub fn s_factor(&self) -> &LdltFactor {
        &self.s_factor
    }

    /// Whether the factorization of `S` needed static regularization.
    pub fn s_regularized(&self) -> bool {
        self.s_factor.regularized()
    }

    fn check_dim(&self, z: &[f64], what: &str) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::usage(format!(
                "{what}: vector length {} does not match pencil dimension {}",
                z.len(),
                self.n()
            )));
        }
        Ok(())
    }

    fn check_nonzero(z: &[f64], what: &str) -> Result<()> {
        if z.iter().all(|&v| v == 0.0) {
            return Err(Error::usage(format!("{what}: zero vector")));
        }
        Ok(())
    }

    /// Rayleigh quotient `(z^T H z) / (z^T S z)`.
    pub fn rayleigh_quotient(&self, z: &[f64]) -> Result<f64> {
        self.check_dim(z, "rayleigh_quotient")?;
        Self::check_nonzero(z, "rayleigh_quotient")?;
        let hz = self.h.apply(z);
        let sz = self.s.apply(z);
        let num = dot(z, &hz);
        let den = dot(z, &sz);
        Ok(num / den)
    }

    /// Eigen-residual `H u - lambda S u`.
    pub fn residual(&self, lambda: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u, "residual")?;
        let hu = self.h.apply(u);
        let su = self.s.apply(u);
        Ok(hu
            .iter()
            .zip(&su)
            .map(|(h, s)| h - lambda * s)
            .collect())
    }

    /// Relative residual `||H u - lambda S u|| / (||H u|| + |lambda| ||S u||)`
    /// in the Euclidean norm. Invariant under nonzero scaling of `u`.
    pub fn relative_residual(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        self.check_dim(u, "relative_residual")?;
        Self::check_nonzero(u, "relative_residual")?;
        let hu = self.h.apply(u);
        let su = self.s.apply(u);
        let mut num = 0.0;
        for (h, s) in hu.iter().zip(&su) {
            let r = h - lambda * s;
            num += r * r;
        }
        let den = norm2(&hu) + lambda.abs() * norm2(&su);
        Ok(num.sqrt() / den)
    }

    /// `||r||_{S^{-1}} = sqrt(r^T S^{-1} r)` through the cached factorization.
    pub fn s_inv_norm(&self, r: &[f64]) -> Result<f64> {
        self.check_dim(r, "s_inv_norm")?;
        let q = self.s_factor.quadratic_form_inv(r);
        if !q.is_finite() {
            return Err(Error::numerical(
                "S^{-1} quadratic form is not finite; factorization of S is unusable",
            ));
        }
        Ok(q.max(0.0).sqrt())
    }

    /// `S^{-1} r` through the cached factorization.
    pub fn s_solve(&self, r: &[f64]) -> Vec<f64> {
        self.s_factor.solve(r)
    }

    /// S-inner product `x^T S y`.
    pub fn s_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.s.apply(y))
    }

    /// S-norm `sqrt(x^T S x)`.
    pub fn s_norm(&self, x: &[f64]) -> f64 {
        self.s_inner(x, x).max(0.0).sqrt()
    }

    /// Scale `x` to unit S-norm in place; errors on an (S-numerically) zero
    /// vector.
    pub fn s_normalize(&self, x: &mut [f64]) -> Result<()> {
        let nrm = self.s_norm(x);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::numerical(format!(
                "cannot S-normalize a vector with S-norm {nrm}"
            )));
        }
        for v in x.iter_mut() {
            *v /= nrm;
        }
        Ok(())
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).max(0.0).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
