//! Flexible preconditioners for the steepest-descent search direction.
//!
//! Three kinds are supported: the identity, a fixed shift-and-invert
//! `(H - sigma S)^{-1}` with `sigma` below the smallest eigenvalue, and the
//! locally accelerated `(H - lambda S)^{-1}` shifted at the current Ritz
//! value. The shifted operators are applied matrix-free through MINRES; an
//! exact dense application path exists for analysis-scale runs where the
//! convergence bounds assume exact preconditioning.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minres::{minres_shifted, MinresConfig, MinresResult};
use crate::oracle::DenseDecomp;
use crate::pencil::Pencil;

/// Which preconditioner to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionerKind {
    Identity,
    FixedShiftInvert(f64),
    /// Shift-and-invert at the current Ritz value.
    LocallyAccelerated,
}

/// Preconditioner selection plus the inner MINRES configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreconditionerSpec {
    pub kind: PreconditionerKind,
    pub inner: MinresConfig,
}

impl PreconditionerSpec {
    pub fn new(kind: PreconditionerKind) -> Self {
        PreconditionerSpec {
            kind,
            inner: MinresConfig::default(),
        }
    }
}

/// Inner tolerance used for the locally accelerated solve: the current
/// relative residual, clamped into MINRES' open interval.
pub fn eta_from_res(res: f64) -> f64 {
    res.clamp(1e-13, 0.9)
}

/// Apply the preconditioner: returns `p = -K r` (approximated through MINRES
/// for the shifted kinds) and the inner-solve report when one ran.
///
/// `lambda` is the current Ritz value (the shift of the locally accelerated
/// kind); `res` is the current relative residual, which sets the inner
/// tolerance of the locally accelerated solve when given.
pub fn apply_preconditioner(
    spec: &PreconditionerSpec,
    p: &Pencil,
    lambda: f64,
    r: &[f64],
    res: Option<f64>,
) -> Result<(Vec<f64>, Option<MinresResult>)> {
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::usage("apply_preconditioner: zero residual"));
    }
    let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
    match spec.kind {
        PreconditionerKind::Identity => Ok((neg_r, None)),
        PreconditionerKind::FixedShiftInvert(sigma) => {
            let out = minres_shifted(p, sigma, &neg_r, &spec.inner)?;
            Ok((out.solution.clone(), Some(out)))
        }
        PreconditionerKind::LocallyAccelerated => {
            let mut cfg = spec.inner;
            if let Some(res) = res {
                cfg.rel_tolerance = eta_from_res(res);
            }
            let out = minres_shifted(p, lambda, &neg_r, &cfg)?;
            Ok((out.solution.clone(), Some(out)))
        }
    }
}

/// Dense symmetrized `(H - shift S)^{-1}` for analysis-scale pencils.
pub fn dense_shift_invert(p: &Pencil, shift: f64) -> Result<DMatrix<f64>> {
    let a = p.h().to_dense() - p.s().to_dense() * shift;
    let inv = a.lu().try_inverse().ok_or_else(|| {
        Error::numerical(format!("(H - {shift} S) is singular; cannot invert"))
    })?;
    let invt = inv.transpose();
    Ok((inv + invt) * 0.5)
}

/// Exact application `p = -K r` of a shift-invert (or identity) preconditioner
/// through the dense spectral decomposition: `(H - beta S)^{-1} r =
/// U (Lambda - beta)^{-1} U^T r`.
pub fn apply_exact(
    decomp: &DenseDecomp,
    shift: Option<f64>,
    r: &[f64],
) -> Result<Vec<f64>> {
    let n = decomp.n();
    let Some(beta) = shift else {
        return Ok(r.iter().map(|v| -v).collect());
    };
    let rv = nalgebra::DVector::from_row_slice(r);
    let coeffs = decomp.vectors.transpose() * rv;
    let mut scaled = coeffs;
    for k in 0..n {
        let gap = decomp.values[k] - beta;
        if gap == 0.0 {
            return Err(Error::numerical(format!(
                "exact shift-invert shift {beta} coincides with eigenvalue {k}"
            )));
        }
        scaled[k] /= gap;
    }
    let out = &decomp.vectors * scaled;
    Ok(out.iter().map(|v| -v).collect())
}

/// Result of the effectively-positive-definite test: spectrum summary of
/// `K^c = (U^c)^T S K S U^c` over the non-deflated oracle basis.
#[derive(Debug, Clone, Copy)]
pub struct EffectivePdReport {
    pub is_epd: bool,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Condition number of `K^c` (infinite when not positive definite).
    pub kappa: f64,
}

/// Check effective positive definiteness of a dense operator `K` for target
/// `i` (1-based): all eigenvalues of the symmetrized `K^c` must exceed
/// `1e-12 * max |diag K^c|`.
pub fn effective_pd_check_dense(
    k: &DMatrix<f64>,
    p: &Pencil,
    i: usize,
    decomp: &DenseDecomp,
) -> Result<EffectivePdReport> {
    let n = p.n();
    if i < 1 || i > n {
        return Err(Error::usage(format!(
            "target index {i} out of range 1..={n}"
        )));
    }
    let uc = decomp.vectors_from(i - 1);
    let s = p.s().to_dense();
    let suc = &s * &uc;
    let kc = suc.transpose() * k * &suc;
    let kct = kc.transpose();
    let kc = (kc + kct) * 0.5;
    let max_diag = (0..kc.nrows())
        .map(|t| kc[(t, t)].abs())
        .fold(0.0, f64::max);
    let eigs = kc.symmetric_eigen().eigenvalues;
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_eig = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let is_epd = min_eig > 1e-12 * max_diag;
    let kappa = if min_eig > 0.0 {
        max_eig / min_eig
    } else {
        f64::INFINITY
    };
    Ok(EffectivePdReport {
        is_epd,
        min_eig,
        max_eig,
        kappa,
    })
}

/// [`effective_pd_check_dense`] for a preconditioner spec, densifying the
/// operator exactly (LU inverse of the shifted pencil, not MINRES). The
/// locally accelerated kind needs the current Ritz value as `lambda`.
pub fn effective_pd_check(
    spec: &PreconditionerSpec,
    p: &Pencil,
    i: usize,
    lambda: Option<f64>,
    decomp: &DenseDecomp,
) -> Result<EffectivePdReport> {
    let k = match spec.kind {
        PreconditionerKind::Identity => DMatrix::identity(p.n(), p.n()),
        PreconditionerKind::FixedShiftInvert(sigma) => dense_shift_invert(p, sigma)?,
        PreconditionerKind::LocallyAccelerated => {
            let lambda = lambda.ok_or_else(|| {
                Error::usage("locally accelerated check needs the current Ritz value")
            })?;
            dense_shift_invert(p, lambda)?
        }
    };
    effective_pd_check_dense(&k, p, i, decomp)
}
