//! Preconditioned MINRES for the shifted systems `(H - lambda S) p = rhs`.
//!
//! Minimum-residual iteration for symmetric, possibly indefinite operators
//! (Paige & Saunders 1975) with an optional symmetric positive-definite
//! `S^{-1}` preconditioner applied exactly through the pencil's cached
//! factorization. With the preconditioner the recurrence minimizes the
//! `S^{-1}`-norm of the residual; convergence is reported against the
//! Euclidean norm of the true residual, which is recomputed each iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pencil::{axpy, dot, norm2, Pencil};

/// Preconditioner applied inside MINRES.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinresPreconditioner {
    None,
    SInverse,
}

/// Inner-solve configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MinresConfig {
    /// Relative residual tolerance `eta` in (0, 1).
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: MinresPreconditioner,
}

impl Default for MinresConfig {
    fn default() -> Self {
        MinresConfig {
            rel_tolerance: 0.1,
            max_iterations: 200,
            preconditioner: MinresPreconditioner::SInverse,
        }
    }
}

impl MinresConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::usage(format!(
                "MINRES relative tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::usage("MINRES max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a MINRES solve.
#[derive(Debug, Clone)]
pub struct MinresResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `||(H - lambda S) x - rhs|| / ||rhs||` in the Euclidean norm.
    pub achieved_relres: f64,
    pub converged: bool,
    /// Preconditioned residual norms per iteration (entry 0 is the initial
    /// one); non-increasing by the minimal-residual property.
    pub res_norm_trace: Vec<f64>,
}

/// Lanczos breakdown threshold relative to the initial preconditioned
/// residual norm.
const BREAKDOWN_REL: f64 = 1e-14;

/// Approximately solve `(H - lambda S) x = rhs` with preconditioned MINRES.
///
/// Never fails on plain non-convergence: hitting `max_iterations` returns
/// `converged = false` with the best iterate. NaN contamination of the
/// Lanczos recurrence is an error.
pub fn minres_shifted(
    p: &Pencil,
    lambda: f64,
    rhs: &[f64],
    cfg: &MinresConfig,
) -> Result<MinresResult> {
    cfg.validate()?;
    let n = p.n();
    if rhs.len() != n {
        return Err(Error::usage(format!(
            "MINRES rhs length {} does not match pencil dimension {n}",
            rhs.len()
        )));
    }
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Err(Error::usage("MINRES rhs must be nonzero"));
    }
    let apply_op = |x: &[f64]| -> Vec<f64> {
        let hx = p.h().apply(x);
        let sx = p.s().apply(x);
        hx.iter().zip(&sx).map(|(h, s)| h - lambda * s).collect()
    };
    let apply_prec = |r: &[f64]| -> Vec<f64> {
        match cfg.preconditioner {
            MinresPreconditioner::None => r.to_vec(),
            MinresPreconditioner::SInverse => p.s_solve(r),
        }
    };

    // x0 = 0, r0 = rhs
    let mut x = vec![0.0; n];
    let z0 = apply_prec(rhs);
    let beta1_sq = dot(rhs, &z0);
    if !(beta1_sq > 0.0) {
        return Err(Error::numerical(
            "preconditioner is not positive definite on the initial residual",
        ));
    }
    let beta1 = beta1_sq.sqrt();

    // Lanczos vectors: v in the residual space, z = M^{-1} v.
    let mut v: Vec<f64> = rhs.iter().map(|r| r / beta1).collect();
    let mut z: Vec<f64> = z0.iter().map(|r| r / beta1).collect();
    let mut v_prev = vec![0.0; n];
    let mut beta = 0.0_f64; // beta_k joining v_{k-1}

    // Givens state and direction vectors.
    let mut c = -1.0_f64;
    let mut s = 0.0_f64;
    let mut d = vec![0.0; n];
    let mut d_prev = vec![0.0; n];
    let mut phi_bar = beta1;
    let mut eps = 0.0_f64;
    let mut delta1 = 0.0_f64;

    let mut trace = vec![beta1];
    let mut relres = 1.0;
    let mut iterations = 0;

    for k in 1..=cfg.max_iterations {
        // Lanczos step on the preconditioned operator.
        let mut w = apply_op(&z);
        let alpha = dot(&z, &w);
        axpy(-alpha, &v, &mut w);
        if k > 1 {
            axpy(-beta, &v_prev, &mut w);
        }
        let z_next_raw = apply_prec(&w);
        let beta_next_sq = dot(&w, &z_next_raw);
        if !beta_next_sq.is_finite() || !alpha.is_finite() {
            return Err(Error::numerical(format!(
                "MINRES Lanczos step {k} produced a non-finite coefficient"
            )));
        }
        let beta_next = beta_next_sq.max(0.0).sqrt();

        // Apply previous rotation, then form the new one (Paige-Saunders).
        let delta2 = c * delta1 + s * alpha;
        let gamma1 = s * delta1 - c * alpha;
        let eps_next = s * beta_next;
        let delta1_next = -c * beta_next;
        let gamma2 = (gamma1 * gamma1 + beta_next * beta_next).sqrt();
        if gamma2 == 0.0 {
            // exact breakdown with a singular projected system; keep iterate
            break;
        }
        c = gamma1 / gamma2;
        s = beta_next / gamma2;
        let tau = c * phi_bar;
        phi_bar *= s;

        // Direction update and solution step.
        let mut d_next = z.clone();
        axpy(-delta2, &d, &mut d_next);
        axpy(-eps, &d_prev, &mut d_next);
        for di in d_next.iter_mut() {
            *di /= gamma2;
        }
        axpy(tau, &d_next, &mut x);

        d_prev = std::mem::take(&mut d);
        d = d_next;
        eps = eps_next;
        delta1 = delta1_next;
        iterations = k;

        // True residual in both metrics: Euclidean for the convergence test,
        // preconditioned for the monotonicity trace.
        let ax = apply_op(&x);
        let true_res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        relres = norm2(&true_res) / rhs_norm;
        let prec_norm = match cfg.preconditioner {
            MinresPreconditioner::None => norm2(&true_res),
            MinresPreconditioner::SInverse => p.s_inv_norm(&true_res)?,
        };
        if !relres.is_finite() {
            return Err(Error::numerical(format!(
                "MINRES iterate {k} has a non-finite residual"
            )));
        }
        trace.push(prec_norm);

        if relres <= cfg.rel_tolerance {
            return Ok(MinresResult {
                solution: x,
                iterations,
                achieved_relres: relres,
                converged: true,
                res_norm_trace: trace,
            });
        }
        if beta_next <= BREAKDOWN_REL * beta1 {
            // happy breakdown: the Krylov space is exhausted
            break;
        }

        v_prev = std::mem::take(&mut v);
        v = w.iter().map(|wi| wi / beta_next).collect();
        z = z_next_raw.iter().map(|zi| zi / beta_next).collect();
        beta = beta_next;
    }

    let converged = relres <= cfg.rel_tolerance;
    Ok(MinresResult {
        solution: x,
        iterations,
        achieved_relres: relres,
        converged,
        res_norm_trace: trace,
    })
}
