// validation guards use `!(x > 0.0)` forms on purpose: they must reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Sparse symmetric-definite generalized eigensolver based on preconditioned
//! steepest descent with implicit deflation (PSD-id).
//!
//! The solver computes the few smallest eigenpairs of `H u = lambda S u` for
//! sparse symmetric `H` and sparse symmetric positive-definite `S`, one pair
//! at a time, deflating previously accepted eigenvectors through the
//! Rayleigh-Ritz basis. Search directions are preconditioned with a fixed
//! shift-and-invert operator until the current Ritz value is localized, after
//! which a locally accelerated shift-and-invert preconditioner (shifted at the
//! Ritz value itself) takes over and the iteration converges superlinearly.
//!
//! Besides the solver, the crate ships:
//!
//! * benchmark pencil generators for the 1D harmonic oscillator discretized
//!   with linear FE, cubic FE and partition-of-unity FE bases ([`problems`]),
//! * Matrix Market I/O for `coordinate real symmetric` pencils,
//! * a dense generalized-eigenvalue oracle for test- and analysis-scale
//!   problems ([`oracle`]),
//! * an [`analysis`] layer that evaluates the solver's per-step decrease
//!   bound, convergence-rate estimate and shift closed forms against dense
//!   spectral data.

pub mod analysis;
pub mod driver;
pub mod error;
pub mod factor;
pub mod history;
pub mod minres;
pub mod oracle;
pub mod pencil;
pub mod precond;
pub mod problems;
pub mod sparse;

pub use driver::{solve_smallest, SolverConfig};
pub use error::{Error, Result};
pub use history::{ConvergenceHistory, IterateState, Termination};
pub use minres::{minres_shifted, MinresConfig, MinresResult};
pub use oracle::{dense_gev_oracle, DenseDecomp, DEFAULT_ORACLE_CAP};
pub use pencil::{EigPair, Pencil};
pub use precond::{apply_preconditioner, PreconditionerKind, PreconditionerSpec};
pub use sparse::SparseSymMatrix;
