//! Shared pencil builders for the integration and acceptance suites.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use psdid::{Pencil, SparseSymMatrix};

/// Diagonal pencil with well-separated ascending eigenvalues.
pub fn random_diag_pencil(seed: u64, n: usize) -> Pencil {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(n);
    let mut acc = 0.5 + rng.random_range(0.0..1.0);
    for _ in 0..n {
        acc += 0.05 + rng.random_range(0.0..0.6);
        vals.push(acc);
    }
    Pencil::new(
        SparseSymMatrix::from_diag(&vals),
        SparseSymMatrix::identity(n),
    )
    .unwrap()
}

/// Dense-ish random symmetric pencil with SPD `S`, built from seeded
/// orthogonal congruences.
pub fn random_dense_pencil(seed: u64, n: usize) -> Pencil {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let q = random_orthogonal(&mut rng, n);
    let h_vals: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..6.0)).collect();
    let s_vals: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let h = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(h_vals)) * q.transpose();
    let s = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s_vals)) * q.transpose();
    Pencil::new(sym_from_dense(&h), sym_from_dense(&s)).unwrap()
}

/// Ill-conditioned pencil where `H` and `S` share a near-nullspace of the
/// given dimension: both are `O(scale)` on the trailing directions of a
/// common orthogonal basis.
pub fn shared_near_nullspace_pencil(
    seed: u64,
    n: usize,
    null_dim: usize,
    scale: f64,
) -> (Pencil, DMatrix<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let q = random_orthogonal(&mut rng, n);
    let mut h_vals = Vec::with_capacity(n);
    let mut s_vals = Vec::with_capacity(n);
    for k in 0..n {
        if k < n - null_dim {
            h_vals.push(rng.random_range(1.0..10.0));
            s_vals.push(rng.random_range(0.5..2.0));
        } else {
            h_vals.push(scale * rng.random_range(0.5..1.5));
            s_vals.push(scale * rng.random_range(0.5..1.5));
        }
    }
    let h = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(h_vals)) * q.transpose();
    let s = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s_vals)) * q.transpose();
    let v = q.columns(n - null_dim, null_dim).into_owned();
    (
        Pencil::new(sym_from_dense(&h), sym_from_dense(&s)).unwrap(),
        v,
    )
}

pub fn random_orthogonal(rng: &mut ChaCha12Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Exact symmetrization before sparsifying: congruence products carry
/// rounding asymmetry.
pub fn sym_from_dense(m: &DMatrix<f64>) -> SparseSymMatrix {
    let mt = m.transpose();
    let sym = (m + mt) * 0.5;
    SparseSymMatrix::from_dense(&sym).unwrap()
}
