//! Integration of the bound machinery with actual solver runs: per-step
//! decrease bounds against realized decreases, tail behavior of the shift
//! policy, and the ideal-direction diagnostic along accelerated iterations.

mod common;

use psdid::analysis::{
    decrease_lower_bound, ideal_direction_diagnostic, m_matrix, verify_shift_policy,
};
use psdid::driver::{psdid_step, ApplyMode, GlobalPrecond, StepOutcome};
use psdid::precond::{apply_exact, PreconditionerKind, PreconditionerSpec};
use psdid::problems::{assemble_oscillator, Discretization, OscillatorSpec};
use psdid::{solve_smallest, DenseDecomp, IterateState, Pencil, SolverConfig, SparseSymMatrix};

fn state_for(p: &Pencil, i: usize, u: Vec<f64>) -> IterateState {
    let lambda = p.rayleigh_quotient(&u).unwrap();
    let res = p.relative_residual(lambda, &u).unwrap();
    let r = p.residual(lambda, &u).unwrap();
    IterateState {
        i,
        j: 0,
        lambda,
        res,
        r_s_inv_norm: p.s_inv_norm(&r).unwrap(),
        localized: false,
        shift_used: None,
        minres_iters: 0,
        wallclock: 0.0,
        u,
        ritz_values: Vec::new(),
    }
}

#[test]
fn decrease_bound_holds_for_one_identity_step() {
    // diag pencil, i = 1, u = (cos t, sin t, 0), K = I (so K^c = I, kappa = 1,
    // phi = ||r||): the realized decrease of one step dominates the bound
    let p = Pencil::new(
        SparseSymMatrix::from_diag(&[1.0, 2.0, 3.0]),
        SparseSymMatrix::identity(3),
    )
    .unwrap();
    let decomp = DenseDecomp::new(&p, 10).unwrap();
    let t: f64 = 0.4;
    let state = state_for(&p, 1, vec![t.cos(), t.sin(), 0.0]);
    let k = nalgebra::DMatrix::identity(3, 3);
    let db = decrease_lower_bound(&p, 1, state.r_s_inv_norm, &k, &decomp).unwrap();
    assert!((db.kappa - 1.0).abs() < 1e-10);
    assert!((db.g - 1.0).abs() < 1e-12);
    assert!((db.phi - state.r_s_inv_norm).abs() < 1e-12);

    let cfg = SolverConfig {
        extra_ritz: 1,
        ..SolverConfig::default()
    };
    let spec = PreconditionerSpec::new(PreconditionerKind::Identity);
    let StepOutcome::Advanced { state: next, .. } =
        psdid_step(&p, 1, &[], &state, &[], &cfg, &spec, Some(&decomp)).unwrap()
    else {
        panic!("step should advance");
    };
    let realized = state.lambda - next.lambda;
    assert!(
        realized >= db.bound - 1e-12,
        "decrease {realized} below bound {}",
        db.bound
    );
}

#[test]
fn m_matrix_is_positive_semidefinite() {
    let p = common::random_dense_pencil(77, 24);
    let decomp = DenseDecomp::new(&p, 100).unwrap();
    for i in [1usize, 3] {
        let m = m_matrix(&p, i, &decomp);
        let eigs = m.clone().symmetric_eigen().eigenvalues;
        let norm = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-10 * norm, "M has eigenvalue {min} (norm {norm})");
    }
}

#[test]
fn shift_policy_tail_decreases_on_accelerated_run() {
    // exact locally-accelerated run on a diagonal pencil: the shift-policy
    // accelerant Delta + tau sqrt(theta eps) and |beta - lambda_i| both
    // decrease over the final localized iterates
    let d: Vec<f64> = (0..20)
        .map(|k| 1.0 + 0.37 * k as f64 + 0.01 * (k * k) as f64)
        .collect();
    let p = Pencil::new(SparseSymMatrix::from_diag(&d), SparseSymMatrix::identity(20)).unwrap();
    let decomp = DenseDecomp::new(&p, 100).unwrap();
    let cfg = SolverConfig {
        nev: 2,
        extra_ritz: 2,
        rng_seed: 5,
        apply_mode: ApplyMode::ExactDense,
        global_precond: GlobalPrecond::ShiftInvert(0.3),
        deterministic: true,
        ..SolverConfig::default()
    };
    let (_, hists) = solve_smallest(&p, &cfg).unwrap();
    let mut tails_seen = 0;
    for h in &hists {
        let rep = verify_shift_policy(&p, h, &decomp).unwrap();
        assert_eq!(rep.kato_temple_violations, 0);
        assert_eq!(rep.shift_below_violations, 0);
        if let (Some(accel), Some(beta)) = (rep.accel_tail_decreasing, rep.beta_gap_decreasing) {
            assert!(accel, "accelerant tail not decreasing for target {}", h.i);
            assert!(beta, "shift gap not decreasing for target {}", h.i);
            tails_seen += 1;
        }
    }
    assert!(tails_seen >= 1, "no run produced a three-step localized tail");
}

#[test]
fn ideal_direction_tail_shrinks_along_accelerated_iterations() {
    let p = assemble_oscillator(&OscillatorSpec::new(Discretization::Pufe, 8)).unwrap();
    let decomp = DenseDecomp::new(&p, 100).unwrap();
    let cfg = SolverConfig {
        nev: 2,
        rng_seed: 7,
        apply_mode: ApplyMode::ExactDense,
        deterministic: true,
        ..SolverConfig::default()
    };
    let (_, hists) = solve_smallest(&p, &cfg).unwrap();
    let mut compared = false;
    for h in &hists {
        // localized iterates that stepped with a shift-invert preconditioner
        let accel: Vec<&IterateState> = h
            .iterates
            .iter()
            .filter(|s| s.localized && s.shift_used.is_some() && s.res > 1e-13)
            .collect();
        if accel.len() < 2 {
            continue;
        }
        let ratio_at = |s: &IterateState| -> f64 {
            let r = p.residual(s.lambda, &s.u).unwrap();
            let p_vec = apply_exact(&decomp, s.shift_used, &r).unwrap();
            ideal_direction_diagnostic(&p, h.i, &s.u, &p_vec, &decomp)
                .unwrap()
                .tail_ratio
        };
        let first = ratio_at(accel[0]);
        let last = ratio_at(accel[accel.len() - 1]);
        assert!(
            last < first,
            "target {}: tail ratio grew from {first:.3e} to {last:.3e}",
            h.i
        );
        compared = true;
    }
    assert!(compared, "no target had two accelerated iterates to compare");
}
