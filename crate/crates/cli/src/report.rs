//! Bound verification over a recorded history file.
//!
//! Monotone decrease of the Ritz values and the Kato-Temple/shift-policy
//! checks apply to any history. The per-step decrease bound and the rate
//! estimate assume exact preconditioner application, so they are only
//! evaluated when the history was produced with `--exact-precond`; otherwise
//! they are reported as skipped.

use serde::Serialize;

use psdid::analysis::{
    verify_decrease_bound, verify_rate_bound, verify_shift_policy, DecreaseVerdict, RateVerdict,
    ShiftPolicyReport,
};
use psdid::driver::{ApplyMode, MONOTONE_SLACK};
use psdid::{DenseDecomp, Error, Pencil};

use crate::manifest::HistoryFile;

#[derive(Debug, Serialize)]
pub struct MonotoneVerdict {
    pub j: usize,
    pub lambda: f64,
    pub lambda_next: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct TargetReport {
    pub i: usize,
    pub monotone: Vec<MonotoneVerdict>,
    pub decrease: Option<Vec<DecreaseVerdict>>,
    pub rate: Option<Vec<RateVerdict>>,
    pub shift_policy: Option<ShiftPolicyReport>,
    pub violations: usize,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub exact_bounds_checked: bool,
    pub targets: Vec<TargetReport>,
    pub total_violations: usize,
}

pub struct VerifyOutcome {
    pub report: VerifyReport,
    pub violations: usize,
    pub first_violation: Option<String>,
}

pub fn verify(p: &Pencil, file: &HistoryFile, oracle_cap: usize) -> Result<VerifyOutcome, Error> {
    let decomp = DenseDecomp::new(p, oracle_cap)?;
    let exact = file.manifest.config.apply_mode == ApplyMode::ExactDense;
    let mut targets = Vec::new();
    let mut total = 0usize;
    let mut first: Option<String> = None;
    let note_violation = |msg: String, first: &mut Option<String>| {
        if first.is_none() {
            *first = Some(msg);
        }
    };

    for h in &file.targets {
        let mut violations = 0usize;

        let mut monotone = Vec::new();
        for w in h.iterates.windows(2) {
            let passed = w[1].lambda < w[0].lambda + MONOTONE_SLACK * w[0].lambda.abs();
            if !passed {
                violations += 1;
                note_violation(
                    format!(
                        "target {} step {}: lambda rose from {} to {}",
                        h.i, w[0].j, w[0].lambda, w[1].lambda
                    ),
                    &mut first,
                );
            }
            monotone.push(MonotoneVerdict {
                j: w[0].j,
                lambda: w[0].lambda,
                lambda_next: w[1].lambda,
                passed,
            });
        }

        let decrease = if exact {
            let verdicts = verify_decrease_bound(p, h, &decomp)?;
            for v in verdicts.iter().filter(|v| v.applicable && !v.passed) {
                violations += 1;
                note_violation(
                    format!(
                        "target {} step {}: decrease {} below bound {}",
                        h.i, v.j, v.realized, v.bound
                    ),
                    &mut first,
                );
            }
            Some(verdicts)
        } else {
            None
        };

        let rate = if exact {
            let verdicts = verify_rate_bound(p, h, &decomp)?;
            for v in verdicts.iter().filter(|v| v.applicable && !v.passed) {
                violations += 1;
                note_violation(
                    format!(
                        "target {} step {}: eps {} -> {} exceeds factor {}",
                        h.i, v.j, v.epsilon, v.epsilon_next, v.factor
                    ),
                    &mut first,
                );
            }
            Some(verdicts)
        } else {
            None
        };

        let shift_policy = if h.i < p.n() {
            let rep = verify_shift_policy(p, h, &decomp)?;
            if rep.kato_temple_violations > 0 {
                violations += rep.kato_temple_violations;
                let j = rep
                    .steps
                    .iter()
                    .find(|s| s.in_bracket && !s.kato_temple_ok)
                    .map(|s| s.j)
                    .unwrap_or(0);
                note_violation(
                    format!("target {} step {j}: Kato-Temple inequality violated", h.i),
                    &mut first,
                );
            }
            if rep.shift_below_violations > 0 {
                violations += rep.shift_below_violations;
                let j = rep
                    .steps
                    .iter()
                    .find(|s| s.conditions_hold && !s.shift_below_ok)
                    .map(|s| s.j)
                    .unwrap_or(0);
                note_violation(
                    format!(
                        "target {} step {j}: shift policy landed above the target eigenvalue",
                        h.i
                    ),
                    &mut first,
                );
            }
            Some(rep)
        } else {
            None
        };

        total += violations;
        targets.push(TargetReport {
            i: h.i,
            monotone,
            decrease,
            rate,
            shift_policy,
            violations,
        });
    }

    Ok(VerifyOutcome {
        report: VerifyReport {
            exact_bounds_checked: exact,
            targets,
            total_violations: total,
        },
        violations: total,
        first_violation: first,
    })
}
