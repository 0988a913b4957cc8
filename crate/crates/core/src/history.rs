//! Per-iteration solve records and their JSON/CSV encodings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pencil::EigPair;

/// Why the iteration for one target stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    Breakdown,
}

/// One outer-iteration record for target `i`.
///
/// Entry `j` describes the iterate `u_{i;j}`; `shift` and `minres_iters`
/// belong to the preconditioned step that produced it (absent for `j = 0` and
/// for identity preconditioning). `localized` is the (latching) localization
/// status of this iterate. The iterate vector and the projected Ritz values
/// are carried in memory but not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterateState {
    #[serde(skip)]
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    /// Relative residual `||Hu - lambda Su|| / (||Hu|| + |lambda| ||Su||)`.
    pub res: f64,
    pub r_s_inv_norm: f64,
    pub localized: bool,
    #[serde(rename = "shift")]
    pub shift_used: Option<f64>,
    pub minres_iters: usize,
    /// Seconds since the start of this target's solve; zero in deterministic
    /// mode.
    pub wallclock: f64,
    #[serde(skip)]
    pub u: Vec<f64>,
    /// Projected eigenvalues `i ..= i + ell` from the step that produced this
    /// iterate (empty for `j = 0`).
    #[serde(skip)]
    pub ritz_values: Vec<f64>,
}

/// Final value/residual summary of one target.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FinalSummary {
    pub value: f64,
    pub residual: f64,
}

/// Complete record of one target's solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    /// 1-based target index.
    pub i: usize,
    #[serde(rename = "final")]
    pub final_summary: FinalSummary,
    pub termination: Termination,
    pub iterates: Vec<IterateState>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub final_vector: Vec<f64>,
}

impl ConvergenceHistory {
    pub fn final_pair(&self) -> EigPair {
        EigPair {
            value: self.final_summary.value,
            vector: self.final_vector.clone(),
        }
    }

    /// Indices `j` of localized iterates.
    pub fn localized_range(&self) -> Vec<usize> {
        self.iterates
            .iter()
            .filter(|s| s.localized)
            .map(|s| s.j)
            .collect()
    }
}

const CSV_HEADER: &str = "i,j,lambda,res,localized,shift,minres_iters";

/// Encode histories as CSV, one row per iterate.
pub fn to_csv(histories: &[ConvergenceHistory]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for h in histories {
        for s in &h.iterates {
            let shift = s.shift_used.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                h.i, s.j, s.lambda, s.res, s.localized, shift, s.minres_iters
            ));
        }
    }
    out
}

/// Row of the CSV encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub res: f64,
    pub localized: bool,
    pub shift: Option<f64>,
    pub minres_iters: usize,
}

/// Parse the CSV encoding produced by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != CSV_HEADER {
                return Err(Error::parse(1, format!("unexpected CSV header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::parse(
                lineno,
                format!("expected 7 fields, got {}", fields.len()),
            ));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(lineno, format!("invalid {what} '{s}'")))
        };
        rows.push(CsvRow {
            i: fields[0]
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid target index"))?,
            j: fields[1]
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid iteration index"))?,
            lambda: parse_f(fields[2], "lambda")?,
            res: parse_f(fields[3], "res")?,
            localized: fields[4]
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid localized flag"))?,
            shift: if fields[5].is_empty() {
                None
            } else {
                Some(parse_f(fields[5], "shift")?)
            },
            minres_iters: fields[6]
                .parse()
                .map_err(|_| Error::parse(lineno, "invalid minres_iters"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ConvergenceHistory {
        ConvergenceHistory {
            i: 2,
            final_summary: FinalSummary {
                value: 1.5,
                residual: 1e-10,
            },
            termination: Termination::Converged,
            iterates: vec![
                IterateState {
                    i: 2,
                    j: 0,
                    lambda: 2.25,
                    res: 0.5,
                    r_s_inv_norm: 0.7,
                    localized: false,
                    shift_used: None,
                    minres_iters: 0,
                    wallclock: 0.0,
                    u: vec![1.0],
                    ritz_values: vec![],
                },
                IterateState {
                    i: 2,
                    j: 1,
                    lambda: 1.5,
                    res: 1e-10,
                    r_s_inv_norm: 2e-10,
                    localized: true,
                    shift_used: Some(-0.25),
                    minres_iters: 12,
                    wallclock: 0.0,
                    u: vec![0.5],
                    ritz_values: vec![1.5, 3.0],
                },
            ],
            warnings: vec![],
            final_vector: vec![0.5],
        }
    }

    #[test]
    fn csv_round_trips_and_matches_fields() {
        let h = sample();
        let csv = to_csv(std::slice::from_ref(&h));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 2);
        for (row, s) in rows.iter().zip(&h.iterates) {
            assert_eq!(row.i, h.i);
            assert_eq!(row.j, s.j);
            assert_eq!(row.lambda, s.lambda);
            assert_eq!(row.res, s.res);
            assert_eq!(row.localized, s.localized);
            assert_eq!(row.shift, s.shift_used);
            assert_eq!(row.minres_iters, s.minres_iters);
        }
    }

    #[test]
    fn json_schema_field_names() {
        let h = sample();
        let v = serde_json::to_value(&h).unwrap();
        assert!(v.get("final").is_some());
        let it = &v["iterates"][1];
        for key in [
            "j",
            "lambda",
            "res",
            "r_s_inv_norm",
            "localized",
            "shift",
            "minres_iters",
            "wallclock",
        ] {
            assert!(it.get(key).is_some(), "missing {key}");
        }
        assert!(it.get("u").is_none());
        // round trip
        let back: ConvergenceHistory = serde_json::from_value(v).unwrap();
        assert_eq!(back.iterates[1].shift_used, Some(-0.25));
    }
}
