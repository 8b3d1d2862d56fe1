//! Exact Shapley values by enumerating every coalition.

use crate::engine::{self, BoundsState, EngineConfig, Status};
use crate::error::{Error, Result};
use crate::valuefn::{AttributionProblem, Mask};

/// Largest feature count the enumerator accepts.
pub const MAX_ORACLE_FEATURES: usize = 20;

/// Slack allowed when testing containment of the exact values.
pub const CONTAINMENT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactShapResult {
    pub phi: Vec<f64>,
    pub coalitions_evaluated: u64,
}

/// `w(k) = 1 / (g · C(g−1, k))` for `k = 0..g`, by ratio recursion.
pub fn coalition_weights(g: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(g);
    if g == 0 {
        return w;
    }
    let mut current = 1.0 / g as f64;
    for k in 0..g {
        w.push(current);
        if k + 1 < g {
            current *= (k + 1) as f64 / (g - 1 - k) as f64;
        }
    }
    w
}

/// Evaluates `v` at all `2^g` masks (in Gray-code order), indexed by bit pattern.
pub fn value_table(problem: &AttributionProblem) -> Result<Vec<f64>> {
    let g = problem.num_features();
    if g > MAX_ORACLE_FEATURES {
        return Err(Error::TooManyFeatures {
            features: g,
            max: MAX_ORACLE_FEATURES,
        });
    }
    let total = 1u64 << g;
    let mut table = vec![0.0; total as usize];
    for k in 0..total {
        let code = k ^ (k >> 1);
        table[code as usize] = problem.value(&Mask::from_bits(code, g))?;
    }
    Ok(table)
}

pub fn exact_shap(problem: &AttributionProblem) -> Result<ExactShapResult> {
    let g = problem.num_features();
    let table = value_table(problem)?;
    let w = coalition_weights(g);
    let mut phi = vec![0.0; g];
    for (code, &v) in table.iter().enumerate() {
        let size = (code as u64).count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if code >> i & 1 == 0 {
                *p += w[size] * (table[code | 1 << i] - v);
            }
        }
    }
    Ok(ExactShapResult {
        phi,
        coalitions_evaluated: table.len() as u64,
    })
}

/// Containment of exact values in engine bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    /// Largest distance by which an exact value falls outside its interval.
    pub max_abs_gap_violation: f64,
    pub contained: bool,
    /// `max_i |φ_i − lb_i|`, the error of the reported bounds.
    pub max_abs_error: f64,
    pub exact: Vec<f64>,
}

/// Compares exact values against bounds.
pub fn check_bounds(exact: &[f64], lb: &[f64], ub: &[f64]) -> CheckReport {
    let mut violation: f64 = 0.0;
    let mut error: f64 = 0.0;
    for ((&phi, &l), &u) in exact.iter().zip(lb).zip(ub) {
        violation = violation.max(l - phi).max(phi - u);
        error = error.max((phi - l).abs());
    }
    CheckReport {
        max_abs_gap_violation: violation.max(0.0),
        contained: violation <= CONTAINMENT_SLACK,
        max_abs_error: error,
        exact: exact.to_vec(),
    }
}

/// Runs both the enumerator and the engine and reports containment.
pub fn check_engine(problem: &AttributionProblem, config: EngineConfig) -> Result<(CheckReport, BoundsState, Status)> {
    let exact = exact_shap(problem)?;
    let out = engine::run(problem, config)?;
    let report = check_bounds(&exact.phi, &out.bounds.lb_phi, &out.bounds.ub_phi);
    Ok((report, out.bounds, out.status))
}
