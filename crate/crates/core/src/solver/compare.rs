use serde::{Deserialize, Serialize};

use super::backward::BSDEPSolution;
use crate::error::{Error, Result};
use crate::generator::validate::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub slack: f64,
    /// Fraction of `(path, node)` pairs with `Y¹ > Y² + slack`.
    pub violation_fraction: f64,
    /// Same fraction restricted to the interior nodes `1..N−1`.
    pub interior_violation_fraction: f64,
    /// Largest `Y¹ − Y²` over all pairs.
    pub worst_violation: f64,
    /// Violation fraction per node.
    pub per_node: Vec<f64>,
    pub verdict: Verdict,
}

/// `sqrt(se₁² + se₂²)` of the two `y0` estimates.
pub fn pooled_se(a: &BSDEPSolution, b: &BSDEPSolution) -> f64 {
    (a.y0_se.powi(2) + b.y0_se.powi(2)).sqrt()
}

/// Checks `Y¹ ≤ Y² + slack` on every path and node; PASS iff no pair violates.
pub fn compare_solutions(sol1: &BSDEPSolution, sol2: &BSDEPSolution, slack: f64) -> Result<ComparisonReport> {
    if sol1.diagnostics.ensemble != sol2.diagnostics.ensemble || !sol1.y.same_shape(&sol2.y) {
        return Err(Error::EnsembleMismatch(format!(
            "{:?} vs {:?}",
            sol1.diagnostics.ensemble, sol2.diagnostics.ensemble
        )));
    }
    if !(slack >= 0.0) {
        return Err(Error::InvalidArgument(format!("slack {slack} must be nonnegative")));
    }
    let (mp, nodes) = (sol1.y.paths(), sol1.y.nodes());
    let mut per_node = vec![0.0; nodes];
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0usize;
    let mut interior = 0usize;
    for (k, slot) in per_node.iter_mut().enumerate() {
        let mut bad = 0usize;
        for p in 0..mp {
            let diff = sol1.y.get(p, k, 0) - sol2.y.get(p, k, 0);
            worst = worst.max(diff);
            if diff > slack {
                bad += 1;
            }
        }
        *slot = bad as f64 / mp as f64;
        total += bad;
        if k > 0 && k + 1 < nodes {
            interior += bad;
        }
    }
    let interior_pairs = mp * nodes.saturating_sub(2);
    Ok(ComparisonReport {
        slack,
        violation_fraction: total as f64 / (mp * nodes) as f64,
        interior_violation_fraction: if interior_pairs == 0 { 0.0 } else { interior as f64 / interior_pairs as f64 },
        worst_violation: worst,
        per_node,
        verdict: if total == 0 { Verdict::Pass } else { Verdict::Fail },
    })
}
