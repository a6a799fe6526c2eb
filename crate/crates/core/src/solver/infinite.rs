use serde::{Deserialize, Serialize};

use super::backward::solve_backward;
use super::problem::{BSDEPProblem, HorizonKind};
use super::regression::RegressionBasis;
use crate::error::{Error, Result};
use crate::noise::{PathEnsemble, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub truncations: Vec<f64>,
    pub y0: Vec<f64>,
    pub y0_se: Vec<f64>,
    /// `|y0(T*_j) − y0(T*_{j−1})|`; absent for the first truncation.
    pub differences: Vec<Option<f64>>,
    /// `∫_{T*}^∞ (γ + ρ² + σ²) ds`
    pub tail_integrals: Vec<f64>,
    pub tol: f64,
    pub converged: bool,
    pub converged_at: Option<f64>,
}

impl TruncationReport {
    pub fn y0_at(&self, truncation: f64) -> Option<(f64, f64)> {
        self.truncations.iter().position(|&t| t == truncation).map(|i| (self.y0[i], self.y0_se[i]))
    }
}

/// Solves the truncated problems on `[0, T*]` for each `T*` of the schedule,
/// with the problem's terminal as the tail value at `T*`. `ensembles` is
/// called once per truncation with the grid to sample on.
pub fn solve_infinite_horizon(
    problem: &BSDEPProblem,
    ensembles: impl Fn(&TimeGrid) -> Result<PathEnsemble>,
    basis: &RegressionBasis,
) -> Result<TruncationReport> {
    let HorizonKind::TruncatedInfinite { truncations, steps_per_unit, tol } = problem.horizon() else {
        return Err(Error::InvalidArgument("problem does not have a truncated infinite horizon".into()));
    };
    let coeffs = problem.generator().coeffs();
    coeffs.check_integrability(f64::INFINITY)?;
    let mut report = TruncationReport {
        truncations: truncations.clone(),
        y0: Vec::new(),
        y0_se: Vec::new(),
        differences: Vec::new(),
        tail_integrals: Vec::new(),
        tol: *tol,
        converged: false,
        converged_at: None,
    };
    for &t_star in truncations {
        let steps = (t_star * *steps_per_unit as f64).round().max(1.0) as usize;
        let grid = TimeGrid::new(t_star, steps)?;
        let truncated = problem.with_grid(grid);
        let ensemble = ensembles(&grid)?;
        let sol = solve_backward(&truncated, &ensemble, basis)?;
        let tail = coeffs.integrability(t_star, f64::INFINITY);
        let diff = report.y0.last().map(|prev: &f64| (sol.y0 - prev).abs());
        if !report.converged && diff.is_some_and(|d| d < *tol) && tail < *tol {
            report.converged = true;
            report.converged_at = Some(t_star);
        }
        report.y0.push(sol.y0);
        report.y0_se.push(sol.y0_se);
        report.differences.push(diff);
        report.tail_integrals.push(tail);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{expr::build::*, CoefficientFns, GeneratorSpec};
    use crate::noise::{sample_ensemble, MarkSpace};
    use crate::solver::problem::Terminal;

    #[test]
    fn zero_driver_gives_zero() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let spec = GeneratorSpec::new(c(0.0)).with_coeffs(CoefficientFns::default());
        let pb = BSDEPProblem::new(Terminal::constant(0.0), spec, grid, &MarkSpace::empty(), 1)
            .unwrap()
            .with_horizon(HorizonKind::TruncatedInfinite { truncations: vec![1.0, 2.0], steps_per_unit: 5, tol: 1e-3 })
            .unwrap();
        let r = solve_infinite_horizon(&pb, |g| sample_ensemble(g, &MarkSpace::empty(), 1, 20, 1), &RegressionBasis::default())
            .unwrap();
        assert_eq!(r.y0, vec![0.0, 0.0]);
        assert!(r.converged);
        assert_eq!(r.converged_at, Some(2.0));
    }

    #[test]
    fn finite_problem_rejected() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let pb = BSDEPProblem::new(Terminal::constant(0.0), GeneratorSpec::new(c(0.0)), grid, &MarkSpace::empty(), 1).unwrap();
        assert!(solve_infinite_horizon(&pb, |g| sample_ensemble(g, &MarkSpace::empty(), 1, 2, 1), &RegressionBasis::default())
            .is_err());
    }
}
