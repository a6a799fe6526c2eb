use serde::{Deserialize, Serialize};

use super::backward::{backward_pass, BSDEPSolution, Scheme, SolverOptions, StepDriver};
use super::problem::BSDEPProblem;
use super::regression::{Projections, RegressionBasis};
use crate::array::PathArray;
use crate::error::Result;
use crate::generator::{AssumptionClass, Driver};
use crate::noise::{estimate_norm, NormKind, PathEnsemble};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardOptions {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { max_iter: default_max_iter(), tol: default_tol() }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub solution: BSDEPSolution,
    pub converged: bool,
    /// Number of backward solves performed.
    pub iterations: usize,
    /// `‖Θ^j − Θ^{j−1}‖` in the ensemble `S² × H² × L²(μ̃)` norm, per iterate.
    pub distances: Vec<f64>,
}

/// Driver frozen at the previous iterate.
struct Frozen<'a, D: Driver + ?Sized> {
    driver: &'a D,
    y: &'a PathArray,
    z: &'a PathArray,
    u: &'a PathArray,
}

impl<D: Driver + ?Sized> StepDriver for Frozen<'_, D> {
    fn eval(&self, p: usize, k: usize, t: f64, _y: f64, _z: &[f64], _u: &[f64]) -> f64 {
        self.driver.eval(t, self.y.get(p, k, 0), self.z.row(p, k), self.u.row(p, k))
    }
}

/// Ensemble distance between two solutions in `S² × H² × L²(μ̃)`.
pub fn solution_distance(a: &BSDEPSolution, b: &BSDEPSolution, ensemble: &PathEnsemble) -> Result<f64> {
    let (grid, marks) = (ensemble.grid(), ensemble.marks());
    let s2 = estimate_norm(&a.y.difference(&b.y), NormKind::S2, grid, marks)?.mean;
    let h2 = estimate_norm(&a.z.difference(&b.z), NormKind::H2, grid, marks)?.mean;
    let l2 = if marks.is_empty() { 0.0 } else { estimate_norm(&a.u.difference(&b.u), NormKind::L2Jump, grid, marks)?.mean };
    Ok((s2 + h2 + l2).sqrt())
}

/// Picard iteration `Θ^{j+1} = Φ(Θ^j)` starting from the zero triple, where
/// `Φ` solves the equation with the driver frozen at `Θ^j`.
///
/// With the explicit scheme the driver is frozen at `(Ŷ^j, Z^j, U^j)`, with the
/// implicit scheme at `(Y^j, Z^j, U^j)`; either way the fixed point is the
/// corresponding [`solve_backward`](super::solve_backward) solution.
/// Non-convergence is reported through the flag, not as an error.
pub fn picard_solve(
    problem: &BSDEPProblem,
    ensemble: &PathEnsemble,
    basis: &RegressionBasis,
    picard: &PicardOptions,
    scheme: Scheme,
) -> Result<PicardReport> {
    problem.check_ensemble(ensemble)?;
    if problem.generator().spec().class != AssumptionClass::A {
        return Err(crate::Error::InvalidArgument("Picard iteration needs an A-class (Lipschitz) generator".into()));
    }
    let proj = Projections::build(ensemble, basis)?;
    let (mp, n, d, m) = (ensemble.len(), ensemble.grid().n_steps(), ensemble.dim(), ensemble.marks().len());
    let options = SolverOptions { scheme: Scheme::Explicit, ..Default::default() };
    let zero_y = PathArray::zeros(mp, n, 1);
    let zero_z = PathArray::zeros(mp, n, d);
    let zero_u = PathArray::zeros(mp, n, m);

    let mut current: Option<BSDEPSolution> = None;
    let mut distances = Vec::new();
    let mut converged = false;
    for _ in 0..picard.max_iter.max(1) {
        let frozen_y_owned;
        let (fy, fz, fu) = match &current {
            None => (&zero_y, &zero_z, &zero_u),
            Some(s) => match scheme {
                Scheme::Explicit => (&s.y_cond, &s.z, &s.u),
                Scheme::Implicit => {
                    frozen_y_owned = PathArray::from_fn(mp, n, 1, |p, k, _| s.y.get(p, k, 0));
                    (&frozen_y_owned, &s.z, &s.u)
                }
            },
        };
        let frozen = Frozen { driver: problem.generator(), y: fy, z: fz, u: fu };
        let mut next = backward_pass(problem, ensemble, &proj, &frozen, &options)?;
        next.diagnostics.scheme = scheme;
        let dist = match &current {
            Some(prev) => solution_distance(&next, prev, ensemble)?,
            None => {
                let zero = BSDEPSolution { y: PathArray::zeros(mp, n + 1, 1), ..next.clone() };
                let zero = BSDEPSolution { z: zero_z.clone(), u: zero_u.clone(), ..zero };
                solution_distance(&next, &zero, ensemble)?
            }
        };
        distances.push(dist);
        current = Some(next);
        if dist < picard.tol {
            converged = true;
            break;
        }
    }
    Ok(PicardReport { solution: current.expect("at least one iteration"), converged, iterations: distances.len(), distances })
}
