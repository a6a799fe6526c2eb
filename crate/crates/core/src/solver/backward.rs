use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::BSDEPProblem;
use super::regression::{Projections, RegressionBasis};
use crate::array::PathArray;
use crate::error::{Error, Result};
use crate::generator::Driver;
use crate::noise::{estimate_norm, NormKind, PathEnsemble};
use crate::stats::{self, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Driver evaluated at the conditional mean `Ŷ_k`.
    #[default]
    Explicit,
    /// `Y_k = Ŷ_k + Δ f(t_k, Y_k, Z_k, U_k)` by fixed-point iteration.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_implicit_iterations")]
    pub implicit_iterations: usize,
}

fn default_implicit_iterations() -> usize {
    5
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { scheme: Scheme::Explicit, implicit_iterations: default_implicit_iterations() }
    }
}

/// Identifies the ensemble a solution was computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleId {
    pub seed: u64,
    pub paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub scheme: String,
}

impl EnsembleId {
    pub fn of(ensemble: &PathEnsemble) -> Self {
        Self {
            seed: ensemble.seed(),
            paths: ensemble.len(),
            n_steps: ensemble.grid().n_steps(),
            horizon: ensemble.grid().horizon(),
            scheme: ensemble.scheme().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `E sup |Y|²`, `E ∫|Z|²`, `E ∫∫|U|²λ` with standard errors.
    pub norm_s2: Estimate,
    pub norm_h2: Estimate,
    pub norm_l2_jump: Estimate,
    /// Largest condition number of the penalised Gram matrices.
    pub max_condition: f64,
    /// Cross-path mean of `Z_k^j` and its standard error, per node and component.
    pub z_mean: Vec<Vec<f64>>,
    pub z_mean_se: Vec<Vec<f64>>,
    /// Mean backward-equation residual over `[0, T]` with the scheme's own quadrature.
    pub residual: Estimate,
    pub basis: String,
    pub ensemble: EnsembleId,
    pub scheme: Scheme,
}

/// Approximate triple `(Y, Z, U)` on an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BSDEPSolution {
    /// `M × (N + 1)`
    pub y: PathArray,
    /// Conditional mean `Ŷ_k = E[Y_{k+1} | F_k]`, `M × N`.
    pub y_cond: PathArray,
    /// `M × N × d`
    pub z: PathArray,
    /// `M × N × m`
    pub u: PathArray,
    /// Driver values `f_k` used in the update, `M × N`.
    pub driver: PathArray,
    pub y0: f64,
    /// Standard error of `y0` from the per-path sums `ξ + Σ Δ f_k`.
    pub y0_se: f64,
    pub diagnostics: Diagnostics,
}

/// Per-path, per-node driver used by the backward pass:
/// `(path, node, t, ŷ, z, u) -> f`.
pub(crate) trait StepDriver: Sync {
    fn eval(&self, p: usize, k: usize, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64;
}

pub(crate) struct Plain<'a, D: Driver + ?Sized>(pub &'a D);

impl<D: Driver + ?Sized> StepDriver for Plain<'_, D> {
    fn eval(&self, _p: usize, _k: usize, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        self.0.eval(t, y, z, u)
    }
}

/// Backward regression for `problem` on `ensemble`.
pub fn solve_backward(problem: &BSDEPProblem, ensemble: &PathEnsemble, basis: &RegressionBasis) -> Result<BSDEPSolution> {
    solve_backward_with(problem, ensemble, basis, &SolverOptions::default())
}

pub fn solve_backward_with(
    problem: &BSDEPProblem,
    ensemble: &PathEnsemble,
    basis: &RegressionBasis,
    options: &SolverOptions,
) -> Result<BSDEPSolution> {
    problem.check_ensemble(ensemble)?;
    let proj = Projections::build(ensemble, basis)?;
    solve_with_driver(problem, ensemble, &proj, problem.generator(), options)
}

/// Backward regression with an arbitrary driver (e.g. a member of the
/// inf-convolution family) on prebuilt projections.
pub fn solve_with_driver<D: Driver + ?Sized>(
    problem: &BSDEPProblem,
    ensemble: &PathEnsemble,
    proj: &Projections,
    driver: &D,
    options: &SolverOptions,
) -> Result<BSDEPSolution> {
    problem.check_ensemble(ensemble)?;
    backward_pass(problem, ensemble, proj, &Plain(driver), options)
}

pub(crate) fn backward_pass(
    problem: &BSDEPProblem,
    ensemble: &PathEnsemble,
    proj: &Projections,
    driver: &dyn StepDriver,
    options: &SolverOptions,
) -> Result<BSDEPSolution> {
    let grid = ensemble.grid();
    let (n, dt) = (grid.n_steps(), grid.dt());
    let (mp, d, m) = (ensemble.len(), ensemble.dim(), ensemble.marks().len());
    let lambdas = ensemble.marks().intensities().to_vec();

    let mut y = PathArray::zeros(mp, n + 1, 1);
    let mut y_cond = PathArray::zeros(mp, n, 1);
    let mut z = PathArray::zeros(mp, n, d);
    let mut u = PathArray::zeros(mp, n, m);
    let mut fvals = PathArray::zeros(mp, n, 1);
    let mut z_mean = vec![vec![0.0; d]; n];
    let mut z_mean_se = vec![vec![0.0; d]; n];

    for (p, path) in ensemble.paths().iter().enumerate() {
        y.set(p, n, 0, problem.terminal().eval(path));
    }
    if !y.node_column(n, 0).iter().all(|v| v.is_finite()) {
        return Err(Error::Divergence { step: n });
    }

    for k in (0..n).rev() {
        let t = grid.node(k);
        let targets = DMatrix::from_fn(mp, 1 + d + m, |p, c| {
            let next = y.get(p, k + 1, 0);
            if c == 0 {
                next
            } else if c <= d {
                next * ensemble.path(p).dw(k)[c - 1]
            } else {
                next * ensemble.compensated_increment(p, k, c - 1 - d)
            }
        });
        for j in 0..d {
            let col: Vec<f64> = targets.column(1 + j).iter().map(|v| v / dt).collect();
            let e = Estimate::from_samples(&col);
            z_mean[k][j] = e.mean;
            z_mean_se[k][j] = e.std_err;
        }
        let fitted = proj.node(k).project_many(&targets);

        let rows: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = (0..mp)
            .into_par_iter()
            .map(|p| {
                let yhat = fitted[(p, 0)];
                let zk: Vec<f64> = (0..d).map(|j| fitted[(p, 1 + j)] / dt).collect();
                let uk: Vec<f64> = (0..m).map(|i| fitted[(p, 1 + d + i)] / (lambdas[i] * dt)).collect();
                let f = match options.scheme {
                    Scheme::Explicit => driver.eval(p, k, t, yhat, &zk, &uk),
                    Scheme::Implicit => {
                        let mut yk = yhat;
                        let mut f = driver.eval(p, k, t, yk, &zk, &uk);
                        for _ in 1..options.implicit_iterations.max(1) {
                            yk = yhat + dt * f;
                            f = driver.eval(p, k, t, yk, &zk, &uk);
                        }
                        f
                    }
                };
                (yhat, f, zk, uk)
            })
            .collect();

        for (p, (yhat, f, zk, uk)) in rows.into_iter().enumerate() {
            let yk = yhat + dt * f;
            if !yk.is_finite() {
                return Err(Error::Divergence { step: k });
            }
            y.set(p, k, 0, yk);
            y_cond.set(p, k, 0, yhat);
            fvals.set(p, k, 0, f);
            z.row_mut(p, k).copy_from_slice(&zk);
            u.row_mut(p, k).copy_from_slice(&uk);
        }
    }

    let y0 = stats::mean(&y.node_column(0, 0));
    let per_path: Vec<f64> = (0..mp)
        .map(|p| {
            let drift: Vec<f64> = (0..n).map(|k| dt * fvals.get(p, k, 0)).collect();
            y.get(p, n, 0) + stats::sum(&drift)
        })
        .collect();
    let y0_se = Estimate::from_samples(&per_path).std_err;

    let marks = ensemble.marks();
    let diagnostics = Diagnostics {
        norm_s2: estimate_norm(&y, NormKind::S2, grid, marks)?,
        norm_h2: estimate_norm(&z, NormKind::H2, grid, marks)?,
        norm_l2_jump: if m > 0 { estimate_norm(&u, NormKind::L2Jump, grid, marks)? } else { Estimate { mean: 0.0, std_err: 0.0 } },
        max_condition: proj.conditions().into_iter().fold(1.0, f64::max),
        z_mean,
        z_mean_se,
        residual: Estimate { mean: f64::NAN, std_err: f64::NAN },
        basis: proj.description().to_string(),
        ensemble: EnsembleId::of(ensemble),
        scheme: options.scheme,
    };
    let mut sol = BSDEPSolution { y, y_cond, z, u, driver: fvals, y0, y0_se, diagnostics };
    sol.diagnostics.residual = stored_residual(&sol, ensemble, 0);
    Ok(sol)
}

/// Residual using the stored driver values `f_k`.
fn stored_residual(sol: &BSDEPSolution, ensemble: &PathEnsemble, from: usize) -> Estimate {
    let dt = ensemble.grid().dt();
    let samples: Vec<f64> = (0..ensemble.len())
        .map(|p| residual_path(sol, ensemble, p, from, |k| dt * sol.driver.get(p, k, 0)))
        .collect();
    Estimate::from_samples(&samples)
}

/// `Y_j − ξ − Σ_k drift_k + Σ_k Z_k ΔW_k + Σ_k Σ_i U_{k,i} Δμ̃_i` over `k ≥ j`.
fn residual_path(sol: &BSDEPSolution, ensemble: &PathEnsemble, p: usize, from: usize, drift: impl Fn(usize) -> f64) -> f64 {
    let n = ensemble.grid().n_steps();
    let m = ensemble.marks().len();
    let mut terms = vec![sol.y.get(p, from, 0), -sol.y.get(p, n, 0)];
    for k in from..n {
        terms.push(-drift(k));
        let dw = ensemble.path(p).dw(k);
        terms.push(sol.z.row(p, k).iter().zip(dw).map(|(a, b)| a * b).sum());
        terms.push((0..m).map(|i| sol.u.get(p, k, i) * ensemble.compensated_increment(p, k, i)).sum());
    }
    stats::sum(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// `f(t_k, Ŷ_k, Z_k, U_k)`, as in the explicit scheme.
    Explicit,
    /// `f(t_k, Y_k, Z_k, U_k)`
    LeftEndpoint,
    /// `½ [f(t_k, Y_k, Z_k, U_k) + f(t_{k+1}, Y_{k+1}, Z_k, U_k)]`
    Trapezoid,
}

/// Ensemble mean of the discrete backward-equation residual over
/// `[t_from, T]`, with `driver` re-evaluated on the solution.
pub fn backward_residual<D: Driver + ?Sized>(
    sol: &BSDEPSolution,
    driver: &D,
    ensemble: &PathEnsemble,
    from: usize,
    quadrature: Quadrature,
) -> Result<Estimate> {
    check_solution_on(sol, ensemble)?;
    let grid = ensemble.grid();
    if from > grid.n_steps() {
        return Err(Error::InvalidArgument(format!("node {from} beyond the grid")));
    }
    let dt = grid.dt();
    let samples: Vec<f64> = (0..ensemble.len())
        .into_par_iter()
        .map(|p| {
            residual_path(sol, ensemble, p, from, |k| {
                let (z, u) = (sol.z.row(p, k), sol.u.row(p, k));
                let t = grid.node(k);
                let f = match quadrature {
                    Quadrature::Explicit => driver.eval(t, sol.y_cond.get(p, k, 0), z, u),
                    Quadrature::LeftEndpoint => driver.eval(t, sol.y.get(p, k, 0), z, u),
                    Quadrature::Trapezoid => {
                        0.5 * (driver.eval(t, sol.y.get(p, k, 0), z, u)
                            + driver.eval(grid.node(k + 1), sol.y.get(p, k + 1, 0), z, u))
                    }
                };
                dt * f
            })
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

pub(crate) fn check_solution_on(sol: &BSDEPSolution, ensemble: &PathEnsemble) -> Result<()> {
    if sol.diagnostics.ensemble != EnsembleId::of(ensemble) {
        return Err(Error::EnsembleMismatch(format!(
            "solution computed on {:?}, ensemble is {:?}",
            sol.diagnostics.ensemble,
            EnsembleId::of(ensemble)
        )));
    }
    Ok(())
}

impl BSDEPSolution {
    /// A candidate solution given by deterministic functions of time, e.g. a
    /// closed form to be checked with [`backward_residual`].
    pub fn deterministic(
        ensemble: &PathEnsemble,
        y: impl Fn(f64) -> f64,
        z: impl Fn(f64) -> Vec<f64>,
        u: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let grid = ensemble.grid();
        let (n, mp, d, m) = (grid.n_steps(), ensemble.len(), ensemble.dim(), ensemble.marks().len());
        let nodes = grid.nodes();
        let yv: Vec<f64> = nodes.iter().map(|&t| y(t)).collect();
        let zv: Vec<Vec<f64>> = nodes[..n].iter().map(|&t| z(t)).collect();
        let uv: Vec<Vec<f64>> = nodes[..n].iter().map(|&t| u(t)).collect();
        if zv.iter().any(|r| r.len() != d) || uv.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("candidate z/u have the wrong width".into()));
        }
        let y_arr = PathArray::from_fn(mp, n + 1, 1, |_, k, _| yv[k]);
        let y_cond = PathArray::from_fn(mp, n, 1, |_, k, _| yv[k + 1]);
        let z_arr = PathArray::from_fn(mp, n, d, |_, k, j| zv[k][j]);
        let u_arr = PathArray::from_fn(mp, n, m, |_, k, i| uv[k][i]);
        let marks = ensemble.marks();
        let zero = Estimate { mean: 0.0, std_err: 0.0 };
        let diagnostics = Diagnostics {
            norm_s2: estimate_norm(&y_arr, NormKind::S2, grid, marks)?,
            norm_h2: estimate_norm(&z_arr, NormKind::H2, grid, marks)?,
            norm_l2_jump: if m > 0 { estimate_norm(&u_arr, NormKind::L2Jump, grid, marks)? } else { zero },
            max_condition: 1.0,
            z_mean: zv.clone(),
            z_mean_se: vec![vec![0.0; d]; n],
            residual: Estimate { mean: f64::NAN, std_err: f64::NAN },
            basis: "deterministic candidate".into(),
            ensemble: EnsembleId::of(ensemble),
            scheme: Scheme::Explicit,
        };
        Ok(Self {
            y: y_arr,
            y_cond,
            z: z_arr,
            u: u_arr,
            driver: PathArray::zeros(mp, n, 1),
            y0: yv[0],
            y0_se: 0.0,
            diagnostics,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.y_cond.nodes()
    }

    /// Writes `path,node,y,z_0..z_{d-1},u_0..u_{m-1}`; `z` and `u` are empty
    /// at the terminal node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (d, m, n) = (self.z.width(), self.u.width(), self.n_steps());
        write!(out, "path,node,y")?;
        for j in 0..d {
            write!(out, ",z_{j}")?;
        }
        for i in 0..m {
            write!(out, ",u_{i}")?;
        }
        writeln!(out)?;
        for p in 0..self.y.paths() {
            for k in 0..=n {
                write!(out, "{p},{k},{:?}", self.y.get(p, k, 0))?;
                if k < n {
                    for v in self.z.row(p, k).iter().chain(self.u.row(p, k)) {
                        write!(out, ",{v:?}")?;
                    }
                } else {
                    for _ in 0..d + m {
                        write!(out, ",")?;
                    }
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary { y0: self.y0, y0_se: self.y0_se, diagnostics: self.diagnostics.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub y0: f64,
    pub y0_se: f64,
    pub diagnostics: Diagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{expr::build::*, GeneratorSpec};
    use crate::noise::{sample_ensemble, MarkSpace, TimeGrid};
    use crate::solver::problem::Terminal;

    fn problem(expr: crate::generator::Expr, terminal: Terminal, n: usize) -> BSDEPProblem {
        let grid = TimeGrid::new(1.0, n).unwrap();
        BSDEPProblem::new(terminal, GeneratorSpec::new(expr), grid, &MarkSpace::empty(), 1).unwrap()
    }

    #[test]
    fn deterministic_ode_matches_recursion() {
        let pb = problem(neg(y()), Terminal::constant(1.0), 20);
        let ens = sample_ensemble(pb.grid(), pb.marks(), 1, 50, 1).unwrap();
        let sol = solve_backward(&pb, &ens, &RegressionBasis::default()).unwrap();
        // explicit Euler: Y_k = (1 − Δ) Y_{k+1}
        let want = 0.95f64.powi(20);
        assert!((sol.y0 - want).abs() < 1e-12, "{} vs {want}", sol.y0);
        assert!(sol.y0_se < 1e-12);
        assert_eq!(sol.y.node_column(20, 0), vec![1.0; 50]);
    }

    #[test]
    fn implicit_scheme_converges_to_backward_euler() {
        let pb = problem(neg(y()), Terminal::constant(1.0), 20);
        let ens = sample_ensemble(pb.grid(), pb.marks(), 1, 10, 1).unwrap();
        let opts = SolverOptions { scheme: Scheme::Implicit, implicit_iterations: 60 };
        let sol = solve_backward_with(&pb, &ens, &RegressionBasis::default(), &opts).unwrap();
        let want = (1.0f64 / 1.05).powi(20);
        assert!((sol.y0 - want).abs() < 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        let pb = problem(c(0.0), Terminal::brownian(0), 5);
        // a single path makes every feature column constant except at node 0
        let ens = sample_ensemble(pb.grid(), pb.marks(), 1, 3, 1).unwrap();
        let err = solve_backward(&pb, &ens, &RegressionBasis::new(4, 0.0)).unwrap_err();
        assert!(matches!(err, Error::SingularRegression { .. }), "{err}");
    }

    #[test]
    fn divergence_names_step() {
        let pb = problem(mul(vec![y(), y(), y(), y(), y()]), Terminal::constant(10.0), 10);
        let ens = sample_ensemble(pb.grid(), pb.marks(), 1, 5, 1).unwrap();
        assert!(matches!(solve_backward(&pb, &ens, &RegressionBasis::default()), Err(Error::Divergence { .. })));
    }

    #[test]
    fn mismatched_ensemble_rejected() {
        let pb = problem(c(0.0), Terminal::constant(0.0), 10);
        let other = TimeGrid::new(1.0, 11).unwrap();
        let ens = sample_ensemble(&other, pb.marks(), 1, 5, 1).unwrap();
        assert!(matches!(solve_backward(&pb, &ens, &RegressionBasis::default()), Err(Error::EnsembleMismatch(_))));
    }

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let ens = sample_ensemble(&grid, &marks, 1, 1, 0).unwrap();
        let sol = BSDEPSolution::deterministic(&ens, |t| 1.0 - t, |_| vec![0.5], |_| vec![0.25]).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path,node,y,z_0,u_0\n0,0,1.0,0.5,0.25\n0,1,0.0,,\n");
    }
}
