//! Measure changes by Doléans-Dade exponentials, the closed-form
//! representation of linear equations under the changed measure, and the
//! difference quotients that linearise the gap between two solutions.
//!
//! For `M = ∫θ dW + ∫∫υ dμ̃` the density is evaluated in product form
//!
//! ```text
//! exp(Σ_k θ_k·ΔW_k − ½ Σ_k |θ_k|² Δ) · exp(−Σ_k Σ_i υ_k(e_i) λ_i Δ) · Π_jumps (1 + υ_s(e))
//! ```
//!
//! accumulated in log space.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::PathArray;
use crate::error::{Error, Result};
use crate::generator::{CoefficientFns, Expr, Generator, GeneratorSpec, JumpKernel, MarkFn, TimeFn};
use crate::noise::{MarkSpace, NoisePath, PathEnsemble, TimeGrid};
use crate::solver::{BSDEPSolution, Projections, RegressionBasis, Terminal};
use crate::stats::{self, Estimate};

/// Integrands `(θ, υ)` of the exponent martingale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialMartingaleSpec {
    /// One function of time per Brownian component.
    pub theta: Vec<TimeFn>,
    /// Declared bound on `|θ_t|`.
    pub theta_bound: f64,
    pub upsilon: MarkFn,
    /// `C` in `|υ_t(e)| ≤ C (1 ∧ |e|)`.
    pub upsilon_bound: f64,
}

impl ExponentialMartingaleSpec {
    pub fn new(theta: Vec<TimeFn>, theta_bound: f64, upsilon: MarkFn, upsilon_bound: f64) -> Self {
        Self { theta, theta_bound, upsilon, upsilon_bound }
    }

    /// Checks the bounds on every grid node and mark. Returns the margin
    /// `min (1 + υ)`, or `1` without marks.
    pub fn validate(&self, grid: &TimeGrid, marks: &MarkSpace, dim: usize) -> Result<f64> {
        if self.theta.len() != dim {
            return Err(Error::MeasureChange(format!("theta has {} components, dimension is {dim}", self.theta.len())));
        }
        for f in &self.theta {
            f.check().map_err(Error::MeasureChange)?;
        }
        self.upsilon.check(marks.len()).map_err(Error::MeasureChange)?;
        let mut margin = f64::INFINITY;
        for t in grid.nodes() {
            let norm = self.theta.iter().map(|f| f.eval(t).powi(2)).sum::<f64>().sqrt();
            if norm > self.theta_bound * (1.0 + 1e-12) {
                return Err(Error::MeasureChange(format!("|theta({t})| = {norm} exceeds the bound {}", self.theta_bound)));
            }
            for (i, &e) in marks.marks().iter().enumerate() {
                let v = self.upsilon.eval(t, i, e);
                if !(v > -1.0) {
                    return Err(Error::MeasureChange(format!("upsilon({t}, {e}) = {v} is not > -1")));
                }
                if v.abs() > self.upsilon_bound * e.abs().min(1.0) * (1.0 + 1e-12) {
                    return Err(Error::MeasureChange(format!(
                        "|upsilon({t}, {e})| = {} exceeds C(1 ∧ |e|) = {}",
                        v.abs(),
                        self.upsilon_bound * e.abs().min(1.0)
                    )));
                }
                margin = margin.min(1.0 + v);
            }
        }
        Ok(if margin.is_finite() { margin } else { 1.0 })
    }

    /// Log-density increments per step: entry `k` covers `(t_k, t_{k+1}]`.
    fn log_increments(&self, path: &NoisePath, grid: &TimeGrid, marks: &MarkSpace) -> Result<Vec<f64>> {
        let dt = grid.dt();
        let mut out = Vec::with_capacity(grid.n_steps());
        for k in 0..grid.n_steps() {
            let t = grid.node(k);
            let mut terms = Vec::with_capacity(4 + marks.len());
            for (f, dw) in self.theta.iter().zip(path.dw(k)) {
                let th = f.eval(t);
                terms.push(th * dw);
                terms.push(-0.5 * th * th * dt);
            }
            for i in 0..marks.len() {
                terms.push(-self.upsilon.eval(t, i, marks.mark(i)) * marks.intensity(i) * dt);
            }
            out.push(stats::sum(&terms));
        }
        for j in path.jumps() {
            let v = self.upsilon.eval(j.time, j.mark, marks.mark(j.mark));
            if !(v > -1.0) {
                return Err(Error::MeasureChange(format!("upsilon = {v} at jump time {}", j.time)));
            }
            out[grid.step_containing(j.time)] += v.ln_1p();
        }
        Ok(out)
    }

    /// `log ℰ(M)_{t_k}` for `k = 0..=N`.
    pub fn log_density_path(&self, path: &NoisePath, grid: &TimeGrid, marks: &MarkSpace) -> Result<Vec<f64>> {
        let inc = self.log_increments(path, grid, marks)?;
        let mut out = Vec::with_capacity(inc.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for v in inc {
            acc += v;
            out.push(acc);
        }
        Ok(out)
    }
}

/// `ℰ(M)_T` along one path.
pub fn doleans_dade(path: &NoisePath, grid: &TimeGrid, marks: &MarkSpace, spec: &ExponentialMartingaleSpec) -> Result<f64> {
    let inc = spec.log_increments(path, grid, marks)?;
    Ok(stats::sum(&inc).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub weights: Vec<f64>,
    /// Sample mean of the weights with its standard error; ≈ 1.
    pub mean: Estimate,
    pub effective_sample_size: f64,
    /// `min (1 + υ)` over the grid.
    pub margin: f64,
}

/// Per-path densities `ℰ(M)_T`.
pub fn girsanov_weights(ensemble: &PathEnsemble, spec: &ExponentialMartingaleSpec) -> Result<WeightReport> {
    let margin = spec.validate(ensemble.grid(), ensemble.marks(), ensemble.dim())?;
    let weights = ensemble
        .paths()
        .par_iter()
        .map(|p| doleans_dade(p, ensemble.grid(), ensemble.marks(), spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightReport {
        mean: Estimate::from_samples(&weights),
        effective_sample_size: stats::effective_sample_size(&weights),
        weights,
        margin,
    })
}

/// Writes `path,weight`.
pub fn write_weights_csv<W: Write>(weights: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "path,weight")?;
    for (p, w) in weights.iter().enumerate() {
        writeln!(out, "{p},{w:?}")?;
    }
    Ok(())
}

/// Linear driver `φ_t + a_t y + b_t·z + ∫ α_t(e) u(e) λ(de)` with terminal ξ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearBSDEPSpec {
    pub a: TimeFn,
    pub b: Vec<TimeFn>,
    pub alpha: MarkFn,
    pub phi: TimeFn,
    pub terminal: Terminal,
}

impl LinearBSDEPSpec {
    /// The measure change built from `(b, α)`.
    pub fn measure_change(&self, horizon: f64, marks: &MarkSpace) -> ExponentialMartingaleSpec {
        let b_bound = self.b.iter().map(|f| f.sup_abs(0.0, horizon).powi(2)).sum::<f64>().sqrt();
        let (lo, hi) = self.alpha_ratio_bounds(horizon, marks);
        ExponentialMartingaleSpec {
            theta: self.b.clone(),
            theta_bound: b_bound,
            upsilon: self.alpha.clone(),
            upsilon_bound: if marks.is_empty() { 0.0 } else { lo.abs().max(hi.abs()) },
        }
    }

    /// `(min, max)` of `α_t(e) / (1 ∧ |e|)` over a sweep of `[0, horizon]`.
    fn alpha_ratio_bounds(&self, horizon: f64, marks: &MarkSpace) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..=200 {
            let t = horizon * s as f64 / 200.0;
            for (i, &e) in marks.marks().iter().enumerate() {
                let r = self.alpha.eval(t, i, e) / e.abs().min(1.0);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    /// Driver spec with γ = sup|a|, ρ = sup|b| and the kernel `β = α`, `σ = 1`.
    pub fn to_generator(&self, horizon: f64, marks: &MarkSpace, dim: usize) -> Result<GeneratorSpec> {
        if self.b.len() != dim {
            return Err(Error::Arity { what: format!("b with {} components", self.b.len()), available: dim });
        }
        let mut args = vec![
            Expr::TimeFn { func: self.phi.clone() },
            Expr::Mul { args: vec![Expr::TimeFn { func: self.a.clone() }, Expr::Y {}] },
        ];
        for (j, f) in self.b.iter().enumerate() {
            args.push(Expr::Mul { args: vec![Expr::TimeFn { func: f.clone() }, Expr::Z { index: j }] });
        }
        let mut spec = GeneratorSpec::new(Expr::Add { args });
        let rho = self.b.iter().map(|f| f.sup_abs(0.0, horizon).powi(2)).sum::<f64>().sqrt();
        let mut coeffs = CoefficientFns::constant(self.a.sup_abs(0.0, horizon), rho, 0.0);
        if !marks.is_empty() {
            if let Expr::Add { args } = &mut spec.expr {
                args.push(Expr::UWeightedIntegral { weight: self.alpha.clone() });
            }
            let (lo, hi) = self.alpha_ratio_bounds(horizon, marks);
            let c = lo.min(0.0);
            if c <= -1.0 {
                return Err(Error::Kernel(format!("alpha / (1 ∧ |e|) reaches {lo}, below the admissible c > -1")));
            }
            coeffs.sigma = TimeFn::constant(1.0);
            spec = spec.with_kernel(JumpKernel { c, big_c: hi.max(1e-12), beta: self.alpha.clone() });
        }
        Ok(spec.with_coeffs(coeffs))
    }

    fn discount(&self, t: f64) -> f64 {
        self.a.integral_pow(0.0, t, 1).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOracle {
    pub node: usize,
    /// `Y_{t_k}` averaged over paths (at node 0, the oracle value itself).
    pub value: f64,
    pub std_err: f64,
    /// Per-path conditional estimates for `k > 0`.
    pub per_path: Option<Vec<f64>>,
    pub weights_mean: Estimate,
}

/// `Ẽ[ξ Γ_T/Γ_k + Σ_{l ≥ k} φ_l Γ_l/Γ_k Δ | F_k]` with `Γ_t = exp ∫_0^t a`.
///
/// At node 0 this is the plain weighted mean over paths. At node `k > 0` the
/// target `(ℰ_T / ℰ_k) X_k` is regressed on the solver's basis, which
/// estimates the conditional expectation under the changed measure.
pub fn linear_representation(
    spec: &LinearBSDEPSpec,
    ensemble: &PathEnsemble,
    node: usize,
    basis: Option<&RegressionBasis>,
) -> Result<LinearOracle> {
    let grid = ensemble.grid();
    let (n, dt) = (grid.n_steps(), grid.dt());
    if node > n {
        return Err(Error::InvalidArgument(format!("node {node} beyond the grid")));
    }
    spec.terminal.check(ensemble.dim(), ensemble.marks().len())?;
    let mc = spec.measure_change(grid.horizon(), ensemble.marks());
    mc.validate(grid, ensemble.marks(), ensemble.dim())?;
    let gamma: Vec<f64> = grid.nodes().iter().map(|&t| spec.discount(t)).collect();
    let phi: Vec<f64> = grid.nodes().iter().map(|&t| spec.phi.eval(t)).collect();

    let per_path = ensemble
        .paths()
        .par_iter()
        .map(|path| {
            let logw = mc.log_density_path(path, grid, ensemble.marks())?;
            let terms: Vec<f64> = (node..n).map(|l| phi[l] * gamma[l] * dt).collect();
            let x = (spec.terminal.eval(path) * gamma[n] + stats::sum(&terms)) / gamma[node];
            Ok(((logw[n] - logw[node]).exp(), logw[n].exp(), x))
        })
        .collect::<Result<Vec<(f64, f64, f64)>>>()?;
    let weights: Vec<f64> = per_path.iter().map(|r| r.1).collect();
    let weights_mean = Estimate::from_samples(&weights);

    if node == 0 {
        let samples: Vec<f64> = per_path.iter().map(|(w, _, x)| w * x).collect();
        let e = Estimate::from_samples(&samples);
        return Ok(LinearOracle { node, value: e.mean, std_err: e.std_err, per_path: None, weights_mean });
    }
    let basis = basis.ok_or_else(|| Error::InvalidArgument("a regression basis is needed for k > 0".into()))?;
    let proj = Projections::build(ensemble, basis)?;
    let target: Vec<f64> = per_path.iter().map(|(w, _, x)| w * x).collect();
    let fitted = proj.node(node).project(&target);
    let e = Estimate::from_samples(&target);
    Ok(LinearOracle { node, value: stats::mean(&fitted), std_err: e.std_err, per_path: Some(fitted), weights_mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientBounds {
    /// `max |Δ_y| / γ(t)` (∞ if γ vanishes where Δ_y does not).
    pub max_dy_over_gamma: f64,
    pub max_dz_over_rho: f64,
    pub min_du: f64,
    pub max_du: f64,
    pub dy_violations: usize,
    pub dz_violations: usize,
    /// Count of `Δ_u ∉ (−1, σ(t) C (1 ∧ |e|)]` (upper bound only with a kernel).
    pub du_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaQuotients {
    /// `M × N`
    pub dy: PathArray,
    /// `M × N × d`
    pub dz: PathArray,
    /// `M × N × m`
    pub du: PathArray,
    pub bounds: QuotientBounds,
}

/// `(Δ_y, Δ_z, Δ_u)` at one node.
type NodeQuotients = (f64, Vec<f64>, Vec<f64>);

fn quotient(num: f64, den: f64) -> f64 {
    if den != 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Difference quotients of `f¹` between two solutions at nodes `0..N`.
///
/// The arguments move from `Θ¹` to `Θ²` one block at a time (first `y`, then
/// each `z_j`, then each `u_i`), so that
/// `f¹(Θ¹) − f¹(Θ²) = Δ_y Ŷ + Σ_j Δ_z^j Ẑ^j + Σ_i Δ_u^i Û^i λ_i` holds exactly.
pub fn delta_quotients(sol1: &BSDEPSolution, sol2: &BSDEPSolution, f1: &Generator, grid: &TimeGrid) -> Result<DeltaQuotients> {
    if sol1.diagnostics.ensemble != sol2.diagnostics.ensemble || !sol1.z.same_shape(&sol2.z) || !sol1.u.same_shape(&sol2.u) {
        return Err(Error::EnsembleMismatch("quotients need two solutions on one ensemble".into()));
    }
    if sol1.z.width() != f1.dim() || sol1.u.width() != f1.n_marks() || sol1.n_steps() != grid.n_steps() {
        return Err(Error::InvalidArgument("generator arity or grid does not match the solutions".into()));
    }
    let (mp, n, d, m) = (sol1.y.paths(), grid.n_steps(), f1.dim(), f1.n_marks());
    let marks = f1.marks();
    let rows: Vec<Vec<NodeQuotients>> = (0..mp)
        .into_par_iter()
        .map(|p| {
            (0..n)
                .map(|k| {
                    let t = grid.node(k);
                    let (y1, y2) = (sol1.y.get(p, k, 0), sol2.y.get(p, k, 0));
                    let (z1, z2) = (sol1.z.row(p, k), sol2.z.row(p, k));
                    let (u1, u2) = (sol1.u.row(p, k), sol2.u.row(p, k));
                    let f = |y: f64, z: &[f64], u: &[f64]| f1.eval_unchecked(t, y, z, u);
                    let dy = quotient(f(y1, z1, u1) - f(y2, z1, u1), y1 - y2);
                    let mut z = z1.to_vec();
                    let dz: Vec<f64> = (0..d)
                        .map(|j| {
                            let before = f(y2, &z, u1);
                            z[j] = z2[j];
                            quotient(before - f(y2, &z, u1), z1[j] - z2[j])
                        })
                        .collect();
                    let mut u = u1.to_vec();
                    let du: Vec<f64> = (0..m)
                        .map(|i| {
                            let before = f(y2, z2, &u);
                            u[i] = u2[i];
                            quotient(before - f(y2, z2, &u), (u1[i] - u2[i]) * marks.intensity(i))
                        })
                        .collect();
                    (dy, dz, du)
                })
                .collect()
        })
        .collect();

    let mut dy = PathArray::zeros(mp, n, 1);
    let mut dz = PathArray::zeros(mp, n, d);
    let mut du = PathArray::zeros(mp, n, m);
    let mut b = QuotientBounds {
        max_dy_over_gamma: 0.0,
        max_dz_over_rho: 0.0,
        min_du: f64::INFINITY,
        max_du: f64::NEG_INFINITY,
        dy_violations: 0,
        dz_violations: 0,
        du_violations: 0,
    };
    let coeffs = f1.coeffs();
    let kernel = f1.spec().kernel.as_ref();
    let tol = 1e-9;
    for (p, row) in rows.into_iter().enumerate() {
        for (k, (qy, qz, qu)) in row.into_iter().enumerate() {
            let t = grid.node(k);
            let (g, r, s) = (coeffs.gamma.eval(t), coeffs.rho.eval(t), coeffs.sigma.eval(t));
            dy.set(p, k, 0, qy);
            b.max_dy_over_gamma = b.max_dy_over_gamma.max(ratio(qy.abs(), g));
            if qy.abs() > g * (1.0 + tol) + tol {
                b.dy_violations += 1;
            }
            for (j, q) in qz.into_iter().enumerate() {
                dz.set(p, k, j, q);
                b.max_dz_over_rho = b.max_dz_over_rho.max(ratio(q.abs(), r));
                if q.abs() > r * (1.0 + tol) + tol {
                    b.dz_violations += 1;
                }
            }
            for (i, q) in qu.into_iter().enumerate() {
                du.set(p, k, i, q);
                b.min_du = b.min_du.min(q);
                b.max_du = b.max_du.max(q);
                let upper = kernel.map(|kn| s * kn.big_c * marks.mark(i).abs().min(1.0));
                if q <= -1.0 || upper.is_some_and(|c| q > c * (1.0 + tol) + tol) {
                    b.du_violations += 1;
                }
            }
        }
    }
    if m == 0 {
        b.min_du = 0.0;
        b.max_du = 0.0;
    }
    Ok(DeltaQuotients { dy, dz, du, bounds: b })
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::expr::build::*;
    use crate::noise::{sample_ensemble, JumpEvent};

    fn one_jump_path() -> (TimeGrid, MarkSpace, NoisePath) {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let path = NoisePath::new(&grid, &marks, 1, vec![0.0; 10], vec![JumpEvent { time: 0.35, mark: 0 }]).unwrap();
        (grid, marks, path)
    }

    #[test]
    fn single_jump_hand_value() {
        let (grid, marks, path) = one_jump_path();
        let spec = ExponentialMartingaleSpec::new(vec![TimeFn::zero()], 0.0, MarkFn::constant(0.5), 0.5);
        let w = doleans_dade(&path, &grid, &marks, &spec).unwrap();
        assert!((w - (-0.5f64).exp() * 1.5).abs() < 1e-12);
    }

    #[test]
    fn product_form_matches_literal_exponential() {
        // exp(M_T − ½⟨M^c⟩_T) Π (1 + ΔM) e^{−ΔM}
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let marks = MarkSpace::new(vec![0.5, 2.0], vec![1.0, 0.7]).unwrap();
        let incs: Vec<f64> = (0..8).map(|k| 0.1 * (k as f64 - 3.5)).collect();
        let jumps = vec![JumpEvent { time: 0.2, mark: 1 }, JumpEvent { time: 0.61, mark: 0 }];
        let path = NoisePath::new(&grid, &marks, 1, incs.clone(), jumps.clone()).unwrap();
        let ups = MarkFn::PerMark { values: vec![-0.3, 0.4] };
        let spec = ExponentialMartingaleSpec::new(vec![TimeFn::constant(0.7)], 0.7, ups, 0.6);
        let theta = 0.7;
        let ups_of = |i: usize| [-0.3, 0.4][i];
        let compensator: f64 = (0..8).map(|_| (ups_of(0) * 1.0 + ups_of(1) * 0.7) * 0.125).sum();
        let jump_sum: f64 = jumps.iter().map(|j| ups_of(j.mark)).sum();
        let m_t = theta * incs.iter().sum::<f64>() + jump_sum - compensator;
        let qv = theta * theta * 1.0;
        let prod: f64 = jumps.iter().map(|j| (1.0 + ups_of(j.mark)) * (-ups_of(j.mark)).exp()).product();
        let literal = (m_t - 0.5 * qv).exp() * prod;
        let w = doleans_dade(&path, &grid, &marks, &spec).unwrap();
        assert!((w - literal).abs() < 1e-12 * literal, "{w} vs {literal}");
    }

    #[test]
    fn identity_change_has_unit_weights() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let ens = sample_ensemble(&grid, &marks, 1, 100, 9).unwrap();
        let spec = ExponentialMartingaleSpec::new(vec![TimeFn::zero()], 0.0, MarkFn::constant(0.0), 0.0);
        let r = girsanov_weights(&ens, &spec).unwrap();
        assert!(r.weights.iter().all(|&w| w == 1.0));
        assert_eq!(r.mean.mean, 1.0);
        assert!((r.effective_sample_size - 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_upsilon_at_minus_one() {
        let (grid, marks, path) = one_jump_path();
        let spec = ExponentialMartingaleSpec::new(vec![TimeFn::zero()], 0.0, MarkFn::constant(-1.0), 1.0);
        assert!(matches!(spec.validate(&grid, &marks, 1), Err(Error::MeasureChange(_))));
        assert!(doleans_dade(&path, &grid, &marks, &spec).is_err());
        let too_big = ExponentialMartingaleSpec::new(vec![TimeFn::constant(2.0)], 1.0, MarkFn::constant(0.0), 1.0);
        assert!(too_big.validate(&grid, &marks, 1).is_err());
    }

    #[test]
    fn deterministic_linear_cases() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let ens = sample_ensemble(&grid, &MarkSpace::empty(), 1, 5, 1).unwrap();
        let discount = LinearBSDEPSpec {
            a: TimeFn::constant(-1.0),
            b: vec![TimeFn::zero()],
            alpha: MarkFn::constant(0.0),
            phi: TimeFn::zero(),
            terminal: Terminal::constant(1.0),
        };
        let r = linear_representation(&discount, &ens, 0, None).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(r.std_err, 0.0);
        let running = LinearBSDEPSpec { a: TimeFn::zero(), phi: TimeFn::constant(1.0), terminal: Terminal::constant(0.0), ..discount };
        assert!((linear_representation(&running, &ens, 0, None).unwrap().value - 1.0).abs() < 1e-12);
        assert!(linear_representation(&running, &ens, 3, None).is_err());
    }

    #[test]
    fn conditional_oracle_tracks_drifted_brownian() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let ens = sample_ensemble(&grid, &MarkSpace::empty(), 1, 4000, 3).unwrap();
        let spec = LinearBSDEPSpec {
            a: TimeFn::zero(),
            b: vec![TimeFn::constant(0.5)],
            alpha: MarkFn::constant(0.0),
            phi: TimeFn::zero(),
            terminal: Terminal::brownian(0),
        };
        let r = linear_representation(&spec, &ens, 5, Some(&RegressionBasis::default())).unwrap();
        let per_path = r.per_path.unwrap();
        let state = crate::solver::regression::state_features(&ens);
        // Ẽ[W_T | F_{1/2}] = W_{1/2} + 0.5 · 0.5
        let err: Vec<f64> = per_path.iter().enumerate().map(|(p, v)| (v - state.get(p, 5, 0) - 0.25).powi(2)).collect();
        assert!(stats::mean(&err).sqrt() < 0.05);
    }

    #[test]
    fn negative_jump_coefficient_is_admissible() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let ens = sample_ensemble(&grid, &marks, 1, 2000, 12).unwrap();
        // f = -0.5 ∫u dλ, ξ = N_T: under the changed measure N has intensity 0.5
        let spec = LinearBSDEPSpec {
            a: TimeFn::zero(),
            b: vec![TimeFn::zero()],
            alpha: MarkFn::constant(-0.5),
            phi: TimeFn::zero(),
            terminal: Terminal::jump_count(None),
        };
        let r = linear_representation(&spec, &ens, 0, None).unwrap();
        assert!((r.value - 0.5).abs() < 3.0 * r.std_err, "{r:?}");
        assert!(spec.to_generator(1.0, &marks, 1).is_ok());
    }

    #[test]
    fn generator_of_linear_spec() {
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let spec = LinearBSDEPSpec {
            a: TimeFn::constant(-0.5),
            b: vec![TimeFn::constant(0.3)],
            alpha: MarkFn::constant(0.2),
            phi: TimeFn::constant(0.1),
            terminal: Terminal::brownian(0),
        };
        let g = spec.to_generator(1.0, &marks, 1).unwrap().bind(&marks, 1).unwrap();
        let v = crate::generator::eval_generator(&g, 0.0, 2.0, &[1.0], &[3.0]).unwrap();
        assert!((v - (0.1 - 1.0 + 0.3 + 0.6)).abs() < 1e-12);
        assert_eq!(g.coeffs().gamma, TimeFn::constant(0.5));
    }

    #[test]
    fn quotients_identity_and_affine() {
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let marks = MarkSpace::single(1.0, 2.0).unwrap();
        let ens = sample_ensemble(&grid, &marks, 1, 4, 0).unwrap();
        let s1 = BSDEPSolution::deterministic(&ens, |t| 1.0 + t, |t| vec![t], |t| vec![2.0 * t]).unwrap();
        let s2 = BSDEPSolution::deterministic(&ens, |t| 1.0 - t, |t| vec![-t], |_| vec![0.5]).unwrap();
        let f = GeneratorSpec::new(add(vec![mul(vec![c(0.7), y()]), sin(z(0)), Expr::UIntegral {}]))
            .with_coeffs(CoefficientFns::constant(0.7, 1.0, 0.0))
            .bind(&marks, 1)
            .unwrap();
        let same = delta_quotients(&s1, &s1, &f, &grid).unwrap();
        assert!(same.dy.node_column(0, 0).iter().all(|&v| v == 0.0));
        let q = delta_quotients(&s1, &s2, &f, &grid).unwrap();
        for k in 1..5 {
            assert!((q.dy.get(0, k, 0) - 0.7).abs() < 1e-12);
            // ∫u dλ has quotient 1 per unit of u λ
            assert!((q.du.get(0, k, 0) - 1.0).abs() < 1e-12);
        }
        assert_eq!(q.bounds.dy_violations, 0);
        assert_eq!(q.bounds.dz_violations, 0);
        // telescoping identity
        for k in 0..5 {
            let t = grid.node(k);
            let lhs = f.eval_unchecked(t, s1.y.get(0, k, 0), s1.z.row(0, k), s1.u.row(0, k))
                - f.eval_unchecked(t, s2.y.get(0, k, 0), s2.z.row(0, k), s2.u.row(0, k));
            let rhs = q.dy.get(0, k, 0) * (s1.y.get(0, k, 0) - s2.y.get(0, k, 0))
                + q.dz.get(0, k, 0) * (s1.z.get(0, k, 0) - s2.z.get(0, k, 0))
                + q.du.get(0, k, 0) * (s1.u.get(0, k, 0) - s2.u.get(0, k, 0)) * 2.0;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
