use serde::{Deserialize, Serialize};

use super::backward::{solve_with_driver, BSDEPSolution, SolverOptions};
use super::problem::BSDEPProblem;
use super::regression::{Projections, RegressionBasis};
use crate::error::{Error, Result};
use crate::generator::infconv::{CachedFamily, LipschitzFamily, SearchSettings};
use crate::noise::PathEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimalOptions {
    #[serde(default)]
    pub search: SearchSettings,
    /// Arguments are rounded to this step before `f_n` is evaluated and cached.
    #[serde(default = "default_step")]
    pub rounding_step: f64,
    #[serde(default = "default_max_entries")]
    pub max_cache_entries: usize,
}

fn default_step() -> f64 {
    CachedFamily::DEFAULT_STEP
}

fn default_max_entries() -> usize {
    2_000_000
}

impl Default for MinimalOptions {
    fn default() -> Self {
        Self { search: SearchSettings::default(), rounding_step: default_step(), max_cache_entries: default_max_entries() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityStats {
    pub from_n: u32,
    pub to_n: u32,
    /// Fraction of `(path, node)` pairs with `Y^{to} ≥ Y^{from}`.
    pub fraction_nondecreasing: f64,
    /// Largest `Y^{from} − Y^{to}` over all pairs.
    pub worst_decrease: f64,
    /// Per-node fraction of nondecreasing pairs.
    pub per_node: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MinimalSolutionReport {
    pub ns: Vec<u32>,
    pub y0: Vec<f64>,
    pub y0_se: Vec<f64>,
    pub monotonicity: Vec<MonotonicityStats>,
    /// Solution for the largest `n`: the minimal-solution estimate.
    pub solution: BSDEPSolution,
    pub cache_entries: usize,
    pub rounding_step: f64,
}

impl MinimalSolutionReport {
    /// Whether `y0(n)` is nondecreasing up to `k` standard errors.
    pub fn y0_monotone_within(&self, k: f64) -> bool {
        self.y0.windows(2).zip(self.y0_se.windows(2)).all(|(y, s)| y[1] >= y[0] - k * (s[0].powi(2) + s[1].powi(2)).sqrt())
    }
}

/// Solves with the drivers `f_n`, `n ∈ ns`, on one ensemble and one set of
/// projections. The problem's generator must declare a growth process.
pub fn minimal_solution(
    problem: &BSDEPProblem,
    ensemble: &PathEnsemble,
    basis: &RegressionBasis,
    ns: &[u32],
    options: &MinimalOptions,
) -> Result<MinimalSolutionReport> {
    problem.check_ensemble(ensemble)?;
    if problem.generator().spec().growth.is_none() {
        return Err(Error::InvalidArgument("minimal solutions need a declared growth process f_t".into()));
    }
    let family = LipschitzFamily::new(problem.generator().clone(), ns.to_vec(), options.search)?;
    let cached = CachedFamily::new(family, options.rounding_step, options.max_cache_entries)?;
    let proj = Projections::build(ensemble, basis)?;
    let solutions = (0..ns.len())
        .map(|i| solve_with_driver(problem, ensemble, &proj, &cached.member(i), &SolverOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    let monotonicity = solutions
        .windows(2)
        .zip(ns.windows(2))
        .map(|(s, n)| monotonicity(&s[0], &s[1], n[0], n[1]))
        .collect();
    let y0 = solutions.iter().map(|s| s.y0).collect();
    let y0_se = solutions.iter().map(|s| s.y0_se).collect();
    Ok(MinimalSolutionReport {
        ns: ns.to_vec(),
        y0,
        y0_se,
        monotonicity,
        solution: solutions.into_iter().next_back().expect("nonempty n list"),
        cache_entries: cached.cached_entries(),
        rounding_step: options.rounding_step,
    })
}

fn monotonicity(a: &BSDEPSolution, b: &BSDEPSolution, from_n: u32, to_n: u32) -> MonotonicityStats {
    let (mp, nodes) = (a.y.paths(), a.y.nodes());
    let mut per_node = vec![0.0; nodes];
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0usize;
    for (k, slot) in per_node.iter_mut().enumerate() {
        let mut ok = 0usize;
        for p in 0..mp {
            let diff = a.y.get(p, k, 0) - b.y.get(p, k, 0);
            worst = worst.max(diff);
            if diff <= 0.0 {
                ok += 1;
            }
        }
        *slot = ok as f64 / mp as f64;
        total += ok;
    }
    MonotonicityStats {
        from_n,
        to_n,
        fraction_nondecreasing: total as f64 / (mp * nodes) as f64,
        worst_decrease: worst,
        per_node,
    }
}
