//! Backward regression solvers on path ensembles.
//!
//! The explicit scheme on a grid `t_0 < … < t_N` reads
//!
//! ```text
//! Y_N   = ξ
//! Ŷ_k   = E[Y_{k+1} | F_k]
//! Z_k   = E[Y_{k+1} ΔW_k | F_k] / Δ
//! U_k,i = E[Y_{k+1} Δμ̃_i | F_k] / (λ_i Δ)
//! Y_k   = Ŷ_k + Δ f(t_k, Ŷ_k, Z_k, U_k)
//! ```
//!
//! with conditional expectations replaced by ridge regressions on
//! polynomial features of `(W_{t_k}, N_{t_k})`.

pub mod backward;
pub mod compare;
pub mod infinite;
pub mod minimal;
pub mod picard;
pub mod problem;
pub mod regression;

pub use backward::{
    backward_residual, solve_backward, solve_backward_with, solve_with_driver, BSDEPSolution, Diagnostics, EnsembleId,
    Quadrature, Scheme, SolutionSummary, SolverOptions,
};
pub use compare::{compare_solutions, pooled_se, ComparisonReport};
pub use infinite::{solve_infinite_horizon, TruncationReport};
pub use minimal::{minimal_solution, MinimalOptions, MinimalSolutionReport, MonotonicityStats};
pub use picard::{picard_solve, solution_distance, PicardOptions, PicardReport};
pub use problem::{BSDEPProblem, HorizonKind, ScalarFn, Terminal, WeightedTerminal};
pub use regression::{NodeProjector, Projections, RegressionBasis};
