//! Monte-Carlo laboratory for scalar backward stochastic differential
//! equations driven by a Brownian motion and a marked Poisson random measure.
//!
//! The crate is split along the lines of the computation:
//!
//! - [`noise`]: time grids, finite mark spaces, seeded path ensembles and the
//!   ensemble norms of the `S²`, `H²` and `L²(μ̃)` spaces.
//! - [`generator`]: driver expressions `f(t, y, z, u)`, assumption validators
//!   and the inf-convolution Lipschitz approximation `f_n`.
//! - [`solver`]: backward regression, Picard iteration, minimal solutions,
//!   comparison reports and truncated infinite horizons.
//! - [`girsanov`]: Doléans-Dade weights, the linear-equation oracle and the
//!   difference-quotient processes used to linearise a pair of solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod error;
pub mod generator;
pub mod girsanov;
pub mod noise;
pub mod solver;
pub mod stats;

pub use array::PathArray;
pub use error::{Error, Result};
pub use stats::Estimate;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
