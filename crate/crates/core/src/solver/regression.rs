//! Least-squares conditional expectations on polynomial features of the
//! state `(W_{t_k}, N_{t_k})`.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::PathEnsemble;
use crate::stats;

/// All monomials in `(W^1..W^d, N^1..N^m)` of total degree `1..=degree`,
/// plus an unpenalised intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionBasis {
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_degree() -> u32 {
    2
}

fn default_ridge() -> f64 {
    1e-6
}

impl Default for RegressionBasis {
    fn default() -> Self {
        Self { degree: default_degree(), ridge: default_ridge() }
    }
}

impl RegressionBasis {
    pub fn new(degree: u32, ridge: f64) -> Self {
        Self { degree, ridge }
    }

    /// Exponent vectors of the non-constant monomials over `vars` variables,
    /// in graded lexicographic order.
    pub fn exponents(&self, vars: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        for total in 1..=self.degree {
            let mut e = vec![0u32; vars];
            compositions(total, 0, &mut e, &mut out);
        }
        out
    }

    pub fn describe(&self, dim: usize, n_marks: usize) -> String {
        format!(
            "monomials of total degree <= {} in (W_1..W_{dim}, N_1..N_{n_marks}), {} columns + intercept, ridge {}",
            self.degree,
            self.exponents(dim + n_marks).len(),
            self.ridge
        )
    }

    fn check(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge {} must be nonnegative", self.ridge)));
        }
        Ok(())
    }
}

fn compositions(remaining: u32, var: usize, e: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if var + 1 == e.len() {
        e[var] = remaining;
        out.push(e.clone());
        e[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        e[var] = take;
        compositions(remaining - take, var + 1, e, out);
    }
    e[var] = 0;
}

/// Linear smoother for one node: centred, standardised features with a
/// ridge-penalised Gram matrix factored once.
#[derive(Debug, Clone)]
pub struct NodeProjector {
    xc: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    condition: f64,
}

impl NodeProjector {
    /// `raw` is the `M × q` feature matrix without the intercept column.
    pub fn new(raw: &DMatrix<f64>, ridge: f64, step: usize) -> Result<Self> {
        let m = raw.nrows();
        let mut keep = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for c in 0..raw.ncols() {
            let col: Vec<f64> = raw.column(c).iter().copied().collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularRegression { step, reason: format!("non-finite feature in column {c}") });
            }
            let mu = stats::mean(&col);
            let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m as f64).sqrt();
            // columns constant across paths carry no information
            if sd > 1e-10 * mu.abs().max(1.0) {
                keep.push(c);
                cols.push(col.iter().map(|v| (v - mu) / sd).collect());
            }
        }
        let q = cols.len();
        let xc = DMatrix::from_fn(m, q, |r, c| cols[c][r]);
        if q == 0 {
            return Ok(Self { xc, chol: None, condition: 1.0 });
        }
        let mut gram = xc.transpose() * &xc;
        for i in 0..q {
            gram[(i, i)] += ridge * m as f64;
        }
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let condition = hi / lo;
        if !(lo > 1e-12 * hi) {
            return Err(Error::SingularRegression {
                step,
                reason: format!("rank-deficient design (eigenvalues in [{lo:e}, {hi:e}]); raise the ridge"),
            });
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::SingularRegression { step, reason: "Gram matrix is not positive definite".into() })?;
        Ok(Self { xc, chol: Some(chol), condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn columns(&self) -> usize {
        self.xc.ncols()
    }

    /// Fitted values for each target column; each fitted column has exactly the
    /// target's sample mean.
    pub fn project_many(&self, targets: &DMatrix<f64>) -> DMatrix<f64> {
        let m = targets.nrows();
        let mut out = DMatrix::zeros(m, targets.ncols());
        for c in 0..targets.ncols() {
            let col: Vec<f64> = targets.column(c).iter().copied().collect();
            let mu = stats::mean(&col);
            match &self.chol {
                None => out.column_mut(c).fill(mu),
                Some(chol) => {
                    let centred = DMatrix::from_fn(m, 1, |r, _| col[r] - mu);
                    let beta = chol.solve(&(self.xc.transpose() * &centred));
                    let fit = &self.xc * beta;
                    for r in 0..m {
                        out[(r, c)] = mu + fit[(r, 0)];
                    }
                }
            }
        }
        out
    }

    pub fn project(&self, target: &[f64]) -> Vec<f64> {
        let t = DMatrix::from_column_slice(target.len(), 1, target);
        self.project_many(&t).column(0).iter().copied().collect()
    }
}

/// `(W_{t_k}, N_{t_k})` on every path and node: `M × (N + 1) × (d + m)`.
pub fn state_features(ensemble: &PathEnsemble) -> crate::PathArray {
    let n = ensemble.grid().n_steps();
    let (d, m) = (ensemble.dim(), ensemble.marks().len());
    let mut out = crate::PathArray::zeros(ensemble.len(), n + 1, d + m);
    for (p, path) in ensemble.paths().iter().enumerate() {
        for k in 0..n {
            let prev: Vec<f64> = out.row(p, k).to_vec();
            let row = out.row_mut(p, k + 1);
            for j in 0..d {
                row[j] = prev[j] + path.dw(k)[j];
            }
            for i in 0..m {
                row[d + i] = prev[d + i] + path.jump_count(k, i) as f64;
            }
        }
    }
    out
}

/// One projector per node `0..N` (node `N` is included for conditional
/// expectations at the horizon).
#[derive(Debug, Clone)]
pub struct Projections {
    nodes: Vec<NodeProjector>,
    description: String,
}

impl Projections {
    pub fn build(ensemble: &PathEnsemble, basis: &RegressionBasis) -> Result<Self> {
        basis.check()?;
        let state = state_features(ensemble);
        let vars = state.width();
        let exps = basis.exponents(vars);
        let nodes = (0..state.nodes())
            .map(|k| {
                let raw = DMatrix::from_fn(ensemble.len(), exps.len(), |p, c| {
                    let s = state.row(p, k);
                    exps[c].iter().zip(s).map(|(&e, &x)| x.powi(e as i32)).product()
                });
                NodeProjector::new(&raw, basis.ridge, k)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, description: basis.describe(ensemble.dim(), ensemble.marks().len()) })
    }

    pub fn node(&self, k: usize) -> &NodeProjector {
        &self.nodes[k]
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn conditions(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.condition()).collect()
    }
}
