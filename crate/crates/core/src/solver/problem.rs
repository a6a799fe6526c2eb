use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Generator, GeneratorSpec};
use crate::noise::{MarkSpace, NoisePath, PathEnsemble, TimeGrid};
use crate::stats;

/// Whitelisted scalar maps `g` for terminals of the form `g(W_T)` or `g(N_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFn {
    Identity {},
    /// `scale · x + shift`
    Affine { scale: f64, shift: f64 },
    Square {},
    Abs {},
    /// `max(x − strike, 0)`
    CallPayoff { strike: f64 },
    /// `max(strike − x, 0)`
    PutPayoff { strike: f64 },
    /// `exp(scale · x)`
    Exp { scale: f64 },
    Sin {},
}

impl Default for ScalarFn {
    fn default() -> Self {
        ScalarFn::Identity {}
    }
}

impl ScalarFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Identity {} => x,
            ScalarFn::Affine { scale, shift } => scale * x + shift,
            ScalarFn::Square {} => x * x,
            ScalarFn::Abs {} => x.abs(),
            ScalarFn::CallPayoff { strike } => (x - strike).max(0.0),
            ScalarFn::PutPayoff { strike } => (strike - x).max(0.0),
            ScalarFn::Exp { scale } => (scale * x).exp(),
            ScalarFn::Sin {} => x.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTerminal {
    pub weight: f64,
    pub terminal: Terminal,
}

/// Terminal value ξ as a functional of the whole noise path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Terminal {
    Constant {
        value: f64,
    },
    /// `g(W_T^j)`
    Brownian {
        #[serde(default)]
        component: usize,
        #[serde(default, rename = "fn")]
        func: ScalarFn,
    },
    /// `g(N_T)` for one mark, or for all marks together when `mark` is absent.
    JumpCount {
        #[serde(default)]
        mark: Option<usize>,
        #[serde(default, rename = "fn")]
        func: ScalarFn,
    },
    Linear {
        terms: Vec<WeightedTerminal>,
    },
}

impl Terminal {
    pub fn constant(value: f64) -> Self {
        Terminal::Constant { value }
    }

    pub fn brownian(component: usize) -> Self {
        Terminal::Brownian { component, func: ScalarFn::Identity {} }
    }

    pub fn jump_count(mark: Option<usize>) -> Self {
        Terminal::JumpCount { mark, func: ScalarFn::Identity {} }
    }

    pub fn eval(&self, path: &NoisePath) -> f64 {
        match self {
            Terminal::Constant { value } => *value,
            Terminal::Brownian { component, func } => func.eval(path.terminal_brownian(*component)),
            Terminal::JumpCount { mark, func } => func.eval(path.total_jumps(*mark) as f64),
            Terminal::Linear { terms } => terms.iter().map(|t| t.weight * t.terminal.eval(path)).sum(),
        }
    }

    /// Arity checks against a Brownian dimension and a mark count.
    pub fn check(&self, dim: usize, n_marks: usize) -> Result<()> {
        match self {
            Terminal::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidArgument("terminal constant must be finite".into()))
            }
            Terminal::Brownian { component, .. } if *component >= dim => {
                Err(Error::Arity { what: format!("terminal W[{component}]"), available: dim })
            }
            Terminal::JumpCount { mark: Some(i), .. } if *i >= n_marks => {
                Err(Error::Arity { what: format!("terminal mark {i}"), available: n_marks })
            }
            Terminal::Linear { terms } => terms.iter().try_for_each(|t| t.terminal.check(dim, n_marks)),
            _ => Ok(()),
        }
    }

    /// Sampled `E ξ²` with its standard error.
    pub fn second_moment(&self, ensemble: &PathEnsemble) -> stats::Estimate {
        let sq: Vec<f64> = ensemble.paths().iter().map(|p| self.eval(p).powi(2)).collect();
        stats::Estimate::from_samples(&sq)
    }

    /// ξ on every path of the ensemble.
    pub fn values(&self, ensemble: &PathEnsemble) -> Vec<f64> {
        ensemble.paths().iter().map(|p| self.eval(p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HorizonKind {
    Finite {},
    /// Solve at each truncation `T*` with `steps_per_unit · T*` steps; the
    /// terminal is read as the tail value ξ at `T*`.
    TruncatedInfinite {
        truncations: Vec<f64>,
        #[serde(default = "default_steps_per_unit")]
        steps_per_unit: usize,
        #[serde(default = "default_tail_tol")]
        tol: f64,
    },
}

fn default_steps_per_unit() -> usize {
    100
}

fn default_tail_tol() -> f64 {
    1e-3
}

/// A terminal value, a driver bound to a mark space, and a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BSDEPProblem {
    terminal: Terminal,
    generator: Generator,
    grid: TimeGrid,
    horizon: HorizonKind,
}

impl BSDEPProblem {
    pub fn new(terminal: Terminal, generator: GeneratorSpec, grid: TimeGrid, marks: &MarkSpace, dim: usize) -> Result<Self> {
        let generator = generator.bind(marks, dim)?;
        terminal.check(dim, marks.len())?;
        Ok(Self { terminal, generator, grid, horizon: HorizonKind::Finite {} })
    }

    pub fn with_horizon(mut self, horizon: HorizonKind) -> Result<Self> {
        if let HorizonKind::TruncatedInfinite { truncations, steps_per_unit, tol } = &horizon {
            if truncations.is_empty() || truncations.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
                return Err(Error::InvalidArgument("truncations must be positive and finite".into()));
            }
            if truncations.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument("truncations must be strictly increasing".into()));
            }
            if *steps_per_unit == 0 || !(*tol > 0.0) {
                return Err(Error::InvalidArgument("steps_per_unit and tol must be positive".into()));
            }
            self.generator.coeffs().check_integrability(f64::INFINITY)?;
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn terminal(&self) -> &Terminal {
        &self.terminal
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn marks(&self) -> &MarkSpace {
        self.generator.marks()
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn horizon(&self) -> &HorizonKind {
        &self.horizon
    }

    /// Same problem on another grid.
    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        Self { grid, ..self.clone() }
    }

    pub(crate) fn check_ensemble(&self, ensemble: &PathEnsemble) -> Result<()> {
        if ensemble.grid() != &self.grid {
            return Err(Error::EnsembleMismatch("ensemble grid differs from the problem grid".into()));
        }
        if ensemble.marks() != self.marks() {
            return Err(Error::EnsembleMismatch("ensemble marks differ from the problem marks".into()));
        }
        if ensemble.dim() != self.dim() {
            return Err(Error::EnsembleMismatch("ensemble Brownian dimension differs".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{expr::build::*, CoefficientFns};
    use crate::noise::{JumpEvent, NoisePath};

    #[test]
    fn terminal_evaluation() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let marks = MarkSpace::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let jumps = vec![JumpEvent { time: 0.2, mark: 0 }, JumpEvent { time: 0.7, mark: 1 }, JumpEvent { time: 0.9, mark: 1 }];
        let path = NoisePath::new(&grid, &marks, 1, vec![0.5, 1.0], jumps).unwrap();
        assert_eq!(Terminal::brownian(0).eval(&path), 1.5);
        assert_eq!(Terminal::jump_count(Some(1)).eval(&path), 2.0);
        assert_eq!(Terminal::jump_count(None).eval(&path), 3.0);
        let call = Terminal::Brownian { component: 0, func: ScalarFn::CallPayoff { strike: 1.0 } };
        assert_eq!(call.eval(&path), 0.5);
        let lin = Terminal::Linear {
            terms: vec![
                WeightedTerminal { weight: 2.0, terminal: Terminal::constant(1.0) },
                WeightedTerminal { weight: -1.0, terminal: Terminal::jump_count(None) },
            ],
        };
        assert_eq!(lin.eval(&path), -1.0);
        assert!(Terminal::brownian(1).check(1, 2).is_err());
        assert!(Terminal::jump_count(Some(2)).check(1, 2).is_err());
    }

    #[test]
    fn terminal_json() {
        let t: Terminal = serde_json::from_str(r#"{"kind": "brownian", "fn": {"kind": "square"}}"#).unwrap();
        assert_eq!(t, Terminal::Brownian { component: 0, func: ScalarFn::Square {} });
        assert!(serde_json::from_str::<Terminal>(r#"{"kind": "brownian", "fn": {"kind": "square", "x": 1}}"#).is_err());
    }

    #[test]
    fn infinite_horizon_requires_integrability() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let spec = GeneratorSpec::new(y()).with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0));
        let p = BSDEPProblem::new(Terminal::constant(0.0), spec, grid, &MarkSpace::empty(), 1).unwrap();
        let h = HorizonKind::TruncatedInfinite { truncations: vec![4.0, 8.0], steps_per_unit: 10, tol: 1e-3 };
        assert!(matches!(p.with_horizon(h), Err(Error::Integrability { .. })));
    }
}
