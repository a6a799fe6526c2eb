//! Experiment configuration: one JSON file per run.
//!
//! Every block rejects unknown keys. [`parse_config`] also cross-checks the
//! blocks (arities against the mark count, integrability for infinite
//! horizons) by building the problems the experiment will solve.

use std::path::PathBuf;

use bsdep_core::generator::infconv::PropertyOptions;
use bsdep_core::generator::validate::{SampleBox, ValidationOptions};
use bsdep_core::generator::{Expr, GeneratorSpec, MarkFn};
use bsdep_core::girsanov::LinearBSDEPSpec;
use bsdep_core::noise::{MarkSpace, TimeGrid};
use bsdep_core::solver::{
    BSDEPProblem, HorizonKind, MinimalOptions, PicardOptions, Quadrature, RegressionBasis, Scheme, SolverOptions, Terminal,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Solve,
    Picard,
    Minimal,
    Compare,
    Oracle,
    Validate,
    Infinite,
    Simulate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Picard => "picard",
            Self::Minimal => "minimal",
            Self::Compare => "compare",
            Self::Oracle => "oracle",
            Self::Validate => "validate",
            Self::Infinite => "infinite",
            Self::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "fifty")]
    pub steps: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { horizon: 1.0, steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MarksBlock {
    #[serde(default)]
    pub marks: Vec<f64>,
    #[serde(default)]
    pub intensities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    #[serde(default)]
    pub terminal: Option<Terminal>,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub marks: MarksBlock,
    #[serde(default = "one_usize")]
    pub dim: usize,
    #[serde(default = "finite")]
    pub horizon: HorizonKind,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        Self {
            terminal: None,
            generator: None,
            grid: GridBlock::default(),
            marks: MarksBlock::default(),
            dim: 1,
            horizon: finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleBlock {
    #[serde(default = "ten_thousand")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EnsembleBlock {
    fn default() -> Self {
        Self { paths: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default)]
    pub basis: RegressionBasis,
    #[serde(default)]
    pub options: SolverOptions,
    #[serde(default)]
    pub picard: PicardOptions,
}

/// `|estimate − value| ≤ rel_tol·|value| + k_se·se + abs_tol`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    #[serde(default)]
    pub rel_tol: f64,
    #[serde(default = "three")]
    pub k_se: f64,
    #[serde(default)]
    pub abs_tol: f64,
}

impl Target {
    pub fn tolerance(&self, se: f64) -> f64 {
        self.rel_tol * self.value.abs() + self.k_se * se + self.abs_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZMeanCheck {
    pub value: f64,
    #[serde(default = "three")]
    pub k_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheck {
    #[serde(default = "trapezoid")]
    pub quadrature: Quadrature,
    #[serde(default = "three")]
    pub k_se: f64,
    #[serde(default = "tiny")]
    pub abs_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondProblem {
    pub terminal: Terminal,
    pub generator: GeneratorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeControl {
    /// Lower bound on the interior violation fraction.
    pub min_interior_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnPropertyBlock {
    pub ns: Vec<u32>,
    #[serde(default)]
    pub options: PropertyOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationTarget {
    pub truncation: f64,
    pub target: Target,
}

/// Kind-specific settings.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Solve {
        #[serde(default)]
        expected_y0: Option<Target>,
        #[serde(default)]
        z_mean: Option<ZMeanCheck>,
        #[serde(default)]
        residual: Option<ResidualCheck>,
    },
    Picard {
        #[serde(default)]
        expected_y0: Option<Target>,
        /// Agreement with the direct solver, in pooled standard errors.
        #[serde(default = "three")]
        agreement_k_se: f64,
        #[serde(default = "tiny")]
        agreement_abs_tol: f64,
    },
    Minimal {
        ns: Vec<u32>,
        #[serde(default)]
        options: MinimalOptions,
        #[serde(default)]
        expected_y0: Option<Target>,
        /// Closed-form candidate `Y_t` (an expression in `t` only) checked
        /// against the discrete equation and compared with the estimate.
        #[serde(default)]
        candidate: Option<Expr>,
        #[serde(default)]
        candidate_residual: Option<ResidualCheck>,
        #[serde(default = "three")]
        monotone_k_se: f64,
    },
    Compare {
        second: SecondProblem,
        /// Slack in pooled standard errors of `y0`.
        #[serde(default = "five")]
        slack_se: f64,
        #[serde(default)]
        slack_abs: f64,
        #[serde(default)]
        negative_control: Option<NegativeControl>,
    },
    Oracle {
        linear: LinearBSDEPSpec,
        #[serde(default = "oracle_target")]
        tolerance: OracleTolerance,
    },
    Validate {
        #[serde(default = "default_box")]
        sample_box: SampleBox,
        #[serde(default)]
        options: ValidationOptions,
        #[serde(default)]
        fn_properties: Option<FnPropertyBlock>,
    },
    Infinite {
        #[serde(default)]
        expected_y0: Option<TruncationTarget>,
    },
    Simulate {
        #[serde(default = "unit_integrand")]
        integrands: Vec<MarkFn>,
        #[serde(default = "three")]
        k_se: f64,
    },
}

/// `|y0_solver − y0_oracle| ≤ rel_tol·|y0_oracle| + k_se·pooled_se + abs_tol`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTolerance {
    #[serde(default = "one_percent")]
    pub rel_tol: f64,
    #[serde(default = "three")]
    pub k_se: f64,
    #[serde(default)]
    pub abs_tol: f64,
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::Solve { .. } => ExperimentKind::Solve,
            Self::Picard { .. } => ExperimentKind::Picard,
            Self::Minimal { .. } => ExperimentKind::Minimal,
            Self::Compare { .. } => ExperimentKind::Compare,
            Self::Oracle { .. } => ExperimentKind::Oracle,
            Self::Validate { .. } => ExperimentKind::Validate,
            Self::Infinite { .. } => ExperimentKind::Infinite,
            Self::Simulate { .. } => ExperimentKind::Simulate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub problem: ProblemBlock,
    #[serde(default)]
    pub ensemble: EnsembleBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }

    pub fn grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::new(self.problem.grid.horizon, self.problem.grid.steps).map_err(inconsistent)
    }

    pub fn marks(&self) -> Result<MarkSpace, ConfigError> {
        let m = &self.problem.marks;
        MarkSpace::new(m.marks.clone(), m.intensities.clone()).map_err(inconsistent)
    }

    /// Main problem; the oracle kind derives it from its linear spec.
    pub fn problem(&self) -> Result<BSDEPProblem, ConfigError> {
        let (grid, marks, dim) = (self.grid()?, self.marks()?, self.problem.dim);
        let (terminal, generator) = match &self.experiment {
            Experiment::Oracle { linear, .. } => {
                (linear.terminal.clone(), linear.to_generator(grid.horizon(), &marks, dim).map_err(inconsistent)?)
            }
            _ => (
                self.problem.terminal.clone().ok_or_else(|| missing("problem.terminal"))?,
                self.problem.generator.clone().ok_or_else(|| missing("problem.generator"))?,
            ),
        };
        terminal.check(dim, marks.len()).map_err(inconsistent)?;
        BSDEPProblem::new(terminal, generator, grid, &marks, dim)
            .and_then(|p| p.with_horizon(self.problem.horizon.clone()))
            .map_err(inconsistent)
    }

    /// Second problem of a comparison.
    pub fn second_problem(&self) -> Result<Option<BSDEPProblem>, ConfigError> {
        let Experiment::Compare { second, .. } = &self.experiment else { return Ok(None) };
        let (grid, marks, dim) = (self.grid()?, self.marks()?, self.problem.dim);
        second.terminal.check(dim, marks.len()).map_err(inconsistent)?;
        BSDEPProblem::new(second.terminal.clone(), second.generator.clone(), grid, &marks, dim).map(Some).map_err(inconsistent)
    }

    /// Cross-block checks; called by [`parse_config`].
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ensemble.paths < 2 {
            return Err(ConfigError::Inconsistent(format!("ensemble.paths = {} must be at least 2", self.ensemble.paths)));
        }
        let marks = self.marks()?;
        self.grid()?;
        match &self.experiment {
            Experiment::Simulate { integrands, .. } => {
                for f in integrands {
                    f.check(marks.len()).map_err(ConfigError::Inconsistent)?;
                }
            }
            Experiment::Validate { .. } => {
                let g = self.problem.generator.clone().ok_or_else(|| missing("problem.generator"))?;
                g.bind(&marks, self.problem.dim).map_err(inconsistent)?;
            }
            Experiment::Oracle { .. } => {
                if self.problem.terminal.is_some() || self.problem.generator.is_some() {
                    return Err(ConfigError::Inconsistent(
                        "oracle runs take terminal and generator from experiment.linear".into(),
                    ));
                }
                self.problem()?;
            }
            Experiment::Minimal { ns, .. } => {
                if ns.is_empty() || ns.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ConfigError::Inconsistent("experiment.ns must be nonempty and increasing".into()));
                }
                self.problem()?;
            }
            Experiment::Infinite { .. } => {
                if !matches!(self.problem.horizon, HorizonKind::TruncatedInfinite { .. }) {
                    return Err(ConfigError::Inconsistent("infinite runs need problem.horizon.kind = truncated_infinite".into()));
                }
                self.problem()?;
            }
            Experiment::Compare { .. } => {
                self.problem()?;
                self.second_problem()?;
            }
            Experiment::Solve { .. } | Experiment::Picard { .. } => {
                self.problem()?;
            }
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        self.solver.options
    }

    pub fn scheme(&self) -> Scheme {
        self.solver.options.scheme
    }
}

/// Parses and validates a config. Schema errors carry the JSON path of the
/// offending value.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            vec![ConfigError::Syntax { line: inner.line(), column: inner.column(), message: inner.to_string() }]
        } else {
            vec![ConfigError::Schema { path, message: inner.to_string() }]
        }
    })?;
    config.validate().map_err(|e| vec![e])?;
    Ok(config)
}

fn inconsistent(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Inconsistent(e.to_string())
}

fn missing(what: &str) -> ConfigError {
    ConfigError::Inconsistent(format!("{what} is required for this experiment kind"))
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn fifty() -> usize {
    50
}
fn ten_thousand() -> usize {
    10_000
}
fn three() -> f64 {
    3.0
}
fn five() -> f64 {
    5.0
}
fn tiny() -> f64 {
    1e-9
}
fn one_percent() -> f64 {
    0.01
}
fn finite() -> HorizonKind {
    HorizonKind::Finite {}
}
fn trapezoid() -> Quadrature {
    Quadrature::Trapezoid
}
fn oracle_target() -> OracleTolerance {
    OracleTolerance { rel_tol: one_percent(), k_se: three(), abs_tol: 0.0 }
}
fn unit_integrand() -> Vec<MarkFn> {
    vec![MarkFn::constant(1.0)]
}
fn default_box() -> SampleBox {
    SampleBox::new([0.0, 1.0], [-5.0, 5.0], [-5.0, 5.0], [-5.0, 5.0])
}
