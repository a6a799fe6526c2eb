//! Drivers `f(t, y, z, u)` of the backward equation.
//!
//! A [`GeneratorSpec`] is serde data: an expression tree plus the declared
//! coefficient functions (γ, ρ, σ), optional jump kernel β, growth process
//! `f_t`, moduli ϱ and φ, and the assumption class the driver is claimed to
//! satisfy. Binding a spec to a mark space and a Brownian dimension yields a
//! [`Generator`], which checks arity once and then evaluates without further
//! checks through the [`Driver`] trait.

pub mod expr;
pub mod functions;
pub mod infconv;
pub mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::noise::{MarkSpace, TimeGrid};
pub use expr::{CoefName, EvalContext, Expr, Usage};
pub use functions::{MarkFn, Modulus, TimeFn};

/// Anything that can be evaluated as a driver at a point.
pub trait Driver: Sync {
    fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64;
}

impl<F> Driver for F
where
    F: Fn(f64, f64, &[f64], &[f64]) -> f64 + Sync,
{
    fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        self(t, y, z, u)
    }
}

/// Declared Lipschitz / growth coefficients γ, ρ, σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientFns {
    #[serde(default = "TimeFn::zero")]
    pub gamma: TimeFn,
    #[serde(default = "TimeFn::zero")]
    pub rho: TimeFn,
    #[serde(default = "TimeFn::zero")]
    pub sigma: TimeFn,
}

impl Default for CoefficientFns {
    fn default() -> Self {
        Self { gamma: TimeFn::zero(), rho: TimeFn::zero(), sigma: TimeFn::zero() }
    }
}

impl CoefficientFns {
    pub fn constant(gamma: f64, rho: f64, sigma: f64) -> Self {
        Self { gamma: TimeFn::constant(gamma), rho: TimeFn::constant(rho), sigma: TimeFn::constant(sigma) }
    }

    /// `∫_from^to (γ + ρ² + σ²) ds`.
    pub fn integrability(&self, from: f64, to: f64) -> f64 {
        self.gamma.integral_pow(from, to, 1) + self.rho.integral_pow(from, to, 2) + self.sigma.integral_pow(from, to, 2)
    }

    /// (A4): the integral over `[0, horizon]` (`horizon` may be `∞`) is finite.
    pub fn check_integrability(&self, horizon: f64) -> Result<f64> {
        let value = self.integrability(0.0, horizon);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::Integrability { range: format!("[0, {horizon}]"), value })
        }
    }

    /// Nonnegativity on `[0, horizon]`.
    pub fn check_nonnegative(&self, horizon: f64) -> Result<()> {
        for (name, f) in [("gamma", &self.gamma), ("rho", &self.rho), ("sigma", &self.sigma)] {
            f.check().map_err(|e| Error::Coefficient(format!("{name}: {e}")))?;
            let inf = f.inf(0.0, horizon);
            if inf < 0.0 {
                return Err(Error::Coefficient(format!("{name} takes the negative value {inf} on [0, {horizon}]")));
            }
        }
        Ok(())
    }

    /// `max(γ, ρ, σ)(t)`.
    pub fn max_at(&self, t: f64) -> f64 {
        self.gamma.eval(t).max(self.rho.eval(t)).max(self.sigma.eval(t))
    }
}

/// Jump kernel β with `c(1 ∧ |e|) ≤ β_t(e) ≤ C(1 ∧ |e|)` and `-1 < c ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpKernel {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub beta: MarkFn,
}

impl JumpKernel {
    /// Checks the constants and the two-sided bound at every grid node and mark.
    pub fn validate(&self, grid: &TimeGrid, marks: &MarkSpace) -> Result<()> {
        if !(self.c > -1.0 && self.c <= 0.0) {
            return Err(Error::Kernel(format!("c = {} outside (-1, 0]", self.c)));
        }
        if !(self.big_c > 0.0) {
            return Err(Error::Kernel(format!("C = {} must be positive", self.big_c)));
        }
        self.beta.check(marks.len()).map_err(Error::Kernel)?;
        for t in grid.nodes() {
            for (i, &e) in marks.marks().iter().enumerate() {
                let b = self.beta.eval(t, i, e);
                let trunc = e.abs().min(1.0);
                if b < self.c * trunc - 1e-12 || b > self.big_c * trunc + 1e-12 {
                    return Err(Error::Kernel(format!(
                        "beta({t}, {e}) = {b} outside [{}, {}]",
                        self.c * trunc,
                        self.big_c * trunc
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Declared moduli for the weak-monotonicity / uniform-continuity classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moduli {
    /// ϱ, with `ϱ(x) ≤ k(x + 1)`.
    pub varrho: Modulus,
    pub k: f64,
    /// φ, with `φ(x) ≤ a x + b`.
    pub phi: Modulus,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AssumptionClass {
    /// Lipschitz in `(y, z)`, one-sided kernel bound in `u`: (A1)–(A4).
    #[default]
    A,
    /// Continuous with linear growth: (H1).
    H1,
    /// Weakly monotone in `y`, uniformly continuous in `z`: (H2).
    H2,
    /// Moduli of continuity in `(y, z)`: (H3).
    H3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub expr: Expr,
    #[serde(default)]
    pub coeffs: CoefficientFns,
    #[serde(default)]
    pub kernel: Option<JumpKernel>,
    #[serde(default)]
    pub class: AssumptionClass,
    /// Deterministic growth process `f_t` of (H1.2).
    #[serde(default)]
    pub growth: Option<TimeFn>,
    #[serde(default)]
    pub moduli: Option<Moduli>,
}

impl GeneratorSpec {
    pub fn new(expr: Expr) -> Self {
        Self { expr, coeffs: CoefficientFns::default(), kernel: None, class: AssumptionClass::A, growth: None, moduli: None }
    }

    pub fn with_coeffs(mut self, coeffs: CoefficientFns) -> Self {
        self.coeffs = coeffs;
        self
    }

    pub fn with_kernel(mut self, kernel: JumpKernel) -> Self {
        self.kernel = Some(kernel);
        self
    }

    pub fn with_class(mut self, class: AssumptionClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_growth(mut self, growth: TimeFn) -> Self {
        self.growth = Some(growth);
        self
    }

    pub fn with_moduli(mut self, moduli: Moduli) -> Self {
        self.moduli = Some(moduli);
        self
    }

    /// Binds the spec to a mark space and a Brownian dimension.
    pub fn bind(self, marks: &MarkSpace, dim: usize) -> Result<Generator> {
        Generator::new(self, marks.clone(), dim)
    }
}

/// A [`GeneratorSpec`] bound to a mark space and Brownian dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    spec: GeneratorSpec,
    marks: MarkSpace,
    dim: usize,
    usage: Usage,
}

impl Generator {
    pub fn new(spec: GeneratorSpec, marks: MarkSpace, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("Brownian dimension must be at least 1".into()));
        }
        spec.expr.check(marks.len()).map_err(Error::InvalidArgument)?;
        let usage = spec.expr.usage();
        if let Some(&j) = usage.z.last() {
            if j >= dim {
                return Err(Error::Arity { what: format!("z[{j}]"), available: dim });
            }
        }
        if let Some(&i) = usage.u.last() {
            if i >= marks.len() {
                return Err(Error::Arity { what: format!("u[{i}]"), available: marks.len() });
            }
        }
        if let Expr::Affine { z, u, .. } = &spec.expr {
            if z.len() > dim || u.len() > marks.len() {
                return Err(Error::Arity { what: "affine coefficient vector".into(), available: dim.max(marks.len()) });
            }
        }
        if usage.kernel && spec.kernel.is_none() {
            return Err(Error::InvalidArgument("expression uses the jump kernel but none is declared".into()));
        }
        if let Some(k) = &spec.kernel {
            k.beta.check(marks.len()).map_err(Error::Kernel)?;
        }
        if let Some(g) = &spec.growth {
            g.check().map_err(|e| Error::Coefficient(format!("growth: {e}")))?;
        }
        if let Some(m) = &spec.moduli {
            if !(m.varrho.in_class_s() && m.phi.in_class_s()) {
                return Err(Error::InvalidArgument("moduli must be nondecreasing, zero only at zero".into()));
            }
            if matches!(spec.class, AssumptionClass::H2 | AssumptionClass::H3) && !m.varrho.is_concave() {
                return Err(Error::InvalidArgument("varrho must be concave for the H2/H3 classes".into()));
            }
        } else if matches!(spec.class, AssumptionClass::H2 | AssumptionClass::H3) {
            return Err(Error::InvalidArgument("H2/H3 generators must declare moduli".into()));
        }
        Ok(Self { spec, marks, dim, usage })
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn marks(&self) -> &MarkSpace {
        &self.marks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn usage(&self) -> &Usage {
        &self.usage
    }

    pub fn coeffs(&self) -> &CoefficientFns {
        &self.spec.coeffs
    }

    #[inline]
    pub fn eval_unchecked(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        let ctx = EvalContext {
            t,
            y,
            z,
            u,
            marks: &self.marks,
            coeffs: &self.spec.coeffs,
            kernel: self.spec.kernel.as_ref(),
        };
        self.spec.expr.eval(&ctx)
    }

    /// `f_t + γ|y| + ρ|z| + σ‖u‖`, if a growth process is declared.
    pub fn growth_bound(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> Option<f64> {
        let ft = self.spec.growth.as_ref()?.eval(t);
        let c = &self.spec.coeffs;
        Some(ft + c.gamma.eval(t) * y.abs() + c.rho.eval(t) * euclid(z) + c.sigma.eval(t) * self.marks.l2_norm(u))
    }
}

impl Driver for Generator {
    #[inline]
    fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        self.eval_unchecked(t, y, z, u)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Evaluates the driver at one point, rejecting non-finite or mis-sized input.
pub fn eval_generator(generator: &Generator, t: f64, y: f64, z: &[f64], u: &[f64]) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("y", y)?;
    if z.len() != generator.dim || u.len() != generator.n_marks() {
        return Err(Error::InvalidArgument(format!(
            "expected z of length {} and u of length {}",
            generator.dim,
            generator.n_marks()
        )));
    }
    for &v in z {
        ensure_finite("z", v)?;
    }
    for &v in u {
        ensure_finite("u", v)?;
    }
    Ok(generator.eval_unchecked(t, y, z, u))
}

#[cfg(test)]
mod tests {
    use super::expr::build::*;
    use super::*;

    #[test]
    fn affine_evaluation() {
        let marks = MarkSpace::single(1.0, 1.0).unwrap();
        let spec = GeneratorSpec::new(add(vec![mul(vec![c(2.0), y()]), z(0), Expr::UIntegral {}]));
        let g = spec.bind(&marks, 1).unwrap();
        assert_eq!(eval_generator(&g, 0.0, 1.0, &[1.0], &[1.0]).unwrap(), 4.0);
        let aff = GeneratorSpec::new(Expr::Affine { constant: 0.0, y: 2.0, z: vec![1.0], u: vec![], u_integral: 1.0 })
            .bind(&marks, 1)
            .unwrap();
        assert_eq!(eval_generator(&aff, 0.0, 1.0, &[1.0], &[1.0]).unwrap(), 4.0);
    }

    #[test]
    fn abs_and_decay() {
        let g = GeneratorSpec::new(abs(y())).bind(&MarkSpace::empty(), 1).unwrap();
        assert_eq!(eval_generator(&g, 0.0, -3.0, &[0.0], &[]).unwrap(), 3.0);
        let decay = GeneratorSpec::new(mul(vec![time_fn(TimeFn::ExpDecay { a: 1.0, b: 1.0 }), sub(c(1.0), y())]))
            .bind(&MarkSpace::empty(), 1)
            .unwrap();
        assert_eq!(eval_generator(&decay, 0.0, 0.0, &[0.0], &[]).unwrap(), 1.0);
    }

    #[test]
    fn rejects_non_finite_and_arity() {
        let g = GeneratorSpec::new(y()).bind(&MarkSpace::empty(), 1).unwrap();
        assert!(matches!(eval_generator(&g, 0.0, f64::NAN, &[0.0], &[]), Err(Error::NonFinite { .. })));
        assert!(eval_generator(&g, 0.0, 1.0, &[0.0, 1.0], &[]).is_err());
        let two = MarkSpace::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(GeneratorSpec::new(u(2)).bind(&two, 1), Err(Error::Arity { .. })));
        assert!(matches!(GeneratorSpec::new(z(1)).bind(&two, 1), Err(Error::Arity { .. })));
        assert!(GeneratorSpec::new(Expr::UKernelIntegral {}).bind(&two, 1).is_err());
    }

    #[test]
    fn json_roundtrip_of_nested_tree() {
        let text = r#"{
            "expr": {"op": "mul", "args": [
                {"op": "time_fn", "fn": {"kind": "exp_decay", "a": 1.0, "b": 1.0}},
                {"op": "sub", "left": {"op": "const", "value": 1.0}, "right": {"op": "y"}}
            ]},
            "coeffs": {"gamma": {"kind": "exp_decay", "a": 1.0, "b": 1.0}}
        }"#;
        let spec: GeneratorSpec = serde_json::from_str(text).unwrap();
        assert_eq!(spec.coeffs.rho, TimeFn::zero());
        let back: GeneratorSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let bad = r#"{"expr": {"op": "y", "extra": 1}}"#;
        assert!(serde_json::from_str::<GeneratorSpec>(bad).is_err());
    }

    #[test]
    fn integrability_finite_and_infinite() {
        let c = CoefficientFns { gamma: TimeFn::ExpDecay { a: 1.0, b: 1.0 }, ..Default::default() };
        assert!((c.check_integrability(f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        let bad = CoefficientFns::constant(1.0, 0.0, 0.0);
        assert!(bad.check_integrability(5.0).is_ok());
        assert!(matches!(bad.check_integrability(f64::INFINITY), Err(Error::Integrability { .. })));
        let neg = CoefficientFns::constant(-1.0, 0.0, 0.0);
        assert!(neg.check_nonnegative(1.0).is_err());
    }

    #[test]
    fn kernel_bounds() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let marks = MarkSpace::new(vec![0.5, 2.0], vec![1.0, 1.0]).unwrap();
        let ok = JumpKernel { c: 0.0, big_c: 1.0, beta: MarkFn::Truncated { scale: 1.0 } };
        assert!(ok.validate(&grid, &marks).is_ok());
        let too_big = JumpKernel { c: 0.0, big_c: 0.5, beta: MarkFn::constant(0.6) };
        assert!(too_big.validate(&grid, &marks).is_err());
        let bad_c = JumpKernel { c: -1.0, big_c: 1.0, beta: MarkFn::constant(0.0) };
        assert!(bad_c.validate(&grid, &marks).is_err());
    }
}
