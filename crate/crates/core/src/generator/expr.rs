//! Expression trees for drivers.
//!
//! Trees are plain serde data (`{"op": "add", "args": [...]}`), evaluated
//! against an [`EvalContext`] holding the point `(t, y, z, u)` together with
//! the mark space and declared coefficient functions.

use serde::{Deserialize, Serialize};

use super::functions::{MarkFn, TimeFn};
use super::{CoefficientFns, JumpKernel};
use crate::noise::MarkSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefName {
    Gamma,
    Rho,
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    Const {
        value: f64,
    },
    T {},
    Y {},
    Z {
        #[serde(default)]
        index: usize,
    },
    U {
        #[serde(default)]
        index: usize,
    },
    /// `∫ u dλ`
    UIntegral {},
    /// `∫ |u|² dλ`
    USquareIntegral {},
    /// `∫ u β_t dλ` with the declared jump kernel's `β`.
    UKernelIntegral {},
    /// `∫ u w(t, ·) dλ`
    UWeightedIntegral {
        weight: MarkFn,
    },
    /// `constant + y_coef·y + Σ z_coef_j z_j + Σ u_coef_i u_i + u_integral·∫u dλ`
    Affine {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        z: Vec<f64>,
        #[serde(default)]
        u: Vec<f64>,
        #[serde(default)]
        u_integral: f64,
    },
    Add {
        args: Vec<Expr>,
    },
    Mul {
        args: Vec<Expr>,
    },
    Sub {
        left: Box<Expr>,
        right: Box<Expr>,
    },
    Neg {
        arg: Box<Expr>,
    },
    Abs {
        arg: Box<Expr>,
    },
    Min {
        args: Vec<Expr>,
    },
    Max {
        args: Vec<Expr>,
    },
    Clamp {
        arg: Box<Expr>,
        lo: f64,
        hi: f64,
    },
    Sin {
        arg: Box<Expr>,
    },
    Cos {
        arg: Box<Expr>,
    },
    /// `sqrt(|arg|)`
    SqrtAbs {
        arg: Box<Expr>,
    },
    /// Value at `t` of a declared coefficient function.
    Coef {
        name: CoefName,
    },
    /// Value at `t` of an inline function of time.
    TimeFn {
        #[serde(rename = "fn")]
        func: TimeFn,
    },
}

/// Point and environment for one evaluation.
pub struct EvalContext<'a> {
    pub t: f64,
    pub y: f64,
    pub z: &'a [f64],
    pub u: &'a [f64],
    pub marks: &'a MarkSpace,
    pub coeffs: &'a CoefficientFns,
    pub kernel: Option<&'a JumpKernel>,
}

/// Which coordinates an expression reads.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Usage {
    pub y: bool,
    pub z: Vec<usize>,
    pub u: Vec<usize>,
    pub all_u: bool,
    pub kernel: bool,
}

impl Usage {
    pub fn uses_z(&self, j: usize) -> bool {
        self.z.contains(&j)
    }

    pub fn uses_u(&self, i: usize) -> bool {
        self.all_u || self.u.contains(&i)
    }
}

fn fold(args: &[Expr], ctx: &EvalContext, init: f64, op: impl Fn(f64, f64) -> f64) -> f64 {
    args.iter().fold(init, |acc, e| op(acc, e.eval(ctx)))
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    pub fn eval(&self, ctx: &EvalContext) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::T {} => ctx.t,
            Expr::Y {} => ctx.y,
            Expr::Z { index } => ctx.z[*index],
            Expr::U { index } => ctx.u[*index],
            Expr::UIntegral {} => ctx.marks.integral(ctx.u),
            Expr::USquareIntegral {} => ctx.marks.square_integral(ctx.u),
            Expr::UKernelIntegral {} => {
                let kernel = ctx.kernel.expect("kernel presence checked when binding");
                weighted_integral(&kernel.beta, ctx)
            }
            Expr::UWeightedIntegral { weight } => weighted_integral(weight, ctx),
            Expr::Affine { constant, y, z, u, u_integral } => {
                let mut v = constant + y * ctx.y;
                v += z.iter().zip(ctx.z).map(|(a, b)| a * b).sum::<f64>();
                v += u.iter().zip(ctx.u).map(|(a, b)| a * b).sum::<f64>();
                if *u_integral != 0.0 {
                    v += u_integral * ctx.marks.integral(ctx.u);
                }
                v
            }
            Expr::Add { args } => fold(args, ctx, 0.0, |a, b| a + b),
            Expr::Mul { args } => fold(args, ctx, 1.0, |a, b| a * b),
            Expr::Sub { left, right } => left.eval(ctx) - right.eval(ctx),
            Expr::Neg { arg } => -arg.eval(ctx),
            Expr::Abs { arg } => arg.eval(ctx).abs(),
            Expr::Min { args } => fold(args, ctx, f64::INFINITY, f64::min),
            Expr::Max { args } => fold(args, ctx, f64::NEG_INFINITY, f64::max),
            Expr::Clamp { arg, lo, hi } => arg.eval(ctx).max(*lo).min(*hi),
            Expr::Sin { arg } => arg.eval(ctx).sin(),
            Expr::Cos { arg } => arg.eval(ctx).cos(),
            Expr::SqrtAbs { arg } => arg.eval(ctx).abs().sqrt(),
            Expr::Coef { name } => match name {
                CoefName::Gamma => ctx.coeffs.gamma.eval(ctx.t),
                CoefName::Rho => ctx.coeffs.rho.eval(ctx.t),
                CoefName::Sigma => ctx.coeffs.sigma.eval(ctx.t),
            },
            Expr::TimeFn { func } => func.eval(ctx.t),
        }
    }

    pub fn usage(&self) -> Usage {
        let mut u = Usage::default();
        self.collect_usage(&mut u);
        u.z.sort_unstable();
        u.z.dedup();
        u.u.sort_unstable();
        u.u.dedup();
        u
    }

    fn collect_usage(&self, acc: &mut Usage) {
        match self {
            Expr::Y {} => acc.y = true,
            Expr::Z { index } => acc.z.push(*index),
            Expr::U { index } => acc.u.push(*index),
            Expr::UIntegral {} | Expr::USquareIntegral {} | Expr::UWeightedIntegral { .. } => acc.all_u = true,
            Expr::UKernelIntegral {} => {
                acc.all_u = true;
                acc.kernel = true;
            }
            Expr::Affine { y, z, u, u_integral, .. } => {
                if *y != 0.0 {
                    acc.y = true;
                }
                acc.z.extend(z.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, _)| j));
                acc.u.extend(u.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, _)| i));
                if *u_integral != 0.0 {
                    acc.all_u = true;
                }
            }
            Expr::Add { args } | Expr::Mul { args } | Expr::Min { args } | Expr::Max { args } => {
                args.iter().for_each(|a| a.collect_usage(acc))
            }
            Expr::Sub { left, right } => {
                left.collect_usage(acc);
                right.collect_usage(acc);
            }
            Expr::Neg { arg }
            | Expr::Abs { arg }
            | Expr::Clamp { arg, .. }
            | Expr::Sin { arg }
            | Expr::Cos { arg }
            | Expr::SqrtAbs { arg } => arg.collect_usage(acc),
            Expr::Const { .. } | Expr::T {} | Expr::Coef { .. } | Expr::TimeFn { .. } => {}
        }
    }

    /// Structural checks that do not depend on dimensions.
    pub(crate) fn check(&self, n_marks: usize) -> Result<(), String> {
        match self {
            Expr::Const { value } if !value.is_finite() => Err("constant must be finite".into()),
            Expr::Clamp { lo, hi, arg } => {
                if !(lo <= hi) {
                    return Err(format!("clamp bounds reversed: [{lo}, {hi}]"));
                }
                arg.check(n_marks)
            }
            Expr::Sub { left, right } => {
                left.check(n_marks)?;
                right.check(n_marks)
            }
            Expr::Min { args } | Expr::Max { args } if args.is_empty() => Err("min/max need at least one argument".into()),
            Expr::Add { args } | Expr::Mul { args } | Expr::Min { args } | Expr::Max { args } => {
                args.iter().try_for_each(|a| a.check(n_marks))
            }
            Expr::Neg { arg } | Expr::Abs { arg } | Expr::Sin { arg } | Expr::Cos { arg } | Expr::SqrtAbs { arg } => {
                arg.check(n_marks)
            }
            Expr::TimeFn { func } => func.check(),
            Expr::UWeightedIntegral { weight } => weight.check(n_marks),
            _ => Ok(()),
        }
    }
}

fn weighted_integral(w: &MarkFn, ctx: &EvalContext) -> f64 {
    ctx.u
        .iter()
        .enumerate()
        .map(|(i, u)| u * w.eval(ctx.t, i, ctx.marks.mark(i)) * ctx.marks.intensity(i))
        .sum()
}

/// Shorthands for building trees in code.
pub mod build {
    use super::*;

    pub fn c(value: f64) -> Expr {
        Expr::Const { value }
    }

    pub fn y() -> Expr {
        Expr::Y {}
    }

    pub fn z(index: usize) -> Expr {
        Expr::Z { index }
    }

    pub fn u(index: usize) -> Expr {
        Expr::U { index }
    }

    pub fn add(args: Vec<Expr>) -> Expr {
        Expr::Add { args }
    }

    pub fn mul(args: Vec<Expr>) -> Expr {
        Expr::Mul { args }
    }

    pub fn sub(left: Expr, right: Expr) -> Expr {
        Expr::Sub { left: Box::new(left), right: Box::new(right) }
    }

    pub fn neg(arg: Expr) -> Expr {
        Expr::Neg { arg: Box::new(arg) }
    }

    pub fn abs(arg: Expr) -> Expr {
        Expr::Abs { arg: Box::new(arg) }
    }

    pub fn sin(arg: Expr) -> Expr {
        Expr::Sin { arg: Box::new(arg) }
    }

    pub fn sqrt_abs(arg: Expr) -> Expr {
        Expr::SqrtAbs { arg: Box::new(arg) }
    }

    pub fn min(args: Vec<Expr>) -> Expr {
        Expr::Min { args }
    }

    pub fn time_fn(func: TimeFn) -> Expr {
        Expr::TimeFn { func }
    }
}
