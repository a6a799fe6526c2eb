//! Closed-form building blocks: functions of time, functions of `(t, e)` and
//! moduli of continuity.

use serde::{Deserialize, Serialize};

/// A deterministic function of time with closed-form integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFn {
    Constant { value: f64 },
    /// `a · e^{-b t}`
    ExpDecay { a: f64, b: f64 },
    /// `a · (1 + t)^{-p}`
    PowerDecay { a: f64, p: f64 },
    /// `values[i]` on `[breaks[i-1], breaks[i])`, with `breaks` increasing and
    /// one more value than breaks.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

impl TimeFn {
    pub fn constant(value: f64) -> Self {
        TimeFn::Constant { value }
    }

    pub fn zero() -> Self {
        TimeFn::Constant { value: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant { value } => *value,
            TimeFn::ExpDecay { a, b } => a * (-b * t).exp(),
            TimeFn::PowerDecay { a, p } => a * (1.0 + t).powf(-p),
            TimeFn::Piecewise { breaks, values } => {
                let i = breaks.partition_point(|&b| b <= t);
                values[i]
            }
        }
    }

    pub fn check(&self) -> Result<(), String> {
        match self {
            TimeFn::Constant { value } if !value.is_finite() => Err("constant must be finite".into()),
            TimeFn::ExpDecay { a, b } if !(a.is_finite() && b.is_finite()) => Err("exp_decay parameters must be finite".into()),
            TimeFn::PowerDecay { a, p } if !(a.is_finite() && p.is_finite()) => {
                Err("power_decay parameters must be finite".into())
            }
            TimeFn::Piecewise { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(format!("piecewise needs {} values for {} breaks", breaks.len() + 1, breaks.len()));
                }
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("piecewise breaks must be strictly increasing".into());
                }
                if breaks.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err("piecewise entries must be finite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `∫_from^to f(s)^power ds` for `power ∈ {1, 2}`, in closed form.
    /// `to` may be `f64::INFINITY`; divergent integrals return `+∞`
    /// (or `-∞` for a negative integrand with `power = 1`).
    pub fn integral_pow(&self, from: f64, to: f64, power: i32) -> f64 {
        debug_assert!(power == 1 || power == 2);
        if to <= from {
            return 0.0;
        }
        match self {
            TimeFn::Constant { value } => {
                let c = value.powi(power);
                if c == 0.0 {
                    0.0
                } else {
                    c * (to - from)
                }
            }
            TimeFn::ExpDecay { a, b } => {
                let (a, b) = (a.powi(power), b * power as f64);
                if a == 0.0 {
                    0.0
                } else if b == 0.0 {
                    a * (to - from)
                } else if to.is_infinite() {
                    if b > 0.0 {
                        a / b * (-b * from).exp()
                    } else {
                        a * f64::INFINITY
                    }
                } else {
                    a / b * ((-b * from).exp() - (-b * to).exp())
                }
            }
            TimeFn::PowerDecay { a, p } => {
                let (a, p) = (a.powi(power), p * power as f64);
                if a == 0.0 {
                    0.0
                } else if (p - 1.0).abs() < 1e-15 {
                    a * ((1.0 + to) / (1.0 + from)).ln()
                } else if to.is_infinite() {
                    if p > 1.0 {
                        a * (1.0 + from).powf(1.0 - p) / (p - 1.0)
                    } else {
                        a * f64::INFINITY
                    }
                } else {
                    a * ((1.0 + to).powf(1.0 - p) - (1.0 + from).powf(1.0 - p)) / (1.0 - p)
                }
            }
            TimeFn::Piecewise { breaks, values } => {
                let mut total = 0.0;
                let mut lo = f64::NEG_INFINITY;
                for (i, v) in values.iter().enumerate() {
                    let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY);
                    let (s, e) = (lo.max(from), hi.min(to));
                    if e > s {
                        let c = v.powi(power);
                        if c != 0.0 {
                            total += c * (e - s);
                        }
                    }
                    lo = hi;
                }
                total
            }
        }
    }

    /// `sup |f|` over `[from, to]`, exact for the monotone families and the
    /// step tables.
    pub fn sup_abs(&self, from: f64, to: f64) -> f64 {
        match self {
            TimeFn::Constant { value } => value.abs(),
            TimeFn::ExpDecay { .. } | TimeFn::PowerDecay { .. } => self.eval(from).abs().max(self.eval(to).abs()),
            TimeFn::Piecewise { breaks, values } => {
                let mut lo = f64::NEG_INFINITY;
                let mut sup: f64 = 0.0;
                for (i, v) in values.iter().enumerate() {
                    let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY);
                    if hi > from && lo <= to {
                        sup = sup.max(v.abs());
                    }
                    lo = hi;
                }
                sup
            }
        }
    }

    /// Infimum over `[from, to]`.
    pub fn inf(&self, from: f64, to: f64) -> f64 {
        match self {
            TimeFn::Constant { value } => *value,
            TimeFn::ExpDecay { .. } | TimeFn::PowerDecay { .. } => {
                let end = if to.is_finite() { self.eval(to) } else { 0.0 };
                self.eval(from).min(end)
            }
            TimeFn::Piecewise { breaks, values } => {
                let mut lo = f64::NEG_INFINITY;
                let mut m = f64::INFINITY;
                for (i, v) in values.iter().enumerate() {
                    let hi = breaks.get(i).copied().unwrap_or(f64::INFINITY);
                    if hi > from && lo <= to {
                        m = m.min(*v);
                    }
                    lo = hi;
                }
                m
            }
        }
    }
}

/// A deterministic function of `(t, e)` on a finite mark set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkFn {
    Constant { value: f64 },
    /// `scale · (1 ∧ |e|)`
    Truncated { scale: f64 },
    /// One value per mark index.
    PerMark { values: Vec<f64> },
}

impl MarkFn {
    pub fn constant(value: f64) -> Self {
        MarkFn::Constant { value }
    }

    pub fn eval(&self, _t: f64, mark_index: usize, mark: f64) -> f64 {
        match self {
            MarkFn::Constant { value } => *value,
            MarkFn::Truncated { scale } => scale * mark.abs().min(1.0),
            MarkFn::PerMark { values } => values[mark_index],
        }
    }

    pub fn check(&self, n_marks: usize) -> Result<(), String> {
        match self {
            MarkFn::PerMark { values } if values.len() != n_marks => {
                Err(format!("per_mark table has {} entries for {} marks", values.len(), n_marks))
            }
            MarkFn::PerMark { values } if values.iter().any(|v| !v.is_finite()) => Err("per_mark values must be finite".into()),
            MarkFn::Constant { value } | MarkFn::Truncated { scale: value } if !value.is_finite() => {
                Err("mark function parameter must be finite".into())
            }
            _ => Ok(()),
        }
    }
}

/// Modulus of continuity from the whitelisted closed forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Modulus {
    /// `scale · x`
    Linear { scale: f64 },
    /// `scale · x ln(1/x)` on `(0, e^{-2}]`, continued by its tangent
    /// `scale · (x + e^{-2})` beyond.
    XLogInv { scale: f64 },
    /// `scale · x^exponent` with `0 < exponent ≤ 1`.
    Power { scale: f64, exponent: f64 },
    /// `min(inner(x), cap)`
    Capped { inner: Box<Modulus>, cap: f64 },
}

const XLOG_KNEE: f64 = 0.1353352832366127; // e^{-2}

impl Modulus {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            Modulus::Linear { scale } => scale * x,
            Modulus::XLogInv { scale } => {
                if x == 0.0 {
                    0.0
                } else if x <= XLOG_KNEE {
                    scale * x * (1.0 / x).ln()
                } else {
                    scale * (x + XLOG_KNEE)
                }
            }
            Modulus::Power { scale, exponent } => scale * x.powf(*exponent),
            Modulus::Capped { inner, cap } => inner.eval(x).min(*cap),
        }
    }

    /// Membership in the class of continuous nondecreasing functions vanishing
    /// only at zero (checked on the parameters of the closed form).
    pub fn in_class_s(&self) -> bool {
        match self {
            Modulus::Linear { scale } | Modulus::XLogInv { scale } => *scale > 0.0,
            Modulus::Power { scale, exponent } => *scale > 0.0 && *exponent > 0.0,
            Modulus::Capped { inner, cap } => *cap > 0.0 && inner.in_class_s(),
        }
    }

    pub fn is_concave(&self) -> bool {
        match self {
            Modulus::Linear { .. } | Modulus::XLogInv { .. } => true,
            Modulus::Power { exponent, .. } => *exponent <= 1.0,
            Modulus::Capped { inner, .. } => inner.is_concave(),
        }
    }

    /// `∫_{0+} dr / ϱ(r) = ∞`, decided from the form's behaviour at zero.
    pub fn is_osgood(&self) -> bool {
        match self {
            Modulus::Linear { .. } | Modulus::XLogInv { .. } => true,
            Modulus::Power { exponent, .. } => *exponent >= 1.0,
            Modulus::Capped { inner, .. } => inner.is_osgood(),
        }
    }
}
