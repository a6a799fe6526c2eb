//! Sampling validators for the structural assumptions on a driver.
//!
//! Each validator draws points (or pairs of points) from a [`SampleBox`] and
//! checks one inequality. A FAIL carries a concrete witness that can be
//! re-evaluated with [`eval_generator`](super::eval_generator); a PASS only
//! says no violation was found within the sample budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AssumptionClass, Generator, Modulus};
use crate::error::{Error, Result};

/// Axis-aligned sampling region; every `z` and `u` component shares its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBox {
    pub t: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub u: [f64; 2],
}

impl SampleBox {
    pub fn new(t: [f64; 2], y: [f64; 2], z: [f64; 2], u: [f64; 2]) -> Self {
        Self { t, y, z, u }
    }

    fn check(&self, n_marks: usize) -> Result<()> {
        let mut axes = vec![("t", self.t), ("y", self.y), ("z", self.z)];
        if n_marks > 0 {
            axes.push(("u", self.u));
        }
        for (name, [lo, hi]) in axes {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidArgument(format!("degenerate sample box: {name} range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationOptions {
    pub budget: usize,
    pub seed: u64,
    pub rel_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { budget: 20_000, seed: 0x5eed, rel_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub y: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

/// A pair (or single point) at which the checked inequality `lhs ≤ rhs` failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub first: SamplePoint,
    pub second: Option<SamplePoint>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: String,
    pub verdict: Verdict,
    /// Largest normalised violation statistic seen (a ratio for the
    /// continuity checks, an excess `lhs - rhs` for one-sided checks).
    pub worst: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
}

impl ValidationReport {
    fn symbolic(check: &str, ok: bool, worst: f64) -> Self {
        Self {
            check: check.into(),
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            worst,
            samples: 0,
            witness: None,
        }
    }
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    bx: &'a SampleBox,
    dim: usize,
    n_marks: usize,
}

impl<'a> Sampler<'a> {
    fn new(bx: &'a SampleBox, gen: &Generator, seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), bx, dim: gen.dim(), n_marks: gen.n_marks() }
    }

    fn uniform(&mut self, [lo, hi]: [f64; 2]) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    fn point(&mut self) -> SamplePoint {
        let (bz, bu) = (self.bx.z, self.bx.u);
        SamplePoint {
            t: self.uniform(self.bx.t),
            y: self.uniform(self.bx.y),
            z: (0..self.dim).map(|_| self.uniform(bz)).collect(),
            u: (0..self.n_marks).map(|_| self.uniform(bu)).collect(),
        }
    }

    /// A second coordinate: uniform for even `i`, a local perturbation with
    /// log-uniform scale for odd `i` (clamped to the box).
    fn partner(&mut self, x: f64, [lo, hi]: [f64; 2], i: usize) -> f64 {
        if i.is_multiple_of(2) {
            self.uniform([lo, hi])
        } else {
            let scale = (hi - lo) * 10f64.powf(-4.0 * self.rng.random::<f64>());
            (x + scale * (2.0 * self.rng.random::<f64>() - 1.0)).clamp(lo, hi)
        }
    }
}

/// Uniform points in `bx` from a seeded stream.
pub fn sample_points(bx: &SampleBox, dim: usize, n_marks: usize, count: usize, seed: u64) -> Result<Vec<SamplePoint>> {
    bx.check(n_marks)?;
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), bx, dim, n_marks };
    Ok((0..count).map(|_| s.point()).collect())
}

fn eval(gen: &Generator, p: &SamplePoint) -> f64 {
    gen.eval_unchecked(p.t, p.y, &p.z, &p.u)
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Running maximum of a violation statistic with its witness.
struct Tracker {
    check: String,
    worst: f64,
    witness: Option<Witness>,
    failed: bool,
    samples: usize,
}

impl Tracker {
    fn new(check: &str) -> Self {
        Self { check: check.into(), worst: f64::NEG_INFINITY, witness: None, failed: false, samples: 0 }
    }

    fn record(&mut self, stat: f64, violated: bool, witness: impl FnOnce() -> Witness) {
        self.samples += 1;
        // violations always take precedence over non-violating larger stats
        let better = if violated != self.failed { violated } else { stat > self.worst };
        if better {
            self.worst = stat;
            if violated {
                self.witness = Some(witness());
            }
        }
        self.failed |= violated;
    }

    fn finish(self) -> ValidationReport {
        ValidationReport {
            check: self.check,
            verdict: if self.failed { Verdict::Fail } else { Verdict::Pass },
            worst: if self.samples == 0 { 0.0 } else { self.worst },
            samples: self.samples,
            witness: self.witness,
        }
    }
}

/// `|f(t,y,z,u) − f(t,y',z',u)| ≤ γ(t) ϱ(|y−y'|) + ρ(t) φ(|z−z'|)`.
pub fn validate_continuity(
    gen: &Generator,
    varrho: &Modulus,
    phi: &Modulus,
    check: &str,
    bx: &SampleBox,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    bx.check(gen.n_marks())?;
    ensure_budget(opts)?;
    let mut s = Sampler::new(bx, gen, opts.seed);
    let mut tr = Tracker::new(check);
    let c = gen.coeffs();
    for i in 0..opts.budget {
        let a = s.point();
        let mut b = a.clone();
        b.y = s.partner(a.y, bx.y, i);
        for j in 0..b.z.len() {
            b.z[j] = s.partner(a.z[j], bx.z, i + j);
        }
        let lhs = (eval(gen, &a) - eval(gen, &b)).abs();
        let rhs = c.gamma.eval(a.t) * varrho.eval((a.y - b.y).abs()) + c.rho.eval(a.t) * phi.eval(diff_norm(&a.z, &b.z));
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let violated = lhs > rhs + opts.rel_tol * (1.0 + rhs);
        tr.record(ratio, violated, || Witness { first: a.clone(), second: Some(b.clone()), lhs, rhs });
    }
    Ok(tr.finish())
}

/// (A2): Lipschitz in `(y, z)` with constants γ(t), ρ(t).
pub fn validate_lipschitz_a2(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    let id = Modulus::Linear { scale: 1.0 };
    validate_continuity(gen, &id, &id, "A2", bx, opts)
}

/// (H3): continuity in `(y, z)` with the declared moduli ϱ, φ.
pub fn validate_continuity_h3(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    let m = gen.spec().moduli.as_ref().ok_or_else(|| Error::InvalidArgument("no moduli declared".into()))?;
    validate_continuity(gen, &m.varrho, &m.phi, "H3", bx, opts)
}

/// (A3)/(H2.3): `f(t,y,z,u) − f(t,y,z,u') ≤ σ(t) ∫ (u − u') β_t dλ`, both orders.
pub fn validate_jump_monotone_a3(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    bx.check(gen.n_marks())?;
    ensure_budget(opts)?;
    let kernel = gen.spec().kernel.as_ref().ok_or_else(|| Error::InvalidArgument("no jump kernel declared".into()))?;
    let marks = gen.marks();
    let mut tr = Tracker::new("A3");
    if marks.is_empty() {
        return Ok(tr.finish());
    }
    let mut s = Sampler::new(bx, gen, opts.seed);
    for i in 0..opts.budget {
        let a = s.point();
        let mut b = a.clone();
        for k in 0..b.u.len() {
            b.u[k] = s.partner(a.u[k], bx.u, i + k);
        }
        let (fa, fb) = (eval(gen, &a), eval(gen, &b));
        let sigma = gen.coeffs().sigma.eval(a.t);
        let kernel_int: f64 = (0..marks.len())
            .map(|k| (a.u[k] - b.u[k]) * kernel.beta.eval(a.t, k, marks.mark(k)) * marks.intensity(k))
            .sum();
        for (lhs, rhs, first, second) in [(fa - fb, sigma * kernel_int, &a, &b), (fb - fa, -sigma * kernel_int, &b, &a)] {
            let excess = lhs - rhs;
            let violated = excess > opts.rel_tol * (1.0 + lhs.abs() + rhs.abs());
            tr.record(excess, violated, || Witness { first: first.clone(), second: Some(second.clone()), lhs, rhs });
        }
    }
    Ok(tr.finish())
}

/// (H2.1): `(y − y')(f(t,y,·) − f(t,y',·)) ≤ |y − y'| γ(t) ϱ(|y − y'|)`.
pub fn validate_weak_monotone_h2(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    let m = gen.spec().moduli.as_ref().ok_or_else(|| Error::InvalidArgument("no moduli declared".into()))?;
    validate_weak_monotone_with(gen, &m.varrho, bx, opts)
}

pub fn validate_weak_monotone_with(
    gen: &Generator,
    varrho: &Modulus,
    bx: &SampleBox,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    bx.check(gen.n_marks())?;
    ensure_budget(opts)?;
    let mut s = Sampler::new(bx, gen, opts.seed);
    let mut tr = Tracker::new("H2.1");
    for i in 0..opts.budget {
        let a = s.point();
        let mut b = a.clone();
        b.y = s.partner(a.y, bx.y, i);
        let dy = a.y - b.y;
        let lhs = dy * (eval(gen, &a) - eval(gen, &b));
        let rhs = dy.abs() * gen.coeffs().gamma.eval(a.t) * varrho.eval(dy.abs());
        let excess = lhs - rhs;
        let violated = excess > opts.rel_tol * (1.0 + lhs.abs() + rhs.abs());
        tr.record(excess, violated, || Witness { first: a.clone(), second: Some(b.clone()), lhs, rhs });
    }
    Ok(tr.finish())
}

/// (H2.2): `|f(t,y,z,u) − f(t,y,z',u)| ≤ ρ(t) φ(|z − z'|)`.
pub fn validate_z_continuity_h2(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    let m = gen.spec().moduli.as_ref().ok_or_else(|| Error::InvalidArgument("no moduli declared".into()))?;
    validate_pairs_z_only(gen, &m.phi, bx, opts)
}

fn validate_pairs_z_only(gen: &Generator, phi: &Modulus, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    bx.check(gen.n_marks())?;
    ensure_budget(opts)?;
    let mut s = Sampler::new(bx, gen, opts.seed);
    let mut tr = Tracker::new("H2.2");
    for i in 0..opts.budget {
        let a = s.point();
        let mut b = a.clone();
        for j in 0..b.z.len() {
            b.z[j] = s.partner(a.z[j], bx.z, i + j);
        }
        let lhs = (eval(gen, &a) - eval(gen, &b)).abs();
        let rhs = gen.coeffs().rho.eval(a.t) * phi.eval(diff_norm(&a.z, &b.z));
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let violated = lhs > rhs + opts.rel_tol * (1.0 + rhs);
        tr.record(ratio, violated, || Witness { first: a.clone(), second: Some(b.clone()), lhs, rhs });
    }
    Ok(tr.finish())
}

/// (H1.2): `|f(t,y,z,u)| ≤ f_t + γ|y| + ρ|z| + σ‖u‖`.
pub fn validate_growth_h1(gen: &Generator, bx: &SampleBox, opts: &ValidationOptions) -> Result<ValidationReport> {
    bx.check(gen.n_marks())?;
    ensure_budget(opts)?;
    if gen.spec().growth.is_none() {
        return Err(Error::InvalidArgument("no growth process f_t declared".into()));
    }
    let mut s = Sampler::new(bx, gen, opts.seed);
    let mut tr = Tracker::new("H1.2");
    for _ in 0..opts.budget {
        let a = s.point();
        let lhs = eval(gen, &a).abs();
        let rhs = gen.growth_bound(a.t, a.y, &a.z, &a.u).expect("growth declared");
        let excess = lhs - rhs;
        let violated = excess > opts.rel_tol * (1.0 + rhs.abs());
        tr.record(excess, violated, || Witness { first: a.clone(), second: None, lhs, rhs });
    }
    Ok(tr.finish())
}

fn ensure_budget(opts: &ValidationOptions) -> Result<()> {
    if opts.budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    Ok(())
}

/// Runs every check implied by the declared assumption class, plus the
/// symbolic ones: (A4) on `[0, horizon]` and, for H2/H3, the Osgood condition
/// on ϱ and the linear-growth constants of the moduli.
pub fn validate_class(gen: &Generator, horizon: f64, bx: &SampleBox, opts: &ValidationOptions) -> Result<Vec<ValidationReport>> {
    let mut out = Vec::new();
    let integ = gen.coeffs().integrability(0.0, horizon);
    out.push(ValidationReport::symbolic("A4", integ.is_finite(), integ));
    let nonneg = gen.coeffs().check_nonnegative(horizon.min(bx.t[1].max(1.0))).is_ok();
    out.push(ValidationReport::symbolic("coefficients_nonnegative", nonneg, 0.0));
    let kernel_check = |out: &mut Vec<ValidationReport>| -> Result<()> {
        if gen.spec().kernel.is_some() && !gen.marks().is_empty() {
            out.push(validate_jump_monotone_a3(gen, bx, opts)?);
        }
        Ok(())
    };
    match gen.spec().class {
        AssumptionClass::A => {
            out.push(validate_lipschitz_a2(gen, bx, opts)?);
            kernel_check(&mut out)?;
        }
        AssumptionClass::H1 => {
            out.push(validate_growth_h1(gen, bx, opts)?);
        }
        AssumptionClass::H2 | AssumptionClass::H3 => {
            let m = gen.spec().moduli.as_ref().expect("checked when binding");
            out.push(ValidationReport::symbolic("osgood", m.varrho.is_osgood(), 0.0));
            out.push(moduli_growth_report(m));
            if gen.spec().class == AssumptionClass::H2 {
                out.push(validate_weak_monotone_h2(gen, bx, opts)?);
                out.push(validate_z_continuity_h2(gen, bx, opts)?);
            } else {
                out.push(validate_continuity_h3(gen, bx, opts)?);
            }
            kernel_check(&mut out)?;
        }
    }
    Ok(out)
}

fn moduli_growth_report(m: &super::Moduli) -> ValidationReport {
    // ϱ(x) ≤ k(x + 1), φ(x) ≤ a x + b on a sweep of [0, 1e3]
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..=10_000 {
        let x = 1e3 * (i as f64 / 10_000.0).powi(2);
        worst = worst.max(m.varrho.eval(x) - m.k * (x + 1.0));
        worst = worst.max(m.phi.eval(x) - (m.a * x + m.b));
    }
    ValidationReport::symbolic("moduli_linear_growth", worst <= 1e-12, worst)
}

/// Outcome of checking `Ψ(x) ≤ n x + Ψ(2K/n)` on sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaPhiReport {
    /// `n ≥ 2K`
    pub precondition: bool,
    pub bound_violations: usize,
    /// Samples where the declared growth `Ψ(x) ≤ K(x + 1)` itself fails.
    pub growth_violations: usize,
    pub worst_excess: f64,
    pub verdict: Verdict,
}

pub fn lemma_phi_bound(psi: impl Fn(f64) -> f64, growth_k: f64, n: f64, xs: &[f64]) -> LemmaPhiReport {
    let precondition = n >= 2.0 * growth_k;
    let anchor = psi(2.0 * growth_k / n);
    let mut bound_violations = 0;
    let mut growth_violations = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    for &x in xs {
        let v = psi(x);
        let excess = v - (n * x + anchor);
        worst_excess = worst_excess.max(excess);
        if excess > 1e-12 * (1.0 + v.abs()) {
            bound_violations += 1;
        }
        if v > growth_k * (x + 1.0) + 1e-12 {
            growth_violations += 1;
        }
    }
    let verdict = if precondition && bound_violations == 0 { Verdict::Pass } else { Verdict::Fail };
    LemmaPhiReport { precondition, bound_violations, growth_violations, worst_excess, verdict }
}

#[cfg(test)]
mod tests {
    use super::super::expr::build::*;
    use super::super::{eval_generator, CoefficientFns, Expr, GeneratorSpec, JumpKernel, MarkFn, Moduli, TimeFn};
    use super::*;
    use crate::noise::MarkSpace;

    fn bx() -> SampleBox {
        SampleBox::new([0.0, 1.0], [-10.0, 10.0], [-10.0, 10.0], [-5.0, 5.0])
    }

    fn opts() -> ValidationOptions {
        ValidationOptions { budget: 5_000, ..Default::default() }
    }

    fn bind(spec: GeneratorSpec) -> Generator {
        spec.bind(&MarkSpace::empty(), 1).unwrap()
    }

    fn recheck_a2(gen: &Generator, w: &Witness) {
        let (a, b) = (&w.first, w.second.as_ref().unwrap());
        let fa = eval_generator(gen, a.t, a.y, &a.z, &a.u).unwrap();
        let fb = eval_generator(gen, b.t, b.y, &b.z, &b.u).unwrap();
        let c = gen.coeffs();
        let rhs = c.gamma.eval(a.t) * (a.y - b.y).abs() + c.rho.eval(a.t) * diff_norm(&a.z, &b.z);
        assert!((fa - fb).abs() > rhs, "witness does not reproduce");
    }

    #[test]
    fn a2_sine_passes() {
        let g = bind(GeneratorSpec::new(add(vec![sin(y()), z(0)])).with_coeffs(CoefficientFns::constant(1.0, 1.0, 0.0)));
        let r = validate_lipschitz_a2(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.worst <= 1.0 + 1e-9);
    }

    #[test]
    fn a2_square_fails_with_witness() {
        let g = bind(GeneratorSpec::new(mul(vec![y(), y()])).with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0)));
        let r = validate_lipschitz_a2(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        recheck_a2(&g, r.witness.as_ref().unwrap());
    }

    #[test]
    fn a2_slope_two_fails() {
        let g = bind(GeneratorSpec::new(mul(vec![c(2.0), y()])).with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0)));
        let r = validate_lipschitz_a2(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!((w.lhs / w.rhs - 2.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_box_rejected() {
        let g = bind(GeneratorSpec::new(y()));
        let flat = SampleBox::new([0.0, 1.0], [1.0, 1.0], [-1.0, 1.0], [0.0, 0.0]);
        assert!(validate_lipschitz_a2(&g, &flat, &opts()).is_err());
        let zero_budget = ValidationOptions { budget: 0, ..opts() };
        assert!(validate_lipschitz_a2(&g, &bx(), &zero_budget).is_err());
    }

    fn jump_setup(expr: Expr) -> Generator {
        let marks = MarkSpace::new(vec![0.5, 2.0], vec![1.0, 0.5]).unwrap();
        let kernel = JumpKernel { c: -0.5, big_c: 1.0, beta: MarkFn::PerMark { values: vec![0.4, -0.3] } };
        GeneratorSpec::new(expr)
            .with_coeffs(CoefficientFns::constant(0.0, 0.0, 1.0))
            .with_kernel(kernel)
            .bind(&marks, 1)
            .unwrap()
    }

    #[test]
    fn a3_identity_passes() {
        let g = jump_setup(Expr::UKernelIntegral {});
        let r = validate_jump_monotone_a3(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.worst.abs() < 1e-9);
    }

    #[test]
    fn a3_doubled_kernel_fails() {
        let g = jump_setup(mul(vec![c(2.0), Expr::UKernelIntegral {}]));
        let r = validate_jump_monotone_a3(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        // lhs = 2·rhs with rhs > 0
        assert!(w.rhs > 0.0 && (w.lhs - 2.0 * w.rhs).abs() < 1e-9);
    }

    #[test]
    fn a3_u_independent_passes_both_orders() {
        let g = jump_setup(sin(y()));
        let r = validate_jump_monotone_a3(&g, &bx(), &opts()).unwrap();
        // both orderings are sampled, one of them has rhs ≤ 0
        assert_eq!(r.samples, 2 * opts().budget);
        assert_eq!(r.verdict, Verdict::Fail, "0 ≤ σ∫(u-u')β fails for one ordering unless β ≡ 0");
        let zero_kernel = {
            let marks = MarkSpace::single(1.0, 1.0).unwrap();
            GeneratorSpec::new(sin(y()))
                .with_kernel(JumpKernel { c: 0.0, big_c: 1.0, beta: MarkFn::constant(0.0) })
                .bind(&marks, 1)
                .unwrap()
        };
        let r = validate_jump_monotone_a3(&zero_kernel, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    fn moduli(varrho: Modulus) -> Moduli {
        Moduli { varrho, k: 1.0, phi: Modulus::Linear { scale: 1.0 }, a: 1.0, b: 1.0 }
    }

    #[test]
    fn h2_decreasing_cube_passes() {
        let g = bind(
            GeneratorSpec::new(neg(mul(vec![y(), y(), y()])))
                .with_class(AssumptionClass::H2)
                .with_moduli(moduli(Modulus::Linear { scale: 1.0 })),
        );
        assert_eq!(validate_weak_monotone_h2(&g, &bx(), &opts()).unwrap().verdict, Verdict::Pass);
    }

    #[test]
    fn h2_linear_in_y_equality() {
        let gamma = TimeFn::ExpDecay { a: 1.0, b: 0.5 };
        let spec = GeneratorSpec::new(mul(vec![y(), Expr::Coef { name: super::super::CoefName::Gamma }]))
            .with_coeffs(CoefficientFns { gamma, ..Default::default() })
            .with_class(AssumptionClass::H2)
            .with_moduli(moduli(Modulus::Linear { scale: 1.0 }));
        let r = validate_weak_monotone_h2(&bind(spec), &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.worst.abs() < 1e-9);
    }

    #[test]
    fn h2_square_root_with_sqrt_modulus() {
        // ϱ(x) = √x is not Osgood, so the generator is bound under class A and
        // the inequality checked directly against the modulus
        let g = bind(GeneratorSpec::new(sqrt_abs(y())).with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0)));
        let r = validate_weak_monotone_with(&g, &Modulus::Power { scale: 1.0, exponent: 0.5 }, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn h1_growth_checks() {
        let sin_spec = GeneratorSpec::new(sin(y())).with_growth(TimeFn::constant(1.0));
        assert_eq!(validate_growth_h1(&bind(sin_spec), &bx(), &opts()).unwrap().verdict, Verdict::Pass);

        let sq = GeneratorSpec::new(mul(vec![y(), y()]))
            .with_growth(TimeFn::zero())
            .with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0));
        let g = bind(sq);
        let r = validate_growth_h1(&g, &bx(), &opts()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let w = r.witness.unwrap();
        assert!(w.first.y.abs() > 1.0);
        let f = eval_generator(&g, w.first.t, w.first.y, &w.first.z, &w.first.u).unwrap();
        assert!(f > w.first.y.abs());

        let decay = TimeFn::ExpDecay { a: 1.0, b: 1.0 };
        let spec = GeneratorSpec::new(mul(vec![time_fn(decay.clone()), sub(c(1.0), y())]))
            .with_growth(decay.clone())
            .with_coeffs(CoefficientFns { gamma: decay, ..Default::default() });
        assert_eq!(validate_growth_h1(&bind(spec), &bx(), &opts()).unwrap().verdict, Verdict::Pass);
        assert!(validate_growth_h1(&bind(GeneratorSpec::new(y())), &bx(), &opts()).is_err());
    }

    #[test]
    fn class_dispatch_flags_square_under_a() {
        let g = bind(GeneratorSpec::new(mul(vec![y(), y()])).with_coeffs(CoefficientFns::constant(1.0, 0.0, 0.0)));
        let reports = validate_class(&g, 1.0, &bx(), &opts()).unwrap();
        let a2 = reports.iter().find(|r| r.check == "A2").unwrap();
        assert_eq!(a2.verdict, Verdict::Fail);
        assert!(reports.iter().find(|r| r.check == "A4").unwrap().verdict.passed());
    }

    #[test]
    fn lemma_phi_examples() {
        let r = lemma_phi_bound(|x| x + 1.0, 1.0, 2.0, &[0.0]);
        assert_eq!(r.verdict, Verdict::Pass);
        // Ψ(x) = K(x + 1) at x = 2K/n
        for (k, n) in [(1.0, 2.0), (2.0, 5.0), (0.5, 3.0)] {
            let x = 2.0 * k / n;
            assert_eq!(lemma_phi_bound(|x| k * (x + 1.0), k, n, &[x]).verdict, Verdict::Pass);
        }
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let r = lemma_phi_bound(|x: f64| x.sqrt() + x, 1.0, 4.0, &xs);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.bound_violations, 0);
        // the declared K = 1 understates the growth of √x + x beyond x = 1
        assert!(r.growth_violations > 0);
        assert!(!lemma_phi_bound(|x| x + 1.0, 1.0, 1.0, &[0.0]).precondition);
    }
}
