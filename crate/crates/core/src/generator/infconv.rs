//! Lipschitz lower approximations `f_n` by inf-convolution.
//!
//! `f_n(t, x) = inf_{x'} f(t, x') + n·d(x, x')` with
//! `d = |y − y'| + ‖z − z'‖₂ + ‖u − u'‖_{L²(λ)}`, minimised numerically over
//! a box around `x`: a coarse lattice on the axes the driver actually reads,
//! followed by halving-radius refinements around the incumbent.
//!
//! A [`LipschitzFamily`] evaluates several `n` at once and takes each minimum
//! over the union of every member's candidates, so the computed values are
//! exactly nondecreasing in `n` and never exceed `f`.

use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use super::validate::{sample_points, SampleBox, Verdict};
use super::{Driver, Generator};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    /// Half-width used when no growth bound gives a provable radius.
    pub search_box_radius: f64,
    pub coarse_points_per_axis: usize,
    pub refinement_rounds: usize,
    /// Upper bound on lattice points per round.
    pub max_lattice: usize,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self { search_box_radius: 4.0, coarse_points_per_axis: 9, refinement_rounds: 16, max_lattice: 1 << 16 }
    }
}

impl SearchSettings {
    fn check(&self) -> Result<()> {
        if !(self.search_box_radius > 0.0 && self.search_box_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("search radius {} must be positive", self.search_box_radius)));
        }
        if self.coarse_points_per_axis < 2 {
            return Err(Error::InvalidArgument("need at least 2 lattice points per axis".into()));
        }
        Ok(())
    }
}

/// Flat store of evaluated candidates: `[f(c), y', z'.., u'..]` per entry.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    stride: usize,
    data: Vec<f64>,
}

impl CandidateSet {
    fn new(width: usize) -> Self {
        Self { stride: width + 1, data: Vec::new() }
    }

    fn push(&mut self, value: f64, point: &[f64]) {
        self.data.push(value);
        self.data.extend_from_slice(point);
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.stride
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.data.chunks_exact(self.stride).map(|c| (c[0], &c[1..]))
    }

    pub fn extend(&mut self, other: &CandidateSet) {
        debug_assert_eq!(self.stride, other.stride);
        self.data.extend_from_slice(&other.data);
    }
}

/// Several members `f_{n_1} ≤ f_{n_2} ≤ …` of the approximating sequence.
#[derive(Debug, Clone)]
pub struct LipschitzFamily {
    base: Generator,
    ns: Vec<u32>,
    settings: SearchSettings,
    /// Indices into `[y, z.., u..]` the driver reads.
    active: Vec<usize>,
    /// Distance weight per packed coordinate: 1 for y and z, √λ_i for u_i.
    sqrt_lambda: Vec<f64>,
}

impl LipschitzFamily {
    pub fn new(base: Generator, ns: Vec<u32>, settings: SearchSettings) -> Result<Self> {
        settings.check()?;
        if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("n list {ns:?} must be strictly increasing and ≥ 1")));
        }
        let d = base.dim();
        let usage = base.usage();
        let mut active = Vec::new();
        if usage.y {
            active.push(0);
        }
        active.extend((0..d).filter(|&j| usage.uses_z(j)).map(|j| 1 + j));
        active.extend((0..base.n_marks()).filter(|&i| usage.uses_u(i)).map(|i| 1 + d + i));
        let lattice = (settings.coarse_points_per_axis as f64).powi(active.len() as i32);
        if lattice > settings.max_lattice as f64 {
            return Err(Error::InvalidArgument(format!(
                "{} active axes with {} points each exceed the lattice limit {}",
                active.len(),
                settings.coarse_points_per_axis,
                settings.max_lattice
            )));
        }
        let sqrt_lambda = base.marks().intensities().iter().map(|l| l.sqrt()).collect();
        Ok(Self { base, ns, settings, active, sqrt_lambda })
    }

    pub fn ns(&self) -> &[u32] {
        &self.ns
    }

    pub fn base(&self) -> &Generator {
        &self.base
    }

    pub fn settings(&self) -> &SearchSettings {
        &self.settings
    }

    fn pack(&self, y: f64, z: &[f64], u: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(1 + z.len() + u.len());
        x.push(y);
        x.extend_from_slice(z);
        x.extend_from_slice(u);
        x
    }

    fn eval_packed(&self, t: f64, x: &[f64]) -> f64 {
        let d = self.base.dim();
        self.base.eval_unchecked(t, x[0], &x[1..1 + d], &x[1 + d..])
    }

    /// `|y − y'| + ‖z − z'‖ + ‖u − u'‖_{L²(λ)}` on packed points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.base.dim();
        let dz: f64 = (1..1 + d).map(|k| (a[k] - b[k]).powi(2)).sum();
        let du: f64 = self.sqrt_lambda.iter().enumerate().map(|(i, s)| (s * (a[1 + d + i] - b[1 + d + i])).powi(2)).sum();
        (a[0] - b[0]).abs() + dz.sqrt() + du.sqrt()
    }

    /// Search radius in the metric `d` for member `n` at `x`.
    fn radius(&self, n: u32, t: f64, x: &[f64]) -> f64 {
        let d = self.base.dim();
        let lip = self.base.coeffs().max_at(t);
        match self.base.growth_bound(t, x[0], &x[1..1 + d], &x[1 + d..]) {
            // beyond this distance the candidate x itself dominates
            Some(g) if (n as f64) > lip && g.is_finite() => (2.0 * g + 1.0) / (n as f64 - lip),
            _ => self.settings.search_box_radius,
        }
    }

    fn axis_half_width(&self, axis: usize, radius: f64) -> f64 {
        let d = self.base.dim();
        if axis > d {
            radius / self.sqrt_lambda[axis - 1 - d]
        } else {
            radius
        }
    }

    /// Runs the search for every member and returns all evaluated candidates.
    /// `x` itself is always the first entry.
    pub fn candidates(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> CandidateSet {
        let x = self.pack(y, z, u);
        let mut set = CandidateSet::new(x.len());
        let fx = self.eval_packed(t, &x);
        set.push(fx, &x);
        if self.active.is_empty() {
            return set;
        }
        for &n in &self.ns {
            self.search(n, t, &x, &mut set);
        }
        set
    }

    fn search(&self, n: u32, t: f64, x: &[f64], set: &mut CandidateSet) {
        let p = self.settings.coarse_points_per_axis;
        let nf = n as f64;
        let radius = self.radius(n, t, x);
        let half0: Vec<f64> = self.active.iter().map(|&a| self.axis_half_width(a, radius)).collect();
        let mut center = x.to_vec();
        let mut best_obj = self.eval_packed(t, x);
        let mut cand = x.to_vec();
        let mut idx = vec![0usize; self.active.len()];
        for round in 0..=self.settings.refinement_rounds {
            let scale = 0.5f64.powi(round as i32);
            let mut incumbent: Option<Vec<f64>> = None;
            idx.iter_mut().for_each(|i| *i = 0);
            loop {
                for (k, &axis) in self.active.iter().enumerate() {
                    let h = half0[k] * scale;
                    cand[axis] = center[axis] - h + 2.0 * h * idx[k] as f64 / (p - 1) as f64;
                }
                let v = self.eval_packed(t, &cand);
                if v.is_finite() {
                    set.push(v, &cand);
                    let obj = v + nf * self.distance(x, &cand);
                    if obj < best_obj {
                        best_obj = obj;
                        incumbent = Some(cand.clone());
                    }
                }
                if !advance(&mut idx, p) {
                    break;
                }
            }
            if let Some(c) = incumbent {
                center = c;
            }
        }
    }

    /// `min_c f(c) + n·d(x, c)` over a fixed candidate set.
    pub fn envelope(&self, set: &CandidateSet, n: u32, y: f64, z: &[f64], u: &[f64]) -> f64 {
        let x = self.pack(y, z, u);
        let nf = n as f64;
        set.iter().map(|(v, c)| v + nf * self.distance(&x, c)).fold(f64::INFINITY, f64::min)
    }

    /// `(f_{n_1}, …, f_{n_k})` at one point, sharing one candidate set.
    pub fn eval_all(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> Vec<f64> {
        let set = self.candidates(t, y, z, u);
        self.ns.iter().map(|&n| self.envelope(&set, n, y, z, u)).collect()
    }
}

/// Odometer increment; false once every index has wrapped.
fn advance(idx: &mut [usize], p: usize) -> bool {
    for i in idx.iter_mut().rev() {
        *i += 1;
        if *i < p {
            return true;
        }
        *i = 0;
    }
    false
}

/// A single member `f_n`.
#[derive(Debug, Clone)]
pub struct LipschitzApprox {
    family: LipschitzFamily,
}

impl LipschitzApprox {
    pub fn new(base: Generator, n: u32, settings: SearchSettings) -> Result<Self> {
        Ok(Self { family: LipschitzFamily::new(base, vec![n], settings)? })
    }

    pub fn n(&self) -> u32 {
        self.family.ns[0]
    }

    pub fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        self.family.eval_all(t, y, z, u)[0]
    }
}

impl Driver for LipschitzApprox {
    fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        LipschitzApprox::eval(self, t, y, z, u)
    }
}

/// Checked evaluation of `f_n` at one point.
pub fn inf_convolution(approx: &LipschitzApprox, t: f64, y: f64, z: &[f64], u: &[f64]) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("y", y)?;
    let g = approx.family.base();
    if z.len() != g.dim() || u.len() != g.n_marks() {
        return Err(Error::InvalidArgument(format!("expected z of length {} and u of length {}", g.dim(), g.n_marks())));
    }
    for &v in z.iter().chain(u) {
        ensure_finite("z/u", v)?;
    }
    Ok(approx.eval(t, y, z, u))
}

/// A family whose evaluations are memoised on arguments rounded to a fixed
/// step. Values are computed at the rounded point, so results do not depend on
/// evaluation order or thread scheduling.
pub struct CachedFamily {
    family: LipschitzFamily,
    step: f64,
    max_entries: usize,
    cache: DashMap<Vec<i64>, Arc<[f64]>>,
}

impl CachedFamily {
    pub const DEFAULT_STEP: f64 = 1e-9;

    pub fn new(family: LipschitzFamily, step: f64, max_entries: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("rounding step {step} must be positive")));
        }
        Ok(Self { family, step, max_entries, cache: DashMap::new() })
    }

    pub fn family(&self) -> &LipschitzFamily {
        &self.family
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }

    fn round(&self, v: f64) -> Option<i64> {
        let r = (v / self.step).round();
        (r.abs() < 9.0e18).then_some(r as i64)
    }

    pub fn eval_all(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> Arc<[f64]> {
        let key: Option<Vec<i64>> = std::iter::once(t).chain(std::iter::once(y)).chain(z.iter().copied()).chain(u.iter().copied()).map(|v| self.round(v)).collect();
        let Some(key) = key else {
            return self.family.eval_all(t, y, z, u).into();
        };
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let back = |k: i64| k as f64 * self.step;
        let zr: Vec<f64> = key[2..2 + z.len()].iter().map(|&k| back(k)).collect();
        let ur: Vec<f64> = key[2 + z.len()..].iter().map(|&k| back(k)).collect();
        let values: Arc<[f64]> = self.family.eval_all(back(key[0]), back(key[1]), &zr, &ur).into();
        if self.cache.len() < self.max_entries {
            self.cache.insert(key, values.clone());
        }
        values
    }

    /// The `idx`-th member as a driver.
    pub fn member(&self, idx: usize) -> FamilyMember<'_> {
        assert!(idx < self.family.ns.len());
        FamilyMember { family: self, idx }
    }
}

pub struct FamilyMember<'a> {
    family: &'a CachedFamily,
    idx: usize,
}

impl Driver for FamilyMember<'_> {
    fn eval(&self, t: f64, y: f64, z: &[f64], u: &[f64]) -> f64 {
        self.family.eval_all(t, y, z, u)[self.idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyOptions {
    pub budget: usize,
    pub seed: u64,
    /// Tolerance on `max |f_n − f|` for `n` at or above `lipschitz_hint`.
    pub gap_tol: f64,
    pub slope_tol: f64,
    /// Declared Lipschitz constant of `f` on the box, if known.
    pub lipschitz_hint: Option<f64>,
    pub search: SearchSettings,
}

impl Default for PropertyOptions {
    fn default() -> Self {
        Self { budget: 1000, seed: 7, gap_tol: 1e-3, slope_tol: 1e-2, lipschitz_hint: None, search: SearchSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyItem {
    pub holds: bool,
    pub violations: usize,
    pub worst: f64,
}

impl PropertyItem {
    fn new() -> Self {
        Self { holds: true, violations: 0, worst: f64::NEG_INFINITY }
    }

    fn record(&mut self, stat: f64, violated: bool) {
        self.worst = self.worst.max(stat);
        if violated {
            self.violations += 1;
            self.holds = false;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub ns: Vec<u32>,
    pub samples: usize,
    /// `f_n ≤ f` (excess `f_n − f`).
    pub below_base: PropertyItem,
    /// (i) `|f_n| ≤ f_t + γ|y| + ρ|z| + σ‖u‖`; absent without a growth process.
    pub growth: Option<PropertyItem>,
    /// (ii) `f_{n_k} ≤ f_{n_{k+1}}` (excess `f_{n_k} − f_{n_{k+1}}`).
    pub monotone: PropertyItem,
    /// (iii) `max |f_n − f|` per member.
    pub max_gap: Vec<f64>,
    pub gap_nonincreasing: bool,
    /// (iii) final gap within `gap_tol`, checked when `n_max ≥ lipschitz_hint`.
    pub final_gap_within: Option<bool>,
    /// (iv) largest finite-difference slope per member, in units of `n`.
    pub max_slope_over_n: Vec<f64>,
    pub slope_within: bool,
    pub verdict: Verdict,
}

/// Samples points in `bx` and checks the listed properties of `f_n` for every
/// `n` in `ns`.
pub fn check_fn_properties(gen: &Generator, ns: &[u32], bx: &SampleBox, opts: &PropertyOptions) -> Result<PropertyReport> {
    if opts.budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    let family = LipschitzFamily::new(gen.clone(), ns.to_vec(), opts.search)?;
    let points = sample_points(bx, gen.dim(), gen.n_marks(), opts.budget, opts.seed)?;
    let k = ns.len();
    let mut below = PropertyItem::new();
    let mut growth = gen.spec().growth.as_ref().map(|_| PropertyItem::new());
    let mut monotone = PropertyItem::new();
    let mut max_gap = vec![0.0f64; k];
    let mut max_slope = vec![0.0f64; k];
    let d = gen.dim();

    let per_point: Vec<_> = {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| {
                let set = family.candidates(p.t, p.y, &p.z, &p.u);
                let vals: Vec<f64> = ns.iter().map(|&n| family.envelope(&set, n, p.y, &p.z, &p.u)).collect();
                let f = gen.eval_unchecked(p.t, p.y, &p.z, &p.u);
                // slopes along each active axis on a shared candidate set
                let mut slopes = vec![0.0f64; k];
                for &axis in &family.active {
                    let (range, weight) = if axis == 0 {
                        (bx.y, 1.0)
                    } else if axis <= d {
                        (bx.z, 1.0)
                    } else {
                        (bx.u, family.sqrt_lambda[axis - 1 - d])
                    };
                    let h = 1e-3 * (range[1] - range[0]);
                    let mut x2 = family.pack(p.y, &p.z, &p.u);
                    x2[axis] += h;
                    let (y2, z2, u2) = (x2[0], &x2[1..1 + d], &x2[1 + d..]);
                    let mut shared = set.clone();
                    shared.extend(&family.candidates(p.t, y2, z2, u2));
                    for (i, &n) in ns.iter().enumerate() {
                        let a = family.envelope(&shared, n, p.y, &p.z, &p.u);
                        let b = family.envelope(&shared, n, y2, z2, u2);
                        slopes[i] = slopes[i].max((b - a).abs() / (h * weight) / n as f64);
                    }
                }
                (vals, f, slopes)
            })
            .collect()
    };

    for (p, (vals, f, slopes)) in points.iter().zip(per_point) {
        let bound = gen.growth_bound(p.t, p.y, &p.z, &p.u);
        for i in 0..k {
            below.record(vals[i] - f, vals[i] > f);
            if let (Some(item), Some(b)) = (growth.as_mut(), bound) {
                item.record(vals[i].abs() - b, vals[i].abs() > b * (1.0 + 1e-12) + 1e-12);
            }
            if i + 1 < k {
                monotone.record(vals[i] - vals[i + 1], vals[i] > vals[i + 1]);
            }
            max_gap[i] = max_gap[i].max((vals[i] - f).abs());
            max_slope[i] = max_slope[i].max(slopes[i]);
        }
    }
    let gap_nonincreasing = max_gap.windows(2).all(|w| w[1] <= w[0]);
    let n_max = *ns.last().expect("nonempty") as f64;
    let final_gap_within = opts.lipschitz_hint.filter(|&l| n_max >= l).map(|_| max_gap[k - 1] <= opts.gap_tol);
    let slope_within = max_slope.iter().all(|&s| s <= 1.0 + opts.slope_tol);
    let ok = below.holds
        && growth.as_ref().is_none_or(|g| g.holds)
        && monotone.holds
        && gap_nonincreasing
        && final_gap_within.unwrap_or(true)
        && slope_within;
    Ok(PropertyReport {
        ns: ns.to_vec(),
        samples: points.len(),
        below_base: below,
        growth: growth.take(),
        monotone,
        max_gap,
        gap_nonincreasing,
        final_gap_within,
        max_slope_over_n: max_slope,
        slope_within,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
    })
}

#[cfg(test)]
mod tests {
    use super::super::expr::build::*;
    use super::super::{CoefficientFns, GeneratorSpec, TimeFn};
    use super::*;
    use crate::noise::MarkSpace;

    fn gen(expr: crate::generator::Expr) -> Generator {
        GeneratorSpec::new(expr).bind(&MarkSpace::empty(), 1).unwrap()
    }

    fn fn_at(g: Generator, n: u32, y: f64) -> f64 {
        let settings = SearchSettings { search_box_radius: 5.0, ..Default::default() };
        inf_convolution(&LipschitzApprox::new(g, n, settings).unwrap(), 0.0, y, &[0.0], &[]).unwrap()
    }

    #[test]
    fn abs_with_n_one() {
        assert!((fn_at(gen(abs(y())), 1, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn square_closed_form() {
        // min_y' y'^2 + n|2 − y'| = 2n − n²/4 for n ≤ 4, else 4
        for (n, want) in [(1, 1.75), (2, 3.0), (3, 3.75), (4, 4.0), (8, 4.0)] {
            let got = fn_at(gen(mul(vec![y(), y()])), n, 2.0);
            assert!((got - want).abs() < 1e-8, "n = {n}: {got} vs {want}");
        }
    }

    #[test]
    fn lipschitz_driver_is_unchanged() {
        let g = GeneratorSpec::new(sin(y())).with_growth(TimeFn::constant(1.0)).bind(&MarkSpace::empty(), 1).unwrap();
        let got = fn_at(g, 2, 0.5);
        assert!((got - 0.5f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn brute_force_oracle_on_kink() {
        // f(y) = min(|y|, 1) − y/2 is not Lipschitz-1 globally in the search sense
        let g = gen(sub(min(vec![abs(y()), c(1.0)]), mul(vec![c(0.5), y()])));
        let settings = SearchSettings { search_box_radius: 6.0, ..Default::default() };
        let fam = LipschitzFamily::new(g.clone(), vec![1, 2, 3], settings).unwrap();
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let vals = fam.eval_all(0.0, x, &[0.0], &[]);
            for (i, n) in [1.0, 2.0, 3.0].iter().enumerate() {
                let brute = (0..=1_200_000)
                    .map(|k| x - 6.0 + 12.0 * k as f64 / 1_200_000.0)
                    .map(|yp| g.eval_unchecked(0.0, yp, &[0.0], &[]) + n * (x - yp).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!((vals[i] - brute).abs() < 1e-4, "x = {x}, n = {n}: {} vs {brute}", vals[i]);
            }
        }
    }

    #[test]
    fn growth_radius_used_when_declared() {
        let g = GeneratorSpec::new(sin(y()))
            .with_growth(TimeFn::constant(1.0))
            .with_coeffs(CoefficientFns::constant(0.0, 0.0, 0.0))
            .bind(&MarkSpace::empty(), 1)
            .unwrap();
        let fam = LipschitzFamily::new(g, vec![3], SearchSettings::default()).unwrap();
        assert!((fam.radius(3, 0.0, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_is_monotone_and_below_base() {
        let g = gen(mul(vec![y(), y(), c(0.3)]));
        let fam = LipschitzFamily::new(g.clone(), vec![1, 2, 4, 8], SearchSettings::default()).unwrap();
        for k in 0..40 {
            let x = -4.0 + 0.2 * k as f64;
            let v = fam.eval_all(0.0, x, &[0.0], &[]);
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            assert!(*v.last().unwrap() <= g.eval_unchecked(0.0, x, &[0.0], &[]));
        }
    }

    #[test]
    fn cached_family_matches_rounded_direct() {
        let g = gen(sqrt_abs(min(vec![abs(y()), c(1.0)])));
        let fam = LipschitzFamily::new(g, vec![2, 4], SearchSettings::default()).unwrap();
        let cached = CachedFamily::new(fam.clone(), 1e-9, 1000).unwrap();
        let a = cached.eval_all(0.5, 0.25, &[0.0], &[]);
        let b = cached.eval_all(0.5, 0.25 + 1e-12, &[0.0], &[]);
        assert_eq!(a, b);
        assert_eq!(cached.cached_entries(), 1);
        assert_eq!(&a[..], &fam.eval_all(0.5, 0.25, &[0.0], &[])[..]);
        assert_eq!(cached.member(0).eval(0.0, 0.0, &[0.0], &[]), 0.0);
    }

    #[test]
    fn rejects_bad_settings() {
        let g = gen(y());
        let bad = SearchSettings { search_box_radius: 0.0, ..Default::default() };
        assert!(LipschitzApprox::new(g.clone(), 1, bad).is_err());
        assert!(LipschitzApprox::new(g.clone(), 0, SearchSettings::default()).is_err());
        assert!(LipschitzFamily::new(g, vec![2, 2], SearchSettings::default()).is_err());
    }

    #[test]
    fn property_report_on_square() {
        let g = gen(mul(vec![y(), y()]));
        let bx = SampleBox::new([0.0, 1.0], [-5.0, 5.0], [-1.0, 1.0], [0.0, 1.0]);
        let opts = PropertyOptions { budget: 100, ..Default::default() };
        let r = check_fn_properties(&g, &[2, 4], &bx, &opts).unwrap();
        assert!(r.below_base.holds && r.monotone.holds && r.gap_nonincreasing && r.slope_within);
        assert!(r.growth.is_none());
        assert!(r.max_gap[0] > r.max_gap[1]);
    }
}
