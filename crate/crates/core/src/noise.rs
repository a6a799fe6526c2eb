//! Driving noise on a uniform time grid.
//!
//! A [`PathEnsemble`] holds `M` independent realisations of a `d`-dimensional
//! Brownian motion (as grid increments) and a marked Poisson random measure
//! over a finite [`MarkSpace`]. Jump times are exact (exponential
//! inter-arrivals per mark); only `dt`-integrals use the grid, by left-endpoint
//! quadrature.
//!
//! Each path draws from its own ChaCha8 stream (`key = seed`,
//! `stream = path index`), so generation is order-independent and any subset
//! of paths can be regenerated on its own.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::PathArray;
use crate::error::{Error, Result};
use crate::stats::Estimate;

/// Identifier recorded with every ensemble; bump when the draw order changes.
pub const SUBSTREAM_SCHEME: &str = "chacha8-stream-per-path/v1";

/// Uniform grid `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive and finite, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be at least 1".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Step `k` such that `time ∈ (t_k, t_{k+1}]`.
    pub fn step_containing(&self, time: f64) -> usize {
        let k = (time / self.dt()).ceil() as usize;
        k.saturating_sub(1).min(self.n_steps - 1)
    }
}

/// Finite discretisation of the mark space `E = R \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MarkSpace {
    marks: Vec<f64>,
    intensities: Vec<f64>,
}

impl MarkSpace {
    pub fn new(marks: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if marks.len() != intensities.len() {
            return Err(Error::InvalidMarks(format!(
                "{} marks but {} intensities",
                marks.len(),
                intensities.len()
            )));
        }
        for (i, (&e, &l)) in marks.iter().zip(&intensities).enumerate() {
            if !e.is_finite() || e == 0.0 {
                return Err(Error::InvalidMarks(format!("mark {i} must be finite and nonzero, got {e}")));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidMarks(format!("intensity {i} must be positive, got {l}")));
            }
        }
        let space = Self { marks, intensities };
        if !space.levy_integral().is_finite() {
            return Err(Error::InvalidMarks("integral of (1 ∧ |e|²) dλ is not finite".into()));
        }
        Ok(space)
    }

    /// No marks: the pure-diffusion case.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(mark: f64, intensity: f64) -> Result<Self> {
        Self::new(vec![mark], vec![intensity])
    }

    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn marks(&self) -> &[f64] {
        &self.marks
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn mark(&self, i: usize) -> f64 {
        self.marks[i]
    }

    pub fn intensity(&self, i: usize) -> f64 {
        self.intensities[i]
    }

    /// `Λ = Σ λ_i`.
    pub fn total_intensity(&self) -> f64 {
        self.intensities.iter().sum()
    }

    /// `∫ (1 ∧ |e|²) λ(de)`.
    pub fn levy_integral(&self) -> f64 {
        self.marks.iter().zip(&self.intensities).map(|(e, l)| (e * e).min(1.0) * l).sum()
    }

    /// `∫ u dλ` for a function given by its values on the marks.
    pub fn integral(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.intensities).map(|(u, l)| u * l).sum()
    }

    /// `∫ |u|² dλ`.
    pub fn square_integral(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.intensities).map(|(u, l)| u * u * l).sum()
    }

    /// Norm of `L²(E, λ)`.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.square_integral(u).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: usize,
}

/// One realisation of the driving noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dim: usize,
    n_marks: usize,
    brownian_increments: Vec<f64>,
    jumps: Vec<JumpEvent>,
    step_counts: Vec<u32>,
}

impl NoisePath {
    /// Builds a path from explicit data. Jump events are sorted by time.
    pub fn new(grid: &TimeGrid, marks: &MarkSpace, dim: usize, brownian_increments: Vec<f64>, mut jumps: Vec<JumpEvent>) -> Result<Self> {
        if brownian_increments.len() != grid.n_steps() * dim {
            return Err(Error::InvalidArgument(format!(
                "expected {} Brownian increments, got {}",
                grid.n_steps() * dim,
                brownian_increments.len()
            )));
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut step_counts = vec![0u32; grid.n_steps() * marks.len()];
        for j in &jumps {
            if !(j.time > 0.0 && j.time <= grid.horizon()) {
                return Err(Error::InvalidArgument(format!("jump time {} outside (0, T]", j.time)));
            }
            if j.mark >= marks.len() {
                return Err(Error::InvalidArgument(format!("jump mark index {} out of range", j.mark)));
            }
            step_counts[grid.step_containing(j.time) * marks.len() + j.mark] += 1;
        }
        Ok(Self { dim, n_marks: marks.len(), brownian_increments, jumps, step_counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn brownian_increments(&self) -> &[f64] {
        &self.brownian_increments
    }

    /// `ΔW_k`, a slice of length `d`.
    pub fn dw(&self, k: usize) -> &[f64] {
        &self.brownian_increments[k * self.dim..(k + 1) * self.dim]
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    /// Number of jumps of mark `i` in `(t_k, t_{k+1}]`.
    pub fn jump_count(&self, k: usize, i: usize) -> u32 {
        self.step_counts[k * self.n_marks + i]
    }

    /// `W_T` for component `j`.
    pub fn terminal_brownian(&self, j: usize) -> f64 {
        self.brownian_increments.iter().skip(j).step_by(self.dim).sum()
    }

    /// Total number of jumps of mark `i`, or of all marks when `None`.
    pub fn total_jumps(&self, mark: Option<usize>) -> usize {
        match mark {
            Some(i) => self.jumps.iter().filter(|j| j.mark == i).count(),
            None => self.jumps.len(),
        }
    }
}

/// `M` seeded paths sharing a grid, a mark space and a Brownian dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    marks: MarkSpace,
    dim: usize,
    paths: Vec<NoisePath>,
    seed: u64,
    scheme: &'static str,
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn sample_path(grid: &TimeGrid, marks: &MarkSpace, dim: usize, seed: u64, index: usize) -> NoisePath {
    let mut rng = path_rng(seed, index);
    let sd = grid.dt().sqrt();
    let increments: Vec<f64> = (0..grid.n_steps() * dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * sd
        })
        .collect();
    let mut jumps = Vec::new();
    for i in 0..marks.len() {
        let exp = Exp::new(marks.intensity(i)).expect("intensity validated positive");
        let mut t = 0.0;
        loop {
            let gap: f64 = exp.sample(&mut rng);
            if gap <= 0.0 {
                continue;
            }
            t += gap;
            if t > grid.horizon() {
                break;
            }
            jumps.push(JumpEvent { time: t, mark: i });
        }
    }
    NoisePath::new(grid, marks, dim, increments, jumps).expect("sampled path is well formed")
}

/// Draws `n_paths` independent noise paths.
pub fn sample_ensemble(grid: &TimeGrid, marks: &MarkSpace, dim: usize, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be at least 1".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("Brownian dimension must be at least 1".into()));
    }
    let paths = (0..n_paths).into_par_iter().map(|p| sample_path(grid, marks, dim, seed, p)).collect();
    Ok(PathEnsemble { grid: *grid, marks: marks.clone(), dim, paths, seed, scheme: SUBSTREAM_SCHEME })
}

impl PathEnsemble {
    /// Wraps hand-built paths, e.g. for constructed test scenarios.
    pub fn from_paths(grid: TimeGrid, marks: MarkSpace, dim: usize, paths: Vec<NoisePath>, seed: u64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one path".into()));
        }
        if paths.iter().any(|p| p.dim != dim || p.n_marks != marks.len() || p.brownian_increments.len() != grid.n_steps() * dim) {
            return Err(Error::InvalidArgument("path shape does not match ensemble".into()));
        }
        Ok(Self { grid, marks, dim, paths, seed, scheme: "explicit" })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn marks(&self) -> &MarkSpace {
        &self.marks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn paths(&self) -> &[NoisePath] {
        &self.paths
    }

    pub fn path(&self, p: usize) -> &NoisePath {
        &self.paths[p]
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> &'static str {
        self.scheme
    }

    /// Compensated jump-count increment `N_i(t_k, t_{k+1}] - λ_i Δ`.
    pub fn compensated_increment(&self, p: usize, k: usize, i: usize) -> f64 {
        self.paths[p].jump_count(k, i) as f64 - self.marks.intensity(i) * self.grid.dt()
    }

    /// Writes `path,step,dw_0,...,dw_{d-1}`, one row per path and step.
    pub fn write_brownian_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "path,step")?;
        for j in 0..self.dim {
            write!(out, ",dw_{j}")?;
        }
        writeln!(out)?;
        for (p, path) in self.paths.iter().enumerate() {
            for k in 0..self.grid.n_steps() {
                write!(out, "{p},{k}")?;
                for v in path.dw(k) {
                    write!(out, ",{v:?}")?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Writes `path,time,mark_index`, one row per jump event in time order.
    pub fn write_jumps_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "path,time,mark_index")?;
        for (p, path) in self.paths.iter().enumerate() {
            for j in path.jumps() {
                writeln!(out, "{p},{:?},{}", j.time, j.mark)?;
            }
        }
        Ok(())
    }
}

/// `∫_0^{up_to} ∫_E U(s, e) μ̃(ds, de)` along one path.
///
/// The jump part sums the integrand at the exact jump times; the compensator
/// part uses left-endpoint quadrature on the grid.
pub fn compensated_integral(
    path: &NoisePath,
    grid: &TimeGrid,
    marks: &MarkSpace,
    integrand: impl Fn(f64, f64) -> f64,
    up_to: f64,
) -> Result<f64> {
    if !(up_to > 0.0 && up_to <= grid.horizon()) {
        return Err(Error::InvalidArgument(format!("up_to = {up_to} outside (0, T]")));
    }
    let jump_part: f64 = path
        .jumps()
        .iter()
        .take_while(|j| j.time <= up_to)
        .map(|j| integrand(j.time, marks.mark(j.mark)))
        .sum();
    let mut compensator = 0.0;
    for k in 0..grid.n_steps() {
        let start = grid.node(k);
        if start >= up_to {
            break;
        }
        let len = grid.node(k + 1).min(up_to) - start;
        let rate: f64 = (0..marks.len()).map(|i| integrand(start, marks.mark(i)) * marks.intensity(i)).sum();
        compensator += rate * len;
    }
    Ok(jump_part - compensator)
}

/// Which of the solution-space norms to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// `E sup_t |Y_t|²`
    S2,
    /// `E ∫ |Z_t|² dt`
    H2,
    /// `E ∫ ∫ |U_t(e)|² λ(de) dt`
    L2Jump,
}

/// Squared ensemble norm of a process, with the standard error across paths.
///
/// `values` must have `N` or `N + 1` nodes; time integrals use the first `N`
/// (left endpoints). For [`NormKind::L2Jump`] the width must equal the number
/// of marks.
pub fn estimate_norm(values: &PathArray, kind: NormKind, grid: &TimeGrid, marks: &MarkSpace) -> Result<Estimate> {
    let n = grid.n_steps();
    if values.nodes() != n && values.nodes() != n + 1 {
        return Err(Error::InvalidArgument(format!("process has {} nodes, grid has {} steps", values.nodes(), n)));
    }
    if kind == NormKind::L2Jump && values.width() != marks.len() {
        return Err(Error::InvalidArgument(format!(
            "jump process width {} does not match {} marks",
            values.width(),
            marks.len()
        )));
    }
    let dt = grid.dt();
    let per_path: Vec<f64> = (0..values.paths())
        .map(|p| match kind {
            NormKind::S2 => (0..values.nodes())
                .map(|k| values.row(p, k).iter().map(|v| v * v).sum::<f64>())
                .fold(0.0, f64::max),
            NormKind::H2 => (0..n).map(|k| values.row(p, k).iter().map(|v| v * v).sum::<f64>() * dt).sum(),
            NormKind::L2Jump => (0..n).map(|k| marks.square_integral(values.row(p, k)) * dt).sum(),
        })
        .collect();
    Ok(Estimate::from_samples(&per_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn grid_nodes_are_exact_at_ends() {
        let g = TimeGrid::new(1.0, 3).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(3), 1.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.step_containing(1.0 / 3.0), 0);
        assert_eq!(g.step_containing(0.34), 1);
        assert_eq!(g.step_containing(1.0), 2);
    }

    #[test]
    fn rejects_bad_grids_and_marks() {
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(f64::INFINITY, 4).is_err());
        assert!(MarkSpace::new(vec![1.0], vec![0.0]).is_err());
        assert!(MarkSpace::new(vec![1.0], vec![-1.0]).is_err());
        assert!(MarkSpace::new(vec![0.0], vec![1.0]).is_err());
        assert!(MarkSpace::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn mean_jump_count_matches_intensity() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let m = MarkSpace::single(1.0, 2.0).unwrap();
        let ens = sample_ensemble(&g, &m, 1, 10_000, 42).unwrap();
        let counts: Vec<f64> = ens.paths().iter().map(|p| p.total_jumps(None) as f64).collect();
        let mean = stats::mean(&counts);
        assert!((mean - 2.0).abs() <= 3.0 * (2.0f64 / 1e4).sqrt(), "mean jump count {mean}");
    }

    #[test]
    fn empty_mark_space_gives_no_jumps() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let ens = sample_ensemble(&g, &MarkSpace::empty(), 1, 100, 7).unwrap();
        assert!(ens.paths().iter().all(|p| p.jumps().is_empty()));
    }

    #[test]
    fn brownian_increment_variance_is_dt() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let ens = sample_ensemble(&g, &MarkSpace::empty(), 2, 10_000, 3).unwrap();
        for j in 0..2 {
            let xs: Vec<f64> = ens.paths().iter().map(|p| p.dw(4)[j]).collect();
            let v = stats::variance_with_se(&xs);
            assert!((v.mean - 0.1).abs() <= 3.0 * v.std_err, "component {j}: {v:?}");
        }
    }

    #[test]
    fn merged_steps_scale_variance() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let ens = sample_ensemble(&g, &MarkSpace::empty(), 1, 10_000, 11).unwrap();
        let xs: Vec<f64> = ens.paths().iter().map(|p| (2..6).map(|k| p.dw(k)[0]).sum()).collect();
        let v = stats::variance_with_se(&xs);
        assert!((v.mean - 0.4).abs() <= 3.0 * v.std_err, "{v:?}");
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let m = MarkSpace::new(vec![0.5, -1.0], vec![1.0, 0.5]).unwrap();
        let a = sample_ensemble(&g, &m, 2, 64, 99).unwrap();
        let b = sample_ensemble(&g, &m, 2, 64, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&g, &m, 2, 64, 100).unwrap();
        assert_ne!(a, c);
        // path p does not depend on how many paths were drawn
        let d = sample_ensemble(&g, &m, 2, 10, 99).unwrap();
        assert_eq!(a.path(7), d.path(7));
    }

    #[test]
    fn compensated_integral_count_minus_compensator() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let m = MarkSpace::single(1.0, 1.0).unwrap();
        let jumps = vec![JumpEvent { time: 0.7, mark: 0 }, JumpEvent { time: 0.3, mark: 0 }];
        let path = NoisePath::new(&g, &m, 1, vec![0.0; 10], jumps).unwrap();
        let v = compensated_integral(&path, &g, &m, |_, _| 1.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let zero = compensated_integral(&path, &g, &m, |_, _| 0.0, 1.0).unwrap();
        assert_eq!(zero, 0.0);
        // partial horizon: one jump, compensator 0.5
        let half = compensated_integral(&path, &g, &m, |_, _| 1.0, 0.5).unwrap();
        assert!((half - 0.5).abs() < 1e-12);
        assert!(compensated_integral(&path, &g, &m, |_, _| 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_process_norms() {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let m = MarkSpace::new(vec![1.0, 2.0], vec![0.5, 1.5]).unwrap();
        let c = PathArray::from_fn(5, 9, 1, |_, _, _| 3.0);
        let h2 = estimate_norm(&c, NormKind::H2, &g, &m).unwrap();
        assert!((h2.mean - 18.0).abs() < 1e-12);
        let s2 = estimate_norm(&c, NormKind::S2, &g, &m).unwrap();
        assert!((s2.mean - 9.0).abs() < 1e-12);
        let u = PathArray::from_fn(5, 8, 2, |_, _, _| 1.0);
        let l2 = estimate_norm(&u, NormKind::L2Jump, &g, &m).unwrap();
        assert!((l2.mean - 4.0).abs() < 1e-12);
        assert!(estimate_norm(&c, NormKind::L2Jump, &g, &m).is_err());
    }

    #[test]
    fn h2_norm_of_brownian_motion() {
        let g = TimeGrid::new(1.0, 50).unwrap();
        let ens = sample_ensemble(&g, &MarkSpace::empty(), 1, 10_000, 5).unwrap();
        let w = PathArray::from_fn(ens.len(), 51, 1, |p, k, _| (0..k).map(|s| ens.path(p).dw(s)[0]).sum());
        let h2 = estimate_norm(&w, NormKind::H2, &g, &MarkSpace::empty()).unwrap();
        // left-endpoint quadrature of E W_t² = t gives Σ t_k Δ = (1 - Δ)/2
        let target = (1.0 - g.dt()) / 2.0;
        assert!((h2.mean - target).abs() <= 3.0 * h2.std_err, "{h2:?}");
        // and the continuous value T²/2 is within discretisation of it
        assert!((target - 0.5).abs() <= g.dt());
    }

    #[test]
    fn csv_dump_layout() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let m = MarkSpace::single(1.0, 1.0).unwrap();
        let path = NoisePath::new(&g, &m, 1, vec![0.5, -0.25], vec![JumpEvent { time: 0.75, mark: 0 }]).unwrap();
        let ens = PathEnsemble::from_paths(g, m, 1, vec![path], 0).unwrap();
        let mut b = Vec::new();
        ens.write_brownian_csv(&mut b).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "path,step,dw_0\n0,0,0.5\n0,1,-0.25\n");
        let mut j = Vec::new();
        ens.write_jumps_csv(&mut j).unwrap();
        assert_eq!(String::from_utf8(j).unwrap(), "path,time,mark_index\n0,0.75,0\n");
    }
}
