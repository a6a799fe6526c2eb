//! Experiment dispatch, checks and reproducible outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use bsdep_core::generator::infconv::check_fn_properties;
use bsdep_core::generator::validate::validate_class;
use bsdep_core::generator::{EvalContext, Expr};
use bsdep_core::girsanov::{girsanov_weights, linear_representation, write_weights_csv};
use bsdep_core::noise::{compensated_integral, sample_ensemble, MarkSpace, PathEnsemble};
use bsdep_core::solver::{
    backward_residual, compare_solutions, minimal_solution, picard_solve, pooled_se, solve_backward_with,
    solve_infinite_horizon, BSDEPProblem, BSDEPSolution,
};
use bsdep_core::{stats, Estimate};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig, ResidualCheck, Target};

/// One declared check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed, value, tolerance }
    }

    /// `value ≤ tolerance`
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value <= tolerance, value, tolerance)
    }

    /// `CHECK <name> PASS|FAIL <value> <tolerance>`
    pub fn line(&self) -> String {
        format!(
            "CHECK {} {} {:.6e} {:.6e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.value,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    /// SHA-256 of the resolved config as written to `config.json`.
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    summary: Value,
    checks: Vec<Check>,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new(), summary: json!({}), checks: Vec::new() }
    }

    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn solution(&mut self, name: &str, sol: &BSDEPSolution) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        sol.write_csv(&mut buf)?;
        self.file(name, buf);
        Ok(())
    }

    fn target(&mut self, name: impl Into<String>, estimate: f64, se: f64, target: &Target) {
        self.checks.push(Check::at_most(name, (estimate - target.value).abs(), target.tolerance(se)));
    }
}

/// The config as run, without the output location, so that the hash depends
/// only on what is computed.
pub fn resolved_config_json(config: &ExperimentConfig) -> anyhow::Result<Vec<u8>> {
    let mut resolved = config.clone();
    resolved.output.dir = None;
    let mut text = serde_json::to_vec_pretty(&resolved)?;
    text.push(b'\n');
    Ok(text)
}

pub fn config_hash(config: &ExperimentConfig) -> anyhow::Result<String> {
    Ok(format!("{:x}", Sha256::digest(resolved_config_json(config)?)))
}

/// Output directory: the config's, else `out/<kind>`.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| PathBuf::from("out").join(config.kind().name()))
}

/// Runs the experiment and writes `config.json`, the kind's CSV files,
/// `summary.json` and finally `manifest.json` into `out_dir`. Nothing is
/// left behind if the run fails.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let kind = config.kind().name();
    let artifacts = execute(config).with_context(|| format!("{kind} experiment failed"))?;
    let Artifacts { mut files, summary, checks } = artifacts;
    files.insert(0, ("config.json".into(), resolved_config_json(config)?));
    let mut summary_bytes = serde_json::to_vec_pretty(&summary)?;
    summary_bytes.push(b'\n');
    files.push(("summary.json".into(), summary_bytes));

    let mut versions = BTreeMap::new();
    versions.insert("bsdep-core".to_string(), bsdep_core::VERSION.to_string());
    versions.insert("bsdep-lab".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let mut outputs: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        kind: kind.to_string(),
        config_hash: config_hash(config)?,
        seed: config.ensemble.seed,
        versions,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    files.push(("manifest.json".into(), manifest_bytes));
    write_all(out_dir, &files)?;
    Ok(manifest)
}

fn write_all(out_dir: &Path, files: &[(String, Vec<u8>)]) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| -> anyhow::Result<()> {
        for (name, bytes) in files {
            let dest = out_dir.join(name);
            let tmp = out_dir.join(format!(".{name}.tmp"));
            fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
            written.push(tmp.clone());
            fs::rename(&tmp, &dest).with_context(|| format!("moving {} into place", dest.display()))?;
            written.pop();
            written.push(dest);
        }
        Ok(())
    })();
    if result.is_err() {
        for path in written {
            let _ = fs::remove_file(path);
        }
    }
    result
}

fn ensemble_for(config: &ExperimentConfig, problem: &BSDEPProblem) -> anyhow::Result<PathEnsemble> {
    Ok(sample_ensemble(problem.grid(), problem.marks(), problem.dim(), config.ensemble.paths, config.ensemble.seed)?)
}

fn execute(config: &ExperimentConfig) -> anyhow::Result<Artifacts> {
    let mut a = Artifacts::new();
    let basis = &config.solver.basis;
    match &config.experiment {
        Experiment::Solve { expected_y0, z_mean, residual } => {
            let pb = config.problem()?;
            let ens = ensemble_for(config, &pb)?;
            let sol = solve_backward_with(&pb, &ens, basis, &config.solver_options())?;
            a.solution("solution.csv", &sol)?;
            a.summary = serde_json::to_value(sol.summary())?;
            if let Some(t) = expected_y0 {
                a.target("y0", sol.y0, sol.y0_se, t);
            }
            if let Some(zc) = z_mean {
                let mut worst: f64 = 0.0;
                for (means, ses) in sol.diagnostics.z_mean.iter().zip(&sol.diagnostics.z_mean_se) {
                    for (m, s) in means.iter().zip(ses) {
                        worst = worst.max(se_units((m - zc.value).abs(), *s));
                    }
                }
                a.checks.push(Check::at_most("z_mean_all_nodes", worst, zc.k_se));
            }
            if let Some(rc) = residual {
                residual_check(&mut a, "residual", &sol, &pb, &ens, rc)?;
            }
        }
        Experiment::Picard { expected_y0, agreement_k_se, agreement_abs_tol } => {
            let pb = config.problem()?;
            let ens = ensemble_for(config, &pb)?;
            let direct = solve_backward_with(&pb, &ens, basis, &config.solver_options())?;
            let rep = picard_solve(&pb, &ens, basis, &config.solver.picard, config.scheme())?;
            a.solution("solution.csv", &rep.solution)?;
            a.summary = json!({
                "picard": { "converged": rep.converged, "iterations": rep.iterations, "distances": rep.distances,
                            "y0": rep.solution.y0, "y0_se": rep.solution.y0_se },
                "backward": direct.summary(),
            });
            a.checks.push(Check::new(
                "picard_converged",
                rep.converged,
                *rep.distances.last().unwrap_or(&f64::NAN),
                config.solver.picard.tol,
            ));
            let pooled = pooled_se(&rep.solution, &direct);
            a.checks.push(Check::at_most(
                "picard_vs_backward",
                (rep.solution.y0 - direct.y0).abs(),
                agreement_k_se * pooled + agreement_abs_tol,
            ));
            if let Some(t) = expected_y0 {
                a.target("y0", direct.y0, direct.y0_se, t);
                a.target("picard_y0", rep.solution.y0, rep.solution.y0_se, t);
            }
        }
        Experiment::Minimal { ns, options, expected_y0, candidate, candidate_residual, monotone_k_se } => {
            let pb = config.problem()?;
            let ens = ensemble_for(config, &pb)?;
            let rep = minimal_solution(&pb, &ens, basis, ns, options)?;
            a.solution("solution.csv", &rep.solution)?;
            let mut summary = json!({
                "ns": rep.ns, "y0": rep.y0, "y0_se": rep.y0_se, "monotonicity": rep.monotonicity,
                "cache_entries": rep.cache_entries, "rounding_step": rep.rounding_step,
                "solution": rep.solution.summary(),
            });
            if let Some(t) = expected_y0 {
                for (i, n) in rep.ns.iter().enumerate() {
                    a.target(format!("y0_n{n}"), rep.y0[i], rep.y0_se[i], t);
                }
            }
            let excess = rep
                .y0
                .windows(2)
                .zip(rep.y0_se.windows(2))
                .map(|(y, s)| y[0] - y[1] - monotone_k_se * (s[0].powi(2) + s[1].powi(2)).sqrt())
                .fold(f64::NEG_INFINITY, f64::max);
            a.checks.push(Check::at_most("y0_monotone_in_n", excess.max(0.0), 0.0));
            if let Some(expr) = candidate {
                let cand = candidate_solution(expr, &ens)?;
                a.solution("candidate.csv", &cand)?;
                if let Some(rc) = candidate_residual {
                    residual_check(&mut a, "candidate_residual", &cand, &pb, &ens, rc)?;
                }
                let slack = monotone_k_se * pooled_se(&rep.solution, &cand);
                let cmp = compare_solutions(&rep.solution, &cand, slack)?;
                a.checks.push(Check::new("minimal_below_candidate", cmp.verdict.passed(), cmp.worst_violation, slack));
                summary["candidate"] = json!({ "y0": cand.y0, "comparison": cmp });
            }
            a.summary = summary;
        }
        Experiment::Compare { slack_se, slack_abs, negative_control, .. } => {
            let pb1 = config.problem()?;
            let pb2 = config.second_problem()?.expect("compare has a second problem");
            let ens = ensemble_for(config, &pb1)?;
            let s1 = solve_backward_with(&pb1, &ens, basis, &config.solver_options())?;
            let s2 = solve_backward_with(&pb2, &ens, basis, &config.solver_options())?;
            a.solution("solution.csv", &s1)?;
            a.solution("solution2.csv", &s2)?;
            let slack = slack_se * pooled_se(&s1, &s2) + slack_abs;
            let rep = compare_solutions(&s1, &s2, slack)?;
            match negative_control {
                Some(nc) => a.checks.push(Check::new(
                    "negative_control_interior_violation",
                    rep.interior_violation_fraction >= nc.min_interior_violation,
                    rep.interior_violation_fraction,
                    nc.min_interior_violation,
                )),
                None => a.checks.push(Check::at_most("violation_fraction", rep.violation_fraction, 0.0)),
            }
            a.summary = json!({ "first": s1.summary(), "second": s2.summary(), "comparison": rep });
        }
        Experiment::Oracle { linear, tolerance } => {
            let pb = config.problem()?;
            let ens = ensemble_for(config, &pb)?;
            let sol = solve_backward_with(&pb, &ens, basis, &config.solver_options())?;
            let oracle = linear_representation(linear, &ens, 0, None)?;
            let weights = girsanov_weights(&ens, &linear.measure_change(pb.grid().horizon(), pb.marks()))?;
            a.solution("solution.csv", &sol)?;
            let mut buf = Vec::new();
            write_weights_csv(&weights.weights, &mut buf)?;
            a.file("weights.csv", buf);
            let pooled = (sol.y0_se.powi(2) + oracle.std_err.powi(2)).sqrt();
            a.checks.push(Check::at_most(
                "oracle_y0",
                (sol.y0 - oracle.value).abs(),
                tolerance.rel_tol * oracle.value.abs() + tolerance.k_se * pooled + tolerance.abs_tol,
            ));
            a.checks.push(Check::at_most(
                "weights_mean",
                (weights.mean.mean - 1.0).abs(),
                tolerance.k_se * weights.mean.std_err + tolerance.abs_tol,
            ));
            a.summary = json!({
                "solver": sol.summary(),
                "oracle": { "y0": oracle.value, "y0_se": oracle.std_err },
                "weights": { "mean": weights.mean, "effective_sample_size": weights.effective_sample_size,
                             "margin": weights.margin },
            });
        }
        Experiment::Validate { sample_box, options, fn_properties } => {
            let (marks, dim) = (config.marks()?, config.problem.dim);
            let gen = config.problem.generator.clone().expect("validated").bind(&marks, dim)?;
            let reports = validate_class(&gen, config.problem.grid.horizon, sample_box, options)?;
            for r in &reports {
                a.checks.push(Check::new(r.check.clone(), r.verdict.passed(), r.worst, validator_tolerance(&r.check, options.rel_tol)));
            }
            let mut summary = json!({ "reports": reports });
            if let Some(fp) = fn_properties {
                let rep = check_fn_properties(&gen, &fp.ns, sample_box, &fp.options)?;
                a.checks.push(Check::new("fn_below_base", rep.below_base.holds, rep.below_base.worst, 0.0));
                a.checks.push(Check::new("fn_monotone_in_n", rep.monotone.holds, rep.monotone.worst, 0.0));
                if let Some(ok) = rep.final_gap_within {
                    a.checks.push(Check::new("fn_final_gap", ok, *rep.max_gap.last().unwrap_or(&0.0), fp.options.gap_tol));
                }
                let slope = rep.max_slope_over_n.iter().cloned().fold(0.0, f64::max);
                a.checks.push(Check::new("fn_slope_over_n", rep.slope_within, slope, 1.0 + fp.options.slope_tol));
                summary["fn_properties"] = serde_json::to_value(&rep)?;
            }
            a.file("validation.json", serde_json::to_vec_pretty(&summary)?);
            a.summary = summary;
        }
        Experiment::Infinite { expected_y0 } => {
            let pb = config.problem()?;
            let (marks, dim, paths, seed) = (pb.marks().clone(), pb.dim(), config.ensemble.paths, config.ensemble.seed);
            let rep = solve_infinite_horizon(&pb, |g| sample_ensemble(g, &marks, dim, paths, seed), basis)?;
            let mut csv = String::from("truncation,y0,y0_se,difference,tail_integral\n");
            for i in 0..rep.truncations.len() {
                let diff = rep.differences[i].map(|d| format!("{d:?}")).unwrap_or_default();
                csv.push_str(&format!(
                    "{:?},{:?},{:?},{},{:?}\n",
                    rep.truncations[i], rep.y0[i], rep.y0_se[i], diff, rep.tail_integrals[i]
                ));
            }
            a.file("truncations.csv", csv.into_bytes());
            let last_diff = rep.differences.iter().flatten().last().copied().unwrap_or(f64::INFINITY);
            a.checks.push(Check::new("truncation_converged", rep.converged, last_diff, rep.tol));
            if let Some(tt) = expected_y0 {
                let Some((y0, se)) = rep.y0_at(tt.truncation) else {
                    bail!("truncation {} is not in the schedule", tt.truncation);
                };
                a.target(format!("y0_at_{}", tt.truncation), y0, se, &tt.target);
            }
            a.summary = serde_json::to_value(&rep)?;
        }
        Experiment::Simulate { integrands, k_se } => {
            let (grid, marks) = (config.grid()?, config.marks()?);
            let ens = sample_ensemble(&grid, &marks, config.problem.dim, config.ensemble.paths, config.ensemble.seed)?;
            let mut buf = Vec::new();
            ens.write_brownian_csv(&mut buf)?;
            a.file("brownian.csv", buf);
            let mut buf = Vec::new();
            ens.write_jumps_csv(&mut buf)?;
            a.file("jumps.csv", buf);
            let mut rows = Vec::new();
            for (i, f) in integrands.iter().enumerate() {
                let value = |t: f64, e: f64| f.eval(t, mark_index(&marks, e), e);
                let samples = ens
                    .paths()
                    .iter()
                    .map(|p| compensated_integral(p, &grid, &marks, value, grid.horizon()))
                    .collect::<Result<Vec<_>, _>>()?;
                let mean = Estimate::from_samples(&samples);
                let var = stats::variance_with_se(&samples);
                let target: f64 = (0..grid.n_steps())
                    .map(|k| {
                        let t = grid.node(k);
                        (0..marks.len()).map(|j| value(t, marks.mark(j)).powi(2) * marks.intensity(j)).sum::<f64>()
                            * grid.dt()
                    })
                    .sum();
                a.checks.push(Check::at_most(format!("integrand{i}_mean"), mean.mean.abs(), k_se * mean.std_err));
                a.checks.push(Check::at_most(format!("integrand{i}_isometry"), (var.mean - target).abs(), k_se * var.std_err));
                rows.push(json!({ "mean": mean, "variance": var, "isometry_target": target }));
            }
            a.summary = json!({
                "paths": ens.len(), "steps": grid.n_steps(), "scheme": ens.scheme(),
                "total_jumps": ens.paths().iter().map(|p| p.total_jumps(None)).sum::<usize>(),
                "integrands": rows,
            });
        }
    }
    Ok(a)
}

/// Scale on which each validator reports `worst`: a ratio to the bound for
/// the continuity checks, an excess over it for the one-sided checks.
fn validator_tolerance(check: &str, rel_tol: f64) -> f64 {
    match check {
        "A2" | "H3" | "H2.2" => 1.0 + rel_tol,
        "A3" | "H2.1" | "H1.2" => rel_tol,
        "A4" => f64::INFINITY,
        "moduli_linear_growth" => 1e-12,
        _ => 0.0,
    }
}

fn mark_index(marks: &MarkSpace, e: f64) -> usize {
    marks.marks().iter().position(|&m| m == e).expect("integrand evaluated at a listed mark")
}

fn se_units(dev: f64, se: f64) -> f64 {
    if dev == 0.0 {
        0.0
    } else if se > 0.0 {
        dev / se
    } else {
        f64::INFINITY
    }
}

fn residual_check(
    a: &mut Artifacts,
    name: &str,
    sol: &BSDEPSolution,
    pb: &BSDEPProblem,
    ens: &PathEnsemble,
    rc: &ResidualCheck,
) -> anyhow::Result<()> {
    let r = backward_residual(sol, pb.generator(), ens, 0, rc.quadrature)?;
    a.checks.push(Check::at_most(name, r.mean.abs(), rc.k_se * r.std_err + rc.abs_tol));
    Ok(())
}

/// Deterministic `Y_t` given by an expression in `t`, with `Z = U = 0`.
fn candidate_solution(expr: &Expr, ens: &PathEnsemble) -> anyhow::Result<BSDEPSolution> {
    let usage = expr.usage();
    if usage.y || !usage.z.is_empty() || !usage.u.is_empty() || usage.all_u || usage.kernel {
        bail!("candidate must be an expression in t only");
    }
    let coeffs = Default::default();
    let (d, m) = (ens.dim(), ens.marks().len());
    let y = |t: f64| {
        expr.eval(&EvalContext { t, y: 0.0, z: &[], u: &[], marks: ens.marks(), coeffs: &coeffs, kernel: None })
    };
    Ok(BSDEPSolution::deterministic(ens, y, |_| vec![0.0; d], |_| vec![0.0; m])?)
}
