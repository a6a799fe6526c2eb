use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, ExperimentKind};
use crate::runner::{output_dir, run_experiment};

#[derive(Debug, Parser)]
#[command(name = "bsdep-lab", version, about = "Run backward-SDE experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Backward regression solve.
    Solve(RunArgs),
    /// Picard iteration next to the direct solve.
    Picard(RunArgs),
    /// Minimal solution from the inf-convolution family.
    Minimal(RunArgs),
    /// Comparison of two solutions on one ensemble.
    Compare(RunArgs),
    /// Linear equation against its weighted closed-form representation.
    Oracle(RunArgs),
    /// Assumption validators and inf-convolution properties.
    Validate(RunArgs),
    /// Truncation study of an infinite-horizon problem.
    Infinite(RunArgs),
    /// Path simulation with martingale and isometry checks.
    Simulate(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `ensemble.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `ensemble.paths`.
    #[arg(long)]
    paths: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::Solve(a) => (ExperimentKind::Solve, a),
            Command::Picard(a) => (ExperimentKind::Picard, a),
            Command::Minimal(a) => (ExperimentKind::Minimal, a),
            Command::Compare(a) => (ExperimentKind::Compare, a),
            Command::Oracle(a) => (ExperimentKind::Oracle, a),
            Command::Validate(a) => (ExperimentKind::Validate, a),
            Command::Infinite(a) => (ExperimentKind::Infinite, a),
            Command::Simulate(a) => (ExperimentKind::Simulate, a),
        }
    }
}

/// Runs the CLI; returns the process exit status (0 all checks pass, 1 a
/// check failed or the run errored, 2 usage error).
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, args, out) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            1
        }
    }
}

fn execute(kind: ExperimentKind, args: RunArgs, out: &mut dyn Write) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", args.config.display()))?;
    let mut config = parse_config(&text).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("  {e}")).collect();
        anyhow::anyhow!("invalid config {}:\n{}", args.config.display(), lines.join("\n"))
    })?;
    if config.kind() != kind {
        anyhow::bail!("config {} declares a {} experiment, not {}", args.config.display(), config.kind().name(), kind.name());
    }
    if let Some(seed) = args.seed {
        config.ensemble.seed = seed;
    }
    if let Some(paths) = args.paths {
        config.ensemble.paths = paths;
    }
    if let Some(dir) = args.out {
        config.output.dir = Some(dir);
    }
    let dir = output_dir(&config);
    let manifest = run_experiment(&config, &dir)?;
    for check in &manifest.checks {
        writeln!(out, "{}", check.line())?;
    }
    writeln!(out, "manifest {}", dir.join("manifest.json").display())?;
    Ok(manifest.passed)
}
