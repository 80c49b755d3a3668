use std::path::PathBuf;
use std::process::ExitCode;

use chebspike_cli::{run, CliError, ExperimentConfig, Mode, Overrides};
use clap::{Parser, Subcommand};

/// Grid-free spike and spline-knot recovery experiments.
///
/// Exit codes: 0 success, 2 config error, 3 solver failure, 4 failed check (with --assert).
#[derive(Parser, Debug)]
#[command(name = "chebspike", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Mode, when no subcommand is given.
    #[arg(long, value_enum, global = true)]
    mode: Option<Mode>,

    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true)]
    m: Option<usize>,

    /// Noise level on the observed moments (or on Θ in spline mode).
    #[arg(long, global = true)]
    sigma: Option<f64>,

    /// Base noise level; scaled by m!/(m-d-1)! in spline mode.
    #[arg(long, global = true)]
    sigma0: Option<f64>,

    /// Regularization level, replacing the Rice-method default.
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Confidence parameter η (α in spline mode).
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Monte-Carlo trials for rice-check.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Exit with code 4 when the run's acceptance checks fail.
    #[arg(long, global = true)]
    assert: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Recover a spike train from noisy moments.
    RecoverSpikes,
    /// Recover a non-uniform spline from a polynomial approximation and boundary data.
    RecoverSpline,
    /// Build and verify dual certificates for a support.
    Certificate,
    /// Monte-Carlo check of the Rice tail bound.
    RiceCheck,
    /// Repeat a recovery over a list of parameter values.
    Sweep,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Self {
        match c {
            Command::RecoverSpikes => Mode::RecoverSpikes,
            Command::RecoverSpline => Mode::RecoverSpline,
            Command::Certificate => Mode::Certificate,
            Command::RiceCheck => Mode::RiceCheck,
            Command::Sweep => Mode::Sweep,
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mode = match (cli.command.map(Mode::from), cli.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::config(
                "mode",
                format!("--mode {} conflicts with subcommand {}", b.name(), a.name()),
            ));
        }
        (a, b) => a.or(b),
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        mode,
        seed: cli.seed,
        out_dir: cli.out_dir,
        m: cli.m,
        sigma: cli.sigma,
        sigma0: cli.sigma0,
        lambda: cli.lambda,
        eta: cli.eta,
        trials: cli.trials,
    });
    let outcome = run(&cfg)?;
    println!("{}: {}", cfg.mode()?.name(), outcome.summary);
    for f in &outcome.files {
        println!("  wrote {}", f.display());
    }
    Ok(outcome.passed || !cli.assert)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: acceptance checks failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
