//! hydrolab CLI: wire a JSON run config to an experiment driver.
//!
//! Exit codes: 0 = all checks pass, 1 = tolerance failure, 2 = configuration
//! or runtime error.

use clap::{Parser, Subcommand};
use hydrolab::config::RunConfig;
use hydrolab::experiments;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hydrolab", version, about = "Pseudo-spectral laboratory for functional-generated Euler systems on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory (overrides output.dir; HYDROLAB_OUT overrides both).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// March one initial state and emit diagnostics + snapshots.
    Simulate(CommonArgs),
    /// Residual battery for the stress identity ρ∇(δE/δρ) + ∇·S = 0.
    VerifyNoether(CommonArgs),
    /// Relative-energy identity closure under refinement (twin runs).
    VerifyIdentity(CommonArgs),
    /// Stability ratios of the theorem functionals across perturbation sizes.
    TwinStability(CommonArgs),
    /// α-sweep of the lower-order model against NSK; fits the 1/α rate.
    ModelConvergence(CommonArgs),
    /// Hessian convexity conditions of gradient energies over density bands.
    CheckConvexity(CommonArgs),
    /// Finite-difference oracle battery for the variational structure.
    CheckVariational(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::VerifyNoether(a)
            | Command::VerifyIdentity(a)
            | Command::TwinStability(a)
            | Command::ModelConvergence(a)
            | Command::CheckConvexity(a)
            | Command::CheckVariational(a) => a,
        }
    }

    fn expected(&self) -> hydrolab::config::ExperimentName {
        use hydrolab::config::ExperimentName::*;
        match self {
            Command::Simulate(_) => Simulate,
            Command::VerifyNoether(_) => VerifyNoether,
            Command::VerifyIdentity(_) => VerifyIdentity,
            Command::TwinStability(_) => TwinStability,
            Command::ModelConvergence(_) => ModelConvergence,
            Command::CheckConvexity(_) => CheckConvexity,
            Command::CheckVariational(_) => CheckVariational,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();

    let cfg = match RunConfig::from_path(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if cfg.experiment.name != cli.command.expected() {
        eprintln!(
            "config error: experiment name {:?} does not match the subcommand",
            cfg.experiment.name
        );
        return ExitCode::from(2);
    }

    let out_dir = std::env::var("HYDROLAB_OUT")
        .ok()
        .map(PathBuf::from)
        .or_else(|| args.out.clone())
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));

    match experiments::run(&cfg, &out_dir) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                println!("RESULT: pass");
                ExitCode::SUCCESS
            } else {
                println!("RESULT: tolerance failure");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(2)
        }
    }
}
