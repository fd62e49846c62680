use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{cylinder, dynamics, friction, report, trajectory, Ctx};
use config::RunConfig;

/// Dynamic parameter identification for a hydraulically actuated arm.
#[derive(Debug, Parser)]
#[command(name = "hydrarm", version, about)]
struct Cli {
    /// Run configuration (JSON); defaults apply to anything not given.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output root; each command writes into its own subdirectory.
    #[arg(long, global = true, env = "HYDRARM_DATA_DIR", default_value = "hydrarm-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the six cylinder test rigs and write their records.
    SimulateCylinder(cylinder::SimulateCylinderArgs),
    /// Identify Stribeck friction per cylinder from record files.
    IdentifyFriction(friction::IdentifyFrictionArgs),
    /// Optimize (or evaluate) a Fourier excitation trajectory.
    DesignTrajectory(trajectory::DesignTrajectoryArgs),
    /// Identify the base inertial parameters and validate the model.
    IdentifyDynamics(dynamics::IdentifyDynamicsArgs),
    /// Merge the outputs of earlier commands into one summary.
    Report(report::ReportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx {
        config: RunConfig::load(cli.config.as_deref())?,
        seed: cli.seed,
        out: cli.out,
    };
    match &cli.command {
        Command::SimulateCylinder(a) => cylinder::run(&ctx, a),
        Command::IdentifyFriction(a) => friction::run(&ctx, a),
        Command::DesignTrajectory(a) => trajectory::run(&ctx, a),
        Command::IdentifyDynamics(a) => dynamics::run(&ctx, a),
        Command::Report(a) => report::run(&ctx, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
