use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noma_ee::commands::{self, Command};
use noma_ee::scenario::{Overrides, Scenario};
use noma_ee::Error;

#[derive(Parser)]
#[command(
    name = "noma-ee",
    version,
    about = "NOMA downlink rate, ergodic capacity and energy-efficiency simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Per-realization SIC rates on sampled channels.
    Simulate(RunArgs),
    /// Ergodic sum rate: quadrature vs Monte-Carlo vs asymptotic law.
    Ergodic(RunArgs),
    /// Energy-efficiency maximization trace and solution.
    Optimize(RunArgs),
    /// Ergodic or optimize blocks over the scenario's sweep axis.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML, or any file previously written by this tool.
    scenario: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "gcq-nodes")]
    gcq_nodes: Option<usize>,
}

fn execute(command: Command, args: &RunArgs) -> Result<(), Error> {
    let overrides = Overrides {
        seed: args.seed,
        trials: args.trials,
        gcq_nodes: args.gcq_nodes,
    };
    let scenario = Scenario::load(&args.scenario)?.with_overrides(overrides)?;
    let output = commands::run(command, &scenario)?;
    match &args.out {
        Some(path) => std::fs::write(path, output)?,
        None => print!("{output}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Ergodic(a) => (Command::Ergodic, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("noma-ee {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
