//! `soliton-qubit`: run chain, qubit and figure scenarios and write CSV output.
//!
//! Exit status is 0 on success, 2 for an invalid configuration, 3 when an integrator
//! gives up, and 1 for I/O failures. Failures print a single `error[<kind>]: ...` line
//! on stderr.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Options;
use crate::config::{read_json, ScenarioConfig, SweepConfig};
use crate::failure::CliError;

#[derive(Debug, Parser)]
#[command(name = "soliton-qubit", version, about = "Soliton-driven qubit control on a classical spin chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario (or sweep) JSON file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Step size: the lattice step for `chain run` and `fig 1|3`, the qubit sampling
    /// step (in the config's time units) otherwise.
    #[arg(long, global = true, allow_hyphen_values = true)]
    dt: Option<f64>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the lattice equations.
    Chain {
        #[command(subcommand)]
        action: Action,
    },
    /// Integrate the qubit driven by a soliton.
    Qubit {
        #[command(subcommand)]
        action: Action,
    },
    /// Print the tuned couplings for a bright-soliton scenario.
    Tune,
    /// Reproduce one of the built-in figure scenarios.
    Fig {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        id: u8,
    },
    /// Run a scenario over a range of one parameter.
    Sweep,
}

#[derive(Debug, Subcommand)]
enum Action {
    Run,
}

fn config_path(cli: &Cli) -> Result<&PathBuf, CliError> {
    cli.config
        .as_ref()
        .ok_or_else(|| CliError::validation("this command needs --config <path>"))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(n))
            .build_global()
            .map_err(|e| CliError::validation(format!("--threads: {e}")))?;
    }
    let opts = Options {
        out: cli.out.clone(),
        dt: cli.dt,
    };
    match &cli.command {
        Command::Chain { action: Action::Run } => {
            commands::chain_run(&read_json::<ScenarioConfig>(config_path(cli)?)?, &opts)
        }
        Command::Qubit { action: Action::Run } => {
            commands::qubit_run(&read_json::<ScenarioConfig>(config_path(cli)?)?, &opts)
        }
        Command::Tune => commands::tune(&read_json::<ScenarioConfig>(config_path(cli)?)?),
        Command::Fig { id } => commands::figure(*id, &opts),
        Command::Sweep => commands::sweep(&read_json::<SweepConfig>(config_path(cli)?)?, &opts),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind.exit_code())
        }
    }
}
