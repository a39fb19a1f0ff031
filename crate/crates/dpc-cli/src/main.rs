//! `dpc` — closed-loop polarization-control simulation from scenario files.

use clap::{Parser, Subcommand};
use dpc_cli::commands::{cmd_check_jacobian, cmd_simulate, cmd_sweep, DEFAULT_CSV_DECIMATION};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dpc",
    about = "Dynamic polarization control: forward models, Jacobian checks, closed-loop runs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop scenario and write the trace as CSV.
    Simulate {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Keep every N-th sample in the CSV.
        #[arg(long, default_value_t = DEFAULT_CSV_DECIMATION)]
        decimation: usize,
    },
    /// Verify the analytic Jacobian on randomized operating points.
    CheckJacobian {
        /// Scenario file (TOML); only the chain and the seed are used.
        scenario: PathBuf,
        /// Number of random operating points.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Rerun a scenario once per value of one scalar key.
    Sweep {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Key and comma-separated values, e.g. mu=0.05,0.1,0.2
        #[arg(long)]
        param: String,
        /// Directory for the per-value traces and summary.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            scenario,
            out,
            decimation,
        } => cmd_simulate(scenario, out, *decimation),
        Command::CheckJacobian { scenario, trials } => {
            cmd_check_jacobian(scenario, *trials).map(|_| ())
        }
        Command::Sweep {
            scenario,
            param,
            out_dir,
        } => cmd_sweep(scenario, param, out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
