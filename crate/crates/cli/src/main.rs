//! `circuflow`: simulate compartment networks, compare and tune designs,
//! evaluate and train the manipulator sorting cell.
//!
//! Exit status: 0 success, 1 usage or I/O error, 2 validation error,
//! 3 numeric failure.

mod error;
mod network_cmds;
mod output;
mod robot_cmds;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;
use network_cmds::{CompareArgs, OptimizeArgs, RankineArgs, SensitivityArgs, SimulateArgs};
use robot_cmds::{RobotEvalArgs, RobotTrainArgs};

#[derive(Debug, Parser)]
#[command(name = "circuflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one network; write the trajectory CSV and a run summary.
    Simulate(SimulateArgs),
    /// Rank the variants of a manifest by cumulative unsustainable mass.
    Compare(CompareArgs),
    /// Grid search over compartment parameters minimizing unsustainable mass.
    Optimize(OptimizeArgs),
    /// Finite-difference sensitivity of unsustainable mass to parameters.
    Sensitivity(SensitivityArgs),
    /// Steady-state Rankine cycle performance.
    Rankine(RankineArgs),
    /// Success rate of a reaching policy.
    RobotEval(RobotEvalArgs),
    /// Train a reaching policy with the cross-entropy method.
    RobotTrain(RobotTrainArgs),
    /// List the bundled example networks and manifests.
    List,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => network_cmds::run_simulate(a),
        Command::Compare(a) => network_cmds::run_compare(a),
        Command::Optimize(a) => network_cmds::run_optimize(a),
        Command::Sensitivity(a) => network_cmds::run_sensitivity(a),
        Command::Rankine(a) => network_cmds::run_rankine(a),
        Command::RobotEval(a) => robot_cmds::run_robot_eval(a),
        Command::RobotTrain(a) => robot_cmds::run_robot_train(a),
        Command::List => {
            let mut s = String::new();
            for n in circuflow_core::bundled::NETWORKS {
                s.push_str(&format!("bundled:{n}\n"));
            }
            for m in circuflow_core::bundled::MANIFESTS {
                s.push_str(&format!("bundled:{m} (manifest)\n"));
            }
            output::emit(None, &s)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
