use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod compare;
mod run;
mod spec;

use compare::CompareArgs;
use spec::RunArgs;

/// Speed-weighted OLSR experiments on a deterministic MANET simulator.
#[derive(Debug, Parser)]
#[command(name = "polsr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run replications and write DLR CSVs and a summary.
    Run(RunArgs),
    /// Run two configurations on the same scenario and compare outage and DLR.
    Compare(CompareArgs),
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let spec = args.resolve()?;
            let s = run::cmd_run(&spec)?;
            println!(
                "{} {} x{}: outage {:.4}%, mean DLR {:.6}, max DLR {:.6} -> {}",
                s.scenario,
                s.algorithm,
                s.runs,
                s.outage_percent,
                s.mean_dlr,
                s.max_dlr,
                spec.output_dir.display()
            );
            Ok(())
        }
        Command::Compare(args) => compare::cmd_compare(&args),
    }
}
