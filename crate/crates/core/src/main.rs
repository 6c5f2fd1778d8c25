use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qmeas::scenario::{run_scenario, Overrides};
use qmeas::Execution;

#[derive(Parser)]
#[command(name = "qmeas", version, about = "Measurement scheme audits and model fixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts.
    Run {
        scenario: PathBuf,
        /// Overrides the seed in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol_pm: Option<f64>,
        #[arg(long)]
        tol_pvd: Option<f64>,
        #[arg(long)]
        tol_triv: Option<f64>,
        /// Directory for the artifacts, instead of the scenario's output prefix.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disable the thread pool.
        #[arg(long)]
        sequential: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        scenario,
        seed,
        tol_pm,
        tol_pvd,
        tol_triv,
        out,
        sequential,
    } = cli.command;
    let overrides = Overrides {
        seed,
        tol_pm,
        tol_pvd,
        tol_triv,
        out_dir: out,
        execution: if sequential { Execution::Sequential } else { Execution::default() },
    };
    match run_scenario(&scenario, &overrides) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for path in &outcome.artifacts {
                eprintln!("wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
