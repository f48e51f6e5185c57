use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use switchcost::runner::{exit_code, run, Engine, RunOptions};

#[derive(Parser)]
#[command(name = "switchcost", version, about = "Price competition with switching costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario file and write CSV tables.
    Run {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "quad")]
        engine: Engine,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write decision-region grids for duopoly points.
        #[arg(long)]
        regions: bool,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        scenario,
        engine,
        seed,
        regions,
        out_dir,
        jobs,
    } = Cli::parse().command;
    let options = RunOptions {
        engine,
        seed,
        regions,
        out_dir,
        jobs,
    };
    let outcome = run(&scenario, &options);
    match &outcome {
        Ok(s) if s.non_converged > 0 => {
            eprintln!(
                "{}: {} of {} points did not converge (flagged in the tables)",
                s.scenario_id, s.non_converged, s.points
            )
        }
        Ok(s) => eprintln!("{}: {} points, {} files", s.scenario_id, s.points, s.files.len()),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
