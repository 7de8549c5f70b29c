use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use volterra_sweep::cli::{default_out_dir, run_scenario, run_study, selftest};

#[derive(Parser)]
#[command(name = "volterra-sweep", version, about = "Sweeping processes with Volterra memory")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario, write CSV artifacts and run its verifications.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence study over a list of uniform grid sizes.
    Study {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in Gronwall and solver property checks.
    Selftest,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Run { scenario, out } => {
            let out = out.unwrap_or_else(|| default_out_dir(&scenario));
            match run_scenario(&scenario, &out) {
                Ok(outcome) => {
                    for line in &outcome.lines {
                        println!("{line}");
                    }
                    outcome.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Study { scenario, grids, out } => {
            let out = out.unwrap_or_else(|| default_out_dir(&scenario));
            match run_study(&scenario, &grids, &out) {
                Ok((table, outcome)) => {
                    print!("{}", table.to_csv());
                    for line in &outcome.lines {
                        println!("{line}");
                    }
                    outcome.exit_code()
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            }
        }
        Command::Selftest => {
            let outcome = selftest();
            for line in &outcome.lines {
                println!("{line}");
            }
            outcome.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
