use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use krylov_recycle_cli::{compare_runs, run_scenario, threads_from_env, CliError, Overrides, Scenario};

#[derive(Parser)]
#[command(name = "krylov-recycle", version, about = "Deflated-restart and recycling Krylov solver studies")]
struct Cli {
    /// Suppress the summary printed to stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write history.csv and summary.txt.
    Solve {
        config: PathBuf,
        /// Output directory, overriding the scenario's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare total matvecs and final residuals of several history.csv files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        histories: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Solve { config, out, seed } => {
            let threads = threads_from_env(std::env::var("KRYLOV_RECYCLE_THREADS").ok().as_deref())?;
            let scenario = Scenario::load(&config, &Overrides { out, seed })?;
            let outcome = run_scenario(&scenario, threads)?;
            if !cli.quiet {
                print!("{}", outcome.summary);
            }
            Ok(outcome.status.exit_code())
        }
        Command::Compare { histories } => {
            let table = compare_runs(&histories)?;
            if !cli.quiet {
                print!("{table}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
