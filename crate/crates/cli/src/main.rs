use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod error;
mod output;
mod run;

#[derive(Parser)]
#[command(
    name = "cellfree-sim",
    version,
    about = "Cell-free massive MIMO downlink precoding experiments",
    after_help = "Outputs are deterministic for a fixed config and binary.\n\
                  Set RAYON_NUM_THREADS to cap worker parallelism."
)]
struct Cli {
    /// Write outputs here instead of the config's output_dir.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run each experiment and write per-scenario results and SINR CDFs
    Run { config: PathBuf },
    /// Like run, but every scenario needs >= 2 methods and gets a paired
    /// power/outage summary on the shared channel draws
    Compare { config: PathBuf },
    /// Write the per-scheme fronthaul byte accounting and cross-check it
    /// against a driven protocol run
    Comm { config: PathBuf },
    /// Grid the distributed method over target, relaxation factor, penalty,
    /// and AP count
    Sweep { config: PathBuf },
}

fn dispatch(cli: Cli) -> error::Result<Vec<(String, String)>> {
    let path = match &cli.command {
        Command::Run { config }
        | Command::Compare { config }
        | Command::Comm { config }
        | Command::Sweep { config } => config.clone(),
    };
    let mut parsed = config::parse_config(&path)?;
    if let Some(dir) = cli.out_dir {
        parsed.output_dir = dir;
    }
    match cli.command {
        Command::Run { .. } => run::run_experiments(&parsed, false),
        Command::Compare { .. } => run::run_experiments(&parsed, true),
        Command::Comm { .. } => run::comm_tables(&parsed),
        Command::Sweep { .. } => run::sweep(&parsed).map(|()| Vec::new()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(failed) if failed.is_empty() => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("{} scenario(s) failed", failed.len());
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
