use std::path::PathBuf;
use std::process::ExitCode;

use cdi_cli::config::Command;
use cdi_cli::{init_workers, run, ExperimentConfig};
use clap::Parser;

/// Communities of dynamical influence: experiments and tools.
#[derive(Parser)]
#[command(name = "cdi", version, arg_required_else_help = true)]
struct Cli {
    /// Replay a recorded `<out>.config.json` instead of parsing a subcommand.
    #[arg(long, conflicts_with = "command")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_workers().and_then(|()| {
        let config = match (cli.config, cli.command) {
            (Some(path), _) => ExperimentConfig::load(&path)?,
            (None, Some(command)) => ExperimentConfig::new(command),
            (None, None) => anyhow::bail!("a subcommand or --config is required"),
        };
        run(&config)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
