//! `isovol`: sample, measure and backtest sphere-simplex patches.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "isovol", version, about = "Uniform sampling and volume estimation on sphere-simplex patches")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Connected components of the patch.
    Components(RunConfig),
    /// Points (or portfolios) drawn uniformly from the patch, as CSV.
    Sample(RunConfig),
    /// Volume of every component, as JSON.
    Volume(RunConfig),
    /// Multi-chain convergence report.
    Diagnose(RunConfig),
    /// Iso-volatility backtest of a returns panel.
    Backtest(RunConfig),
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<isovol::Error>() {
        Some(e) if e.is_numeric() => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Components(c) => commands::components(&c.resolve()?).map(|_| true),
        Command::Sample(c) => commands::sample(&c.resolve()?).map(|_| true),
        Command::Volume(c) => commands::volume(&c.resolve()?).map(|_| true),
        Command::Diagnose(c) => commands::diagnose(&c.resolve()?),
        Command::Backtest(c) => commands::run_backtest(&c.resolve()?).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: convergence gate failed");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
