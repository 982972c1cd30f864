mod analyze;
mod config;
mod extend;
mod failure;
mod output;
mod selftest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, Format, RunConfig};
use failure::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "nullitylab",
    version,
    about = "Nullity analysis of parametric Euclidean submanifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every point of a sample grid.
    Analyze(CommonArgs),
    /// Build the ruled extension (or run the ruled-case checks) over a grid.
    Extend(CommonArgs),
    /// Run the invariant suite over the catalog or a manifest.
    Selftest(CommonArgs),
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("NULLITYLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::Config(format!(
            "NULLITYLAB_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Analyze(a) => analyze::run(&RunConfig::from_args(a, Format::Json)?),
        Command::Extend(a) => extend::run(&RunConfig::from_args(a, Format::Json)?),
        Command::Selftest(a) => selftest::run(&RunConfig::from_args(a, Format::Text)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nullitylab: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
