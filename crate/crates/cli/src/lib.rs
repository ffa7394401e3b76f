//! Command-line front end: CSV ingestion, detection, simulation,
//! cross-validation and benchmarking, with JSON/CSV outputs and run
//! manifests.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod truth;

pub use args::{Cli, Command};
pub use error::{CliError, Result};

/// Environment variable consulted when `--threads` is not given.
pub const THREADS_ENV: &str = "SEGREG_THREADS";

/// Thread count from the flag, else from [`THREADS_ENV`]; `0` means all
/// cores.
pub fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a thread count, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Runs `command` on a pool of `threads` workers and writes its outputs.
pub fn run_with_threads(command: &Command, threads: usize) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    let outputs = pool.install(|| commands::execute(command))?;
    outputs.commit()
}

pub fn run(cli: &Cli) -> Result<()> {
    run_with_threads(&cli.command, thread_count(cli.threads)?)
}
