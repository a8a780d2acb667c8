use std::process::ExitCode;

use clap::Parser;
use mpir_experiments::app::{exit_status, parse_threads, run};
use mpir_experiments::args::Cli;
use mpir_experiments::{CliError, CliResult};

fn configure_threads() -> CliResult<()> {
    if let Some(n) = parse_threads(std::env::var("MPIR_THREADS").ok().as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| run(cli));
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_status(&result))
}
