//! Command dispatch shared by the binary and its tests.

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};
use crate::{bench, solve};

/// Parse an `MPIR_THREADS` value.
pub fn parse_threads(v: Option<&str>) -> CliResult<Option<usize>> {
    let Some(v) = v else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(CliError::InvalidArgument(format!("MPIR_THREADS must be a positive integer, got `{v}`"))),
    }
}

/// Run one command; `Ok(false)` means the solve ended without success.
pub fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Solve(args) => Ok(solve::execute(&args)?.success),
        Command::Bench(args) => {
            let csv = bench::table(&args.table, &args.sizes, args.reps)?.to_csv();
            match &args.out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(true)
        }
    }
}

/// Process exit status: 0 success, 1 unsuccessful solve, 2 error.
pub fn exit_status(r: &CliResult<bool>) -> u8 {
    match r {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(_) => 2,
    }
}
