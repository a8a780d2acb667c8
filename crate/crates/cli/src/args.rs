use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mpir_core::greens::Rhs;
use mpir_core::Precision;

#[derive(Debug, Parser)]
#[command(name = "mpir", version, about = "Mixed-precision iterative refinement experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one Green's function test problem and report the iteration history.
    Solve(SolveArgs),
    /// Reproduce one of the timing or accuracy tables as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ir,
    GmresIr,
    BicgstabIr,
    DirectPrecond,
    PlainLu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsArg {
    Manufactured,
    Integral,
    Ones,
}

impl From<RhsArg> for Rhs {
    fn from(r: RhsArg) -> Rhs {
        match r {
            RhsArg::Manufactured => Rhs::Manufactured,
            RhsArg::Integral => Rhs::Integral,
            RhsArg::Ones => Rhs::Ones,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Working precision (f64 or f32).
    #[arg(long, default_value = "f64", value_parser = parse_precision)]
    pub tw: Precision,
    /// Factorization precision; defaults to one step below the working precision.
    #[arg(long, value_parser = parse_precision)]
    pub tf: Option<Precision>,
    /// Residual precision; defaults to the working precision.
    #[arg(long, value_parser = parse_precision)]
    pub tr: Option<Precision>,
    #[arg(long, value_enum, default_value = "ir")]
    pub method: Method,
    #[arg(long)]
    pub onthefly: Option<bool>,
    #[arg(long)]
    pub residterm: Option<bool>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub litmax: Option<usize>,
    /// GMRES basis size, BiCGSTAB iteration budget, or the iteration cap of a direct preconditioned solve.
    #[arg(long, default_value_t = 10)]
    pub basissize: usize,
    /// Residual tolerance for direct-precond.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "manufactured")]
    pub rhs: RhsArg,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append a CSV summary row, writing the header if the file is new.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// halftime, solvecomp, ip1, ip2 or ip3.
    #[arg(long)]
    pub table: String,
    /// Comma separated dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = [512usize, 1024, 2048])]
    pub sizes: Vec<usize>,
    /// Timed repetitions per entry after one warmup; at least 5.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse().map_err(|e: mpir_core::MpError| e.to_string())
}
