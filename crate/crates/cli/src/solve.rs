//! One solve of a Green's function problem, reported as JSON and CSV.

use std::fs::OpenOptions;
use std::io::Write;
use std::time::Instant;

use mpir_core::greens::{build_problem, GreensProblem};
use mpir_core::{
    direct_precond_solve, ir_solve_with, krylov_ir_solve_with, lu_factor, mp_blu, mp_glu, mp_lu, norm_inf, solve_mps,
    update_parms, KrylovMethod, Matrix, MpOptions, Precision, Real, Reason, SolveReport,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::args::{Method, SolveArgs};
use crate::error::{CliError, CliResult};
use crate::format::{csv_line, sci};

/// JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// `‖x - x*‖∞`, absent when the right side has no known solution.
    pub sol_norm_err: Option<f64>,
    pub rhist: Vec<f64>,
    pub dhist: Vec<f64>,
    pub khist: Vec<usize>,
    pub reason: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    /// `‖b - A x‖∞ / ‖b‖∞` with the products accumulated in binary64.
    pub rel_residual: f64,
    /// Exit status 0.
    pub success: bool,
}

pub const CSV_HEADER: [&str; 11] = [
    "n", "alpha", "tw", "tf", "tr", "method", "iterations", "reason", "rel_residual", "sol_norm_err", "seconds",
];

/// Stagnation of the correction is how a run with an extended residual
/// normally ends, so it counts as success here along with the residual tests.
pub fn reason_ok(reason: Reason) -> bool {
    reason.is_success() || reason == Reason::CorrectionStagnation
}

pub fn run(args: &SolveArgs) -> CliResult<Outcome> {
    match args.tw {
        Precision::B64 => run_in::<f64>(args),
        Precision::B32 => run_in::<f32>(args),
        Precision::B16 => Err(CliError::InvalidArgument("binary16 cannot be the working precision".into())),
    }
}

fn run_in<W: Real>(args: &SolveArgs) -> CliResult<Outcome> {
    let p: GreensProblem<W> = build_problem(args.n, args.alpha, args.rhs.into())?;
    let opts = MpOptions {
        tf: args.tf,
        tr: args.tr,
        resid_term: args.residterm,
        on_the_fly: args.onthefly,
    };
    let term = update_parms(None, None, args.rmax, args.litmax)?;

    let start = Instant::now();
    let (sol, rhist, dhist, khist, reason, success) = match args.method {
        Method::Ir => {
            let mut f = mp_lu(&p.a, &opts)?;
            unpack(ir_solve_with(&mut f, &p.b, &term)?)
        }
        Method::GmresIr => {
            let mut f = mp_glu(&p.a, &opts, args.basissize)?;
            unpack(krylov_ir_solve_with(&mut f, &p.b, &term)?)
        }
        Method::BicgstabIr => {
            let mut f = mp_blu(&p.a, &opts, args.basissize)?;
            unpack(krylov_ir_solve_with(&mut f, &p.b, &term)?)
        }
        Method::DirectPrecond => {
            let f = mp_lu(&p.a, &opts)?;
            let (x, out) = direct_precond_solve(&f, &p.b, KrylovMethod::Gmres, args.basissize, args.tol)?;
            let r = residual_inf(&p.a, &p.b, &x);
            let rh = vec![norm_inf(&p.b), r];
            let reason = if out.breakdown { "Breakdown" } else { "Converged" };
            (x, rh, Vec::new(), vec![out.iters], reason.to_string(), true)
        }
        Method::PlainLu => {
            let f = lu_factor(p.a.clone())?;
            let x = solve_mps(&f, &p.b)?;
            let r = residual_inf(&p.a, &p.b, &x);
            let d = norm_inf(&x);
            (x, vec![norm_inf(&p.b), r], vec![d], Vec::new(), "Direct".to_string(), true)
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    let bnorm = norm_inf(&p.b);
    let rel_residual = residual_inf(&p.a, &p.b, &sol) / if bnorm > 0.0 { bnorm } else { 1.0 };
    let sol_norm_err = p.x_star.as_ref().map(|xs| {
        sol.iter().zip(xs).map(|(a, b)| (a.to_f64() - b.to_f64()).abs()).fold(0.0, f64::max)
    });
    Ok(Outcome {
        report: Report {
            sol_norm_err,
            rhist,
            dhist,
            khist,
            reason,
            seconds,
        },
        rel_residual,
        success,
    })
}

type Unpacked<W> = (Vec<W>, Vec<f64>, Vec<f64>, Vec<usize>, String, bool);

fn unpack<W>(r: SolveReport<W>) -> Unpacked<W> {
    let ok = reason_ok(r.reason);
    (r.sol, r.rhist, r.dhist, r.khist, r.reason.name().to_string(), ok)
}

/// `‖b - A x‖∞` with every product and sum in binary64.
pub fn residual_inf<W: Real>(a: &Matrix<W>, b: &[W], x: &[W]) -> f64 {
    let mut r: Vec<f64> = b.iter().map(|v| v.to_f64()).collect();
    for (j, xj) in x.iter().enumerate() {
        let xj = xj.to_f64();
        for (ri, aij) in r.iter_mut().zip(a.col(j)) {
            *ri -= aij.to_f64() * xj;
        }
    }
    norm_inf(&r)
}

pub fn csv_row(args: &SolveArgs, out: &Outcome) -> String {
    let prec = |p: Option<Precision>| p.map_or_else(|| "default".to_string(), |p| p.name().to_string());
    let method = args.method.to_possible_value().map_or_else(String::new, |v| v.get_name().to_string());
    csv_line(&[
        args.n.to_string(),
        sci(args.alpha),
        args.tw.name().to_string(),
        prec(args.tf),
        prec(args.tr),
        method,
        out.report.rhist.len().to_string(),
        out.report.reason.clone(),
        sci(out.rel_residual),
        out.report.sol_norm_err.map_or_else(|| "NA".to_string(), sci),
        sci(out.report.seconds),
    ])
}

/// Print or write the JSON report, append the CSV row if asked, and return
/// the outcome.
pub fn execute(args: &SolveArgs) -> CliResult<Outcome> {
    let out = run(args)?;
    let json = serde_json::to_string_pretty(&out.report)?;
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    if let Some(path) = &args.csv {
        let fresh = !path.exists();
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if fresh {
            file.write_all(csv_line(&CSV_HEADER).as_bytes())?;
        }
        file.write_all(csv_row(args, &out).as_bytes())?;
    }
    Ok(out)
}
