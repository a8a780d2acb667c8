//! Timing and accuracy tables. Times are medians of wall-clock seconds
//! after one untimed warmup.

use std::hint::black_box;
use std::time::Instant;

use mpir_core::greens::{build_matrix, build_problem, Rhs};
use mpir_core::{
    demote_matrix, f16, ir_solve, lu_factor, lu_factor_half, matrix_one_norm, mp_lu, norm_inf, solve_lps, solve_mps,
    Matrix, MpOptions, Precision,
};

use crate::error::{CliError, CliResult};
use crate::format::{csv_line, sci};

pub const TABLES: [&str; 5] = ["halftime", "solvecomp", "ip1", "ip2", "ip3"];
pub const MIN_REPS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    /// One row per size; the first entry is `N`.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| *h == name)?.checked_sub(1)?;
        Some(self.rows.iter().map(|(_, r)| r[k]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = csv_line(&self.header);
        for (n, row) in &self.rows {
            let mut fields = vec![n.to_string()];
            fields.extend(row.iter().map(|&v| sci(v)));
            s.push_str(&csv_line(&fields));
        }
        s
    }
}

/// Median time of `run` over `reps` calls, each on a fresh `setup()` value.
pub fn median_time<S, T>(reps: usize, mut setup: impl FnMut() -> S, mut run: impl FnMut(S) -> T) -> f64 {
    black_box(run(setup()));
    let mut t: Vec<f64> = (0..reps)
        .map(|_| {
            let s = setup();
            let start = Instant::now();
            black_box(run(s));
            start.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let m = t.len() / 2;
    if t.len() % 2 == 1 {
        t[m]
    } else {
        0.5 * (t[m - 1] + t[m])
    }
}

pub fn table(name: &str, sizes: &[usize], reps: usize) -> CliResult<Table> {
    if reps < MIN_REPS {
        return Err(CliError::InvalidArgument(format!("at least {MIN_REPS} timed runs are needed, got {reps}")));
    }
    let row: fn(usize, usize) -> CliResult<Vec<f64>> = match name {
        "halftime" => halftime_row,
        "solvecomp" => solvecomp_row,
        "ip1" => ip1_row,
        "ip2" => |n, reps| accuracy_row(n, 1.0, reps),
        "ip3" => |n, reps| accuracy_row(n, 800.0, reps),
        other => return Err(CliError::UnknownTable(other.to_string())),
    };
    let header = match name {
        "halftime" => vec!["N", "Double", "Single", "Half", "Ratio"],
        "solvecomp" => vec!["N", "LU", "TS", "TOTL", "MPLU", "MPS", "TOT", "OPNORM"],
        "ip1" => vec!["N", "MV64", "LU32", "HPS", "MPS", "LPS", "LU32/MPS"],
        _ => vec!["N", "ELP", "EMP", "RLP", "RMP", "TLP", "TMP"],
    };
    let rows = sizes
        .iter()
        .map(|&n| Ok((n, row(n, reps)?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Table { header, rows })
}

/// LU times for `I - 800 G` in each precision; the ratio is half over double.
fn halftime_row(n: usize, reps: usize) -> CliResult<Vec<f64>> {
    let a: Matrix<f64> = build_matrix(n, 800.0)?;
    let a32: Matrix<f32> = demote_matrix(&a)?.matrix;
    let a16: Matrix<f16> = demote_matrix(&a)?.matrix;
    let d = median_time(reps, || a.clone(), lu_factor);
    let s = median_time(reps, || a32.clone(), lu_factor);
    let h = median_time(reps, || a16.clone(), lu_factor_half);
    Ok(vec![d, s, h, h / d])
}

/// Plain double LU and solve against the multiprecision factor and IR
/// solve, for `I - G`.
fn solvecomp_row(n: usize, reps: usize) -> CliResult<Vec<f64>> {
    let p = build_problem::<f64>(n, 1.0, Rhs::Manufactured)?;
    let lu = median_time(reps, || p.a.clone(), lu_factor);
    let f = lu_factor(p.a.clone())?;
    let ts = median_time(reps, || (), |_| solve_mps(&f, &p.b));
    let opts = MpOptions::default();
    let mplu = median_time(reps, || (), |_| mp_lu(&p.a, &opts));
    let mut mpf = mp_lu(&p.a, &opts)?;
    let mps = median_time(reps, || (), |_| ir_solve(&mut mpf, &p.b).map(|r| r.sol));
    let opnorm = median_time(reps, || (), |_| matrix_one_norm(&p.a));
    Ok(vec![lu, ts, lu + ts, mplu, mps, mplu + mps, opnorm])
}

/// Costs of the pieces of one refinement step for `I - 800 G`: a double
/// matvec, a single LU, and triangular solves with double factors (HPS),
/// promoted single factors (MPS) and scaled in-place single solves (LPS).
fn ip1_row(n: usize, reps: usize) -> CliResult<Vec<f64>> {
    let p = build_problem::<f64>(n, 800.0, Rhs::Manufactured)?;
    let a32: Matrix<f32> = demote_matrix(&p.a)?.matrix;
    let mv = median_time(reps, || (), |_| p.a.matvec(&p.b));
    let lu32 = median_time(reps, || a32.clone(), lu_factor);
    let f64f = lu_factor(p.a.clone())?;
    let f32f = lu_factor(a32)?;
    let hps = median_time(reps, || (), |_| solve_mps(&f64f, &p.b));
    let mps = median_time(reps, || (), |_| solve_mps(&f32f, &p.b));
    let lps = median_time(reps, || (), |_| solve_lps(&f32f, &p.b));
    Ok(vec![mv, lu32, hps, mps, lps, lu32 / mps])
}

/// Relative error, relative residual and IR time for double/single
/// refinement in LPS and MPS mode.
fn accuracy_row(n: usize, alpha: f64, reps: usize) -> CliResult<Vec<f64>> {
    let p = build_problem::<f64>(n, alpha, Rhs::Manufactured)?;
    let bnorm = norm_inf(&p.b);
    let mut out = [[0.0; 3]; 2];
    for (k, otf) in [false, true].into_iter().enumerate() {
        let mut f = mp_lu(&p.a, &MpOptions::default().tf(Precision::B32).on_the_fly(otf))?;
        let rep = ir_solve(&mut f, &p.b)?;
        let err = rep.sol.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
        let time = median_time(reps, || (), |_| ir_solve(&mut f, &p.b).map(|r| r.sol));
        out[k] = [err, rep.final_residual() / bnorm, time];
    }
    let [lps, mps] = out;
    Ok(vec![lps[0], mps[0], lps[1], mps[1], lps[2], mps[2]])
}
