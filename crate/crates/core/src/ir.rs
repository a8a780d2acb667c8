//! The refinement loop and its termination rules.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, MpError, Result};
use crate::matrix::{gemv_acc, norm_inf, Matrix};
use crate::mp::{MpCore, MpFactorization, SolveBuffers, TrBuffers};
use crate::precision::Real;

/// Termination constants.
///
/// Success is `‖r‖ ≤ cr·ε·‖b‖` (or `‖r‖ ≤ ce·ε·(‖b‖ + ‖A‖‖x‖)` when
/// terminating on backward error), with `ε` the machine epsilon of the
/// working precision; stagnation is a residual or correction
/// norm that fails to drop below `rmax` times its predecessor, and at most
/// `litmax` residuals are computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermParams {
    pub cr: f64,
    pub ce: f64,
    pub rmax: f64,
    pub litmax: usize,
}

impl Default for TermParams {
    fn default() -> Self {
        TermParams {
            cr: 1.0,
            ce: 1.0,
            rmax: 0.5,
            litmax: 10,
        }
    }
}

impl TermParams {
    pub fn new(cr: f64, ce: f64, rmax: f64, litmax: usize) -> Result<Self> {
        if !(cr > 0.0 && cr.is_finite()) {
            return Err(MpError::InvalidParameter(format!("cr must be positive, got {cr}")));
        }
        if !(ce > 0.0 && ce.is_finite()) {
            return Err(MpError::InvalidParameter(format!("ce must be positive, got {ce}")));
        }
        if !(rmax > 0.0 && rmax < 1.0) {
            return Err(MpError::InvalidParameter(format!("rmax must lie in (0, 1), got {rmax}")));
        }
        if litmax < 2 {
            return Err(MpError::InvalidParameter(format!("litmax must be at least 2, got {litmax}")));
        }
        Ok(TermParams { cr, ce, rmax, litmax })
    }
}

/// Build a parameter set, keeping the default for every `None`.
pub fn update_parms(cr: Option<f64>, ce: Option<f64>, rmax: Option<f64>, litmax: Option<usize>) -> Result<TermParams> {
    let d = TermParams::default();
    TermParams::new(
        cr.unwrap_or(d.cr),
        ce.unwrap_or(d.ce),
        rmax.unwrap_or(d.rmax),
        litmax.unwrap_or(d.litmax),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Reason {
    SmallResidual,
    SmallBackwardError,
    ResidualStagnation,
    CorrectionStagnation,
    IterationLimit,
}

impl Reason {
    /// The residual or backward error test was met.
    pub fn is_success(self) -> bool {
        matches!(self, Reason::SmallResidual | Reason::SmallBackwardError)
    }

    pub fn name(self) -> &'static str {
        match self {
            Reason::SmallResidual => "SmallResidual",
            Reason::SmallBackwardError => "SmallBackwardError",
            Reason::ResidualStagnation => "ResidualStagnation",
            Reason::CorrectionStagnation => "CorrectionStagnation",
            Reason::IterationLimit => "IterationLimit",
        }
    }
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Solution and iteration statistics.
///
/// `rhist[0] = ‖b‖∞`; `rhist[k]` is the residual after `k` corrections and
/// `dhist[k-1]` the norm of the `k`-th correction, so
/// `rhist.len() == dhist.len() + 1`. All norms are infinity norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<W> {
    pub sol: Vec<W>,
    pub rhist: Vec<f64>,
    pub dhist: Vec<f64>,
    /// Krylov iterations per correction; empty for plain refinement.
    pub khist: Vec<usize>,
    pub reason: Reason,
    /// Some inner Krylov solve broke down and returned its current iterate.
    pub breakdown: bool,
}

impl<W> SolveReport<W> {
    /// Residual computations performed, counting `r = b` as the first.
    pub fn iterations(&self) -> usize {
        self.rhist.len()
    }

    pub fn final_residual(&self) -> f64 {
        *self.rhist.last().expect("history is never empty")
    }
}

/// `r = b - A x` with `A`, `b` and `x` promoted to `R` entry by entry.
/// No copy of `A` in `R` is formed.
pub fn residual_into<W: Real, X: Real, R: Real>(a: &Matrix<W>, b: &[W], x: &[X], r: &mut [R]) -> Result<()> {
    check_len(a.nrows(), b.len())?;
    check_len(a.ncols(), x.len())?;
    check_len(a.nrows(), r.len())?;
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi.cast();
    }
    gemv_acc(a, x, r, -R::ONE);
    if r.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MpError::non_finite("residual"))
    }
}

/// Residual of `x` for the factorization's matrix, evaluated in the residual
/// precision and returned widened to `f64`.
pub fn residual_tr<W: Real>(mpf: &MpFactorization<W>, x: &[W], b: &[W]) -> Result<Vec<f64>> {
    let a = mpf.matrix();
    match mpf.precisions().tr {
        crate::Precision::B64 => {
            let mut r = vec![0.0f64; a.nrows()];
            residual_into(a, b, x, &mut r)?;
            Ok(r)
        }
        _ => {
            let mut r = vec![0.0f32; a.nrows()];
            residual_into(a, b, x, &mut r)?;
            Ok(r.into_iter().map(f64::from).collect())
        }
    }
}

pub(crate) struct Criteria {
    pub resid_term: bool,
    pub extended: bool,
    pub a_norm1: f64,
    pub eps_w: f64,
}

impl Criteria {
    pub(crate) fn for_core<W: Real>(core: &MpCore<W>) -> Self {
        let p = core.config.precisions;
        Criteria {
            resid_term: core.config.resid_term,
            extended: p.extended_residual(),
            a_norm1: core.a_norm1,
            eps_w: p.tw.epsilon(),
        }
    }
}

pub(crate) struct Outcome {
    pub rhist: Vec<f64>,
    pub dhist: Vec<f64>,
    pub khist: Vec<usize>,
    pub reason: Reason,
    pub breakdown: bool,
}

/// Result of one correction: Krylov iterations (if any) and a breakdown flag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Step {
    pub iters: Option<usize>,
    pub breakdown: bool,
}

/// The refinement loop. `x` and `r` live in the residual precision `R`;
/// `correct` overwrites a residual with the correction.
pub(crate) fn refine<W: Real, R: Real>(
    a: &Matrix<W>,
    b: &[W],
    x: &mut [R],
    r: &mut [R],
    term: &TermParams,
    crit: &Criteria,
    mut correct: impl FnMut(&mut [R]) -> Result<Step>,
) -> Result<Outcome> {
    check_len(a.nrows(), b.len())?;
    check_len(a.nrows(), x.len())?;
    if !b.iter().all(|v| v.is_finite()) {
        return Err(MpError::InvalidParameter("right side has non-finite entries".into()));
    }
    x.fill(R::ZERO);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi.cast();
    }
    let bnorm = norm_inf(b);
    let mut rhist = vec![bnorm];
    let mut dhist = Vec::new();
    let mut khist = Vec::new();
    let mut breakdown = false;
    let fail = |e: MpError, rh: &[f64], dh: &[f64]| e.with_history(rh, dh);

    let reason = loop {
        let step = correct(r).map_err(|e| fail(e, &rhist, &dhist))?;
        breakdown |= step.breakdown;
        if let Some(k) = step.iters {
            khist.push(k);
        }
        let dnorm = norm_inf(r);
        for (xi, &di) in x.iter_mut().zip(r.iter()) {
            *xi += di;
        }
        dhist.push(dnorm);
        residual_into(a, b, x, r).map_err(|e| fail(e, &rhist, &dhist))?;
        let rnorm = norm_inf(r);
        let rold = *rhist.last().unwrap();
        rhist.push(rnorm);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(fail(MpError::non_finite("solution update"), &rhist, &dhist));
        }

        if rnorm == 0.0 {
            break Reason::SmallResidual;
        }
        if crit.extended {
            if dhist.len() >= 2 && dnorm >= term.rmax * dhist[dhist.len() - 2] {
                break Reason::CorrectionStagnation;
            }
        } else {
            if crit.resid_term {
                if rnorm <= term.cr * crit.eps_w * bnorm {
                    break Reason::SmallResidual;
                }
            } else if rnorm <= term.ce * crit.eps_w * (bnorm + crit.a_norm1 * norm_inf(x)) {
                break Reason::SmallBackwardError;
            }
            if rnorm >= term.rmax * rold {
                break Reason::ResidualStagnation;
            }
        }
        if rhist.len() >= term.litmax {
            break Reason::IterationLimit;
        }
    };
    Ok(Outcome {
        rhist,
        dhist,
        khist,
        reason,
        breakdown,
    })
}

pub(crate) fn finish<W: Real, R: Real>(x: &[R], out: Outcome) -> SolveReport<W> {
    SolveReport {
        sol: x.iter().map(|v| v.cast()).collect(),
        rhist: out.rhist,
        dhist: out.dhist,
        khist: out.khist,
        reason: out.reason,
        breakdown: out.breakdown,
    }
}

fn run_plain<W: Real>(core: &MpCore<W>, b: &[W], term: &TermParams, bufs: &mut SolveBuffers) -> Result<SolveReport<W>> {
    check_len(core.n(), bufs.len())?;
    let crit = Criteria::for_core(core);
    let SolveBuffers { tr, low } = bufs;
    match tr {
        TrBuffers::B64 { x, r } => {
            let out = refine(&core.a_high, b, x, r, term, &crit, |r| {
                core.correct(r, low).map(|_| Step::default())
            })?;
            Ok(finish(x, out))
        }
        TrBuffers::B32 { x, r } => {
            let out = refine(&core.a_high, b, x, r, term, &crit, |r| {
                core.correct(r, low).map(|_| Step::default())
            })?;
            Ok(finish(x, out))
        }
    }
}

/// Iterative refinement with the factorization's own buffers and
/// termination parameters.
pub fn ir_solve<W: Real>(mpf: &mut MpFactorization<W>, b: &[W]) -> Result<SolveReport<W>> {
    let term = mpf.term;
    run_plain(&mpf.core, b, &term, &mut mpf.bufs)
}

/// As [`ir_solve`] with explicit termination parameters.
pub fn ir_solve_with<W: Real>(mpf: &mut MpFactorization<W>, b: &[W], term: &TermParams) -> Result<SolveReport<W>> {
    run_plain(&mpf.core, b, term, &mut mpf.bufs)
}

/// Refinement against a shared factorization with caller-owned buffers,
/// for solving several right sides concurrently.
pub fn ir_solve_buffered<W: Real>(
    mpf: &MpFactorization<W>,
    b: &[W],
    term: &TermParams,
    bufs: &mut SolveBuffers,
) -> Result<SolveReport<W>> {
    run_plain(&mpf.core, b, term, bufs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mp::{mp_lu, MpOptions};
    use crate::Precision;

    #[test]
    fn parameter_defaults_and_updates() {
        let d = update_parms(None, None, None, None).unwrap();
        assert_eq!(d, TermParams { cr: 1.0, ce: 1.0, rmax: 0.5, litmax: 10 });
        let t = update_parms(None, None, Some(0.1), None).unwrap();
        assert_eq!(t, TermParams { rmax: 0.1, ..d });
        assert!(matches!(update_parms(None, None, Some(1.5), None), Err(MpError::InvalidParameter(_))));
        assert!(update_parms(Some(0.0), None, None, None).is_err());
        assert!(update_parms(None, None, None, Some(1)).is_err());
    }

    #[test]
    fn identity_converges_in_one_correction() {
        let a = Matrix::<f64>::identity(5);
        let b = [1.0, -2.5, 3.25, 0.0, 7.0];
        let mut f = mp_lu(&a, &MpOptions::default().on_the_fly(true)).unwrap();
        let rep = ir_solve(&mut f, &b).unwrap();
        assert_eq!(rep.reason, Reason::SmallResidual);
        assert_eq!(rep.rhist, vec![7.0, 0.0]);
        assert_eq!(rep.dhist, vec![7.0]);
        assert_eq!(rep.sol, b.to_vec());

        // the in-place path rounds r/ρ to binary32, so more passes are needed
        let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
        let rep = ir_solve(&mut f, &b).unwrap();
        assert_eq!(rep.reason, Reason::SmallResidual);
        assert!(rep.rhist.len() > 2, "{:?}", rep.rhist);
        assert!(rep.final_residual() < Precision::B64.epsilon() * 7.0);
    }

    #[test]
    fn zero_right_side() {
        let a = Matrix::<f64>::identity(3);
        let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
        let rep = ir_solve(&mut f, &[0.0; 3]).unwrap();
        assert_eq!(rep.reason, Reason::SmallResidual);
        assert_eq!(rep.rhist.len(), 2);
        assert_eq!(rep.sol, vec![0.0; 3]);
    }

    #[test]
    fn residual_of_exact_diagonal_solution_is_zero() {
        let a = Matrix::from_rows(&[[2.0f32, 0.0], [0.0, 8.0]]);
        let mut r = [1.0f32; 2];
        residual_into(&a, &[1.0, 2.0], &[0.5f32, 0.25], &mut r).unwrap();
        assert_eq!(r, [0.0, 0.0]);
    }

    #[test]
    fn residual_at_zero_is_b() {
        let a = Matrix::from_rows(&[[1.5f32, 2.0], [3.0, 4.0]]);
        let b = [0.1f32, 0.2];
        let mut r = [0.0f64; 2];
        residual_into(&a, &b, &[0.0f32; 2], &mut r).unwrap();
        assert_eq!(r, [0.1f32 as f64, 0.2f32 as f64]);
    }

    #[test]
    fn promoted_residual_matches_oracle_bitwise() {
        let n = 150;
        let a: Matrix<f32> = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f32 / 7.0 - 0.6);
        let b: Vec<f32> = (0..n).map(|i| (i as f32).sin()).collect();
        let x: Vec<f32> = (0..n).map(|i| (i as f32 * 0.3).cos()).collect();
        let mut r = vec![0.0f64; n];
        residual_into(&a, &b, &x, &mut r).unwrap();
        // oracle: promoted copies; sums of 16-column blocks combined by a
        // binary tree over the leading power-of-two run of blocks, then the
        // smaller runs, smallest first
        fn tree(p: &[f64]) -> f64 {
            if p.len() == 1 {
                p[0]
            } else {
                let (l, r) = p.split_at(p.len() / 2);
                tree(r) + tree(l)
            }
        }
        let a64: Matrix<f64> = a.cast();
        let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        for i in 0..n {
            let blocks: Vec<f64> = x64
                .chunks(16)
                .enumerate()
                .map(|(k, xs)| xs.iter().enumerate().fold(0.0, |s, (t, &xj)| s + a64[(i, 16 * k + t)] * -xj))
                .collect();
            let mut runs = Vec::new();
            let mut rest = &blocks[..];
            while !rest.is_empty() {
                let len = 1 << rest.len().ilog2();
                runs.push(tree(&rest[..len]));
                rest = &rest[len..];
            }
            let total = runs.iter().rev().fold(0.0, |s, v| s + v);
            assert_eq!(r[i], b[i] as f64 + total, "row {i}");
        }
    }

    #[test]
    fn buffered_solve_matches_shared_buffers() {
        let n = 30;
        let a: Matrix<f64> = Matrix::from_fn(n, n, |i, j| if i == j { 3.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut f = mp_lu(&a, &MpOptions::default()).unwrap();
        let mut bufs = SolveBuffers::for_factorization(&f);
        let one = ir_solve_buffered(&f, &b, &TermParams::default(), &mut bufs).unwrap();
        let two = ir_solve(&mut f, &b).unwrap();
        assert_eq!(one, two);
    }

    #[test]
    fn backward_error_termination() {
        let n = 20;
        let a: Matrix<f64> = Matrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.01 * ((i + 2 * j) % 5) as f64 });
        let b = vec![1.0; n];
        let mut f = mp_lu(&a, &MpOptions::default().resid_term(false)).unwrap();
        let rep = ir_solve(&mut f, &b).unwrap();
        assert!(rep.reason == Reason::SmallBackwardError || rep.reason == Reason::SmallResidual);
        let eps = Precision::B64.epsilon();
        let bound = eps * (1.0 + f.a_norm1() * norm_inf(&rep.sol));
        assert!(rep.final_residual() < bound);
    }
}
