//! Krylov solvers preconditioned by the low precision factors
//! `P = U⁻¹ L⁻¹ P_r`: GMRES-IR and BiCGSTAB-IR (left preconditioning inside
//! the refinement loop) and one-shot right-preconditioned solves.
//!
//! All Krylov arithmetic is in the working precision; the preconditioner is
//! applied with on-the-fly triangular solves in that precision.

use crate::error::{check_len, MpError, Result};
use crate::ir::{finish, refine, Criteria, SolveReport, Step, TermParams};
use crate::matrix::{axpy, dot, norm2, norm_inf, Matrix};
use crate::mp::{KrylovWorkspace, LowLu, MpFactorization, TrBuffers};
use crate::precision::Real;

/// Default relative reduction of the preconditioned residual per GMRES
/// correction.
pub const GMRES_INNER_TOL: f64 = 1e-6;
/// Default relative reduction per BiCGSTAB correction.
pub const BICGSTAB_INNER_TOL: f64 = 0.1;
/// Default GMRES basis size.
pub const DEFAULT_BASISSIZE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iters: usize,
    /// Final residual estimate relative to the initial one (2-norm).
    pub rel_residual: f64,
    /// The iteration hit a zero divisor and returned its current iterate.
    pub breakdown: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Gmres,
    Bicgstab,
}

struct GmresParts<'a, W> {
    basis: &'a mut Matrix<W>,
    h: &'a mut Matrix<W>,
    givens: &'a mut [(W, W)],
    g: &'a mut [W],
}

fn rotation<W: Real>(a: W, b: W) -> (W, W, W) {
    if b == W::ZERO {
        return (W::ONE, W::ZERO, a);
    }
    let scale = if a.abs() > b.abs() { a.abs() } else { b.abs() };
    let (x, y) = (a / scale, b / scale);
    let r = scale * (x * x + y * y).sqrt();
    (a / r, b / r, r)
}

/// `w = op(v)`.
type Operator<'a, W> = dyn FnMut(&[W], &mut [W]) -> Result<()> + 'a;

/// Unrestarted GMRES with modified Gram-Schmidt and one reorthogonalization.
/// Column 0 of the basis holds the right side on entry; the solution is
/// written to `out`.
fn gmres_core<W: Real>(
    op: &mut Operator<'_, W>,
    parts: GmresParts<'_, W>,
    maxit: usize,
    tol: f64,
    out: &mut [W],
) -> Result<KrylovOutcome> {
    let GmresParts { basis, h, givens, g } = parts;
    let n = basis.nrows();
    let maxit = maxit.min(basis.ncols() - 1);
    let v = basis.as_mut_slice();
    let beta = norm2(&v[..n]);
    out.fill(W::ZERO);
    if beta == W::ZERO {
        return Ok(KrylovOutcome {
            iters: 0,
            rel_residual: 0.0,
            breakdown: false,
        });
    }
    if !beta.is_finite() {
        return Err(MpError::non_finite("GMRES start vector"));
    }
    let inv = W::ONE / beta;
    v[..n].iter_mut().for_each(|x| *x = *x * inv);
    g.fill(W::ZERO);
    g[0] = beta;
    let beta64 = beta.to_f64();

    let mut k = 0;
    let mut breakdown = false;
    while k < maxit {
        let j = k;
        let (done, rest) = v.split_at_mut((j + 1) * n);
        let w = &mut rest[..n];
        op(&done[j * n..], w)?;
        // modified Gram-Schmidt, applied twice
        for i in 0..=j {
            h[(i, j)] = W::ZERO;
        }
        for _ in 0..2 {
            for i in 0..=j {
                let vi = &done[i * n..(i + 1) * n];
                let hij = dot(w, vi);
                h[(i, j)] += hij;
                axpy(-hij, vi, w);
            }
        }
        let hnext = norm2(w);
        if !hnext.is_finite() {
            return Err(MpError::non_finite("Arnoldi step"));
        }
        h[(j + 1, j)] = hnext;
        if hnext != W::ZERO {
            let inv = W::ONE / hnext;
            w.iter_mut().for_each(|x| *x = *x * inv);
        }
        for (i, &(c, s)) in givens.iter().enumerate().take(j) {
            let (a, b) = (h[(i, j)], h[(i + 1, j)]);
            h[(i, j)] = c * a + s * b;
            h[(i + 1, j)] = c * b - s * a;
        }
        let (c, s, r) = rotation(h[(j, j)], h[(j + 1, j)]);
        if r == W::ZERO {
            breakdown = true;
            break;
        }
        givens[j] = (c, s);
        h[(j, j)] = r;
        h[(j + 1, j)] = W::ZERO;
        g[j + 1] = -s * g[j];
        g[j] = c * g[j];
        k += 1;
        if hnext == W::ZERO || g[k].abs().to_f64() <= tol * beta64 {
            break;
        }
    }

    // back substitution for y, stored over g[..k]
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in i + 1..k {
            s -= h[(i, l)] * g[l];
        }
        g[i] = s / h[(i, i)];
    }
    for i in 0..k {
        axpy(g[i], &v[i * n..(i + 1) * n], out);
    }
    let rel = if k < g.len() { g[k].abs().to_f64() / beta64 } else { 0.0 };
    if !out.iter().all(|x| x.is_finite()) {
        return Err(MpError::non_finite("GMRES update"));
    }
    Ok(KrylovOutcome {
        iters: k,
        rel_residual: rel,
        breakdown,
    })
}

/// BiCGSTAB from a zero initial iterate. `vecs[1]` holds the right side on
/// entry and `vecs[0]` the solution on exit.
fn bicgstab_core<W: Real>(
    op: &mut Operator<'_, W>,
    vecs: &mut [Vec<W>; 7],
    maxit: usize,
    tol: f64,
) -> Result<KrylovOutcome> {
    let [x, r, rh, p, v, s, t] = vecs;
    x.fill(W::ZERO);
    let bnorm = norm2(r).to_f64();
    if bnorm == 0.0 {
        return Ok(KrylovOutcome {
            iters: 0,
            rel_residual: 0.0,
            breakdown: false,
        });
    }
    if !bnorm.is_finite() {
        return Err(MpError::non_finite("BiCGSTAB start vector"));
    }
    rh.copy_from_slice(r);
    p.fill(W::ZERO);
    v.fill(W::ZERO);
    let (mut rho, mut alpha, mut omega) = (W::ONE, W::ONE, W::ONE);
    let mut rel = 1.0;
    let done = |iters, rel, breakdown| {
        Ok(KrylovOutcome {
            iters,
            rel_residual: rel,
            breakdown,
        })
    };
    for it in 1..=maxit {
        let rho_new = dot(rh, r);
        if rho_new == W::ZERO {
            return done(it - 1, rel, true);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for ((pi, &ri), &vi) in p.iter_mut().zip(r.iter()).zip(v.iter()) {
            *pi = ri + beta * (*pi - omega * vi);
        }
        op(p, v)?;
        let rv = dot(rh, v);
        if rv == W::ZERO {
            return done(it - 1, rel, true);
        }
        alpha = rho_new / rv;
        for ((si, &ri), &vi) in s.iter_mut().zip(r.iter()).zip(v.iter()) {
            *si = ri - alpha * vi;
        }
        let snorm = norm2(s).to_f64();
        if snorm <= tol * bnorm {
            axpy(alpha, p, x);
            return done(it, snorm / bnorm, false);
        }
        op(s, t)?;
        let tt = dot(t, t);
        if tt == W::ZERO {
            axpy(alpha, p, x);
            return done(it, snorm / bnorm, true);
        }
        omega = dot(t, s) / tt;
        axpy(alpha, p, x);
        axpy(omega, s, x);
        for ((ri, &si), &ti) in r.iter_mut().zip(s.iter()).zip(t.iter()) {
            *ri = si - omega * ti;
        }
        rho = rho_new;
        rel = norm2(r).to_f64() / bnorm;
        if !rel.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return Err(MpError::non_finite("BiCGSTAB update"));
        }
        if rel <= tol {
            return done(it, rel, false);
        }
        if omega == W::ZERO {
            return done(it, rel, true);
        }
    }
    done(maxit, rel, false)
}

/// Solve `P A d = P r` for the correction. The residual `r` (in `R`) is
/// scaled to unit infinity norm and rounded to `W` when `R` is wider, and
/// overwritten with `d`.
pub(crate) fn left_correction<W: Real, R: Real>(
    a: &Matrix<W>,
    lu: &LowLu,
    ws: &mut KrylovWorkspace<W>,
    r: &mut [R],
) -> Result<KrylovOutcome> {
    let n = a.nrows();
    check_len(n, r.len())?;
    let scaled = R::PRECISION != W::PRECISION;
    let rho = if scaled { norm_inf(r) } else { 1.0 };
    if rho == 0.0 {
        r.fill(R::ZERO);
        return Ok(KrylovOutcome {
            iters: 0,
            rel_residual: 0.0,
            breakdown: false,
        });
    }
    let rho_r = R::from_f64(rho);
    let load = |dst: &mut [W], r: &[R]| {
        for (d, &x) in dst.iter_mut().zip(r) {
            *d = if scaled { (x / rho_r).cast() } else { x.cast() };
        }
    };
    let mut op = |v: &[W], w: &mut [W]| {
        a.matvec_into(v, w);
        lu.solve_mps(w)
    };
    let (outcome, d): (KrylovOutcome, &[W]) = match ws {
        KrylovWorkspace::Gmres {
            basis,
            hessenberg,
            givens,
            g,
            rhs,
            basissize,
            tol,
        } => {
            let v0 = &mut basis.as_mut_slice()[..n];
            load(v0, r);
            lu.solve_mps(v0)?;
            let parts = GmresParts {
                basis,
                h: hessenberg,
                givens,
                g,
            };
            let o = gmres_core(&mut op, parts, *basissize, *tol, rhs)?;
            (o, rhs)
        }
        KrylovWorkspace::Bicgstab { vectors, maxiters, tol } => {
            load(&mut vectors[1], r);
            lu.solve_mps(&mut vectors[1])?;
            let o = bicgstab_core(&mut op, vectors, *maxiters, *tol)?;
            (o, &vectors[0])
        }
    };
    for (x, &di) in r.iter_mut().zip(d) {
        *x = if scaled { rho_r * di.cast::<R>() } else { di.cast() };
    }
    Ok(outcome)
}

fn correction_of_kind<W: Real>(
    mpf: &mut MpFactorization<W>,
    r: &[W],
    want: KrylovMethod,
) -> Result<(Vec<W>, KrylovOutcome)> {
    let MpFactorization { core, krylov, .. } = mpf;
    let ws = match (krylov.as_mut(), want) {
        (Some(ws @ KrylovWorkspace::Gmres { .. }), KrylovMethod::Gmres) => ws,
        (Some(ws @ KrylovWorkspace::Bicgstab { .. }), KrylovMethod::Bicgstab) => ws,
        _ => {
            return Err(MpError::InvalidConfig(format!(
                "factorization has no {want:?} workspace"
            )))
        }
    };
    let mut d = r.to_vec();
    let o = left_correction(&core.a_high, &core.lu, ws, &mut d)?;
    Ok((d, o))
}

/// One left-preconditioned GMRES correction `P A d = P r` using the
/// workspace of an [`crate::mp_glu`] factorization.
pub fn gmres_correction<W: Real>(mpf: &mut MpFactorization<W>, r: &[W]) -> Result<(Vec<W>, KrylovOutcome)> {
    correction_of_kind(mpf, r, KrylovMethod::Gmres)
}

/// One left-preconditioned BiCGSTAB correction using the workspace of an
/// [`crate::mp_blu`] factorization.
pub fn bicgstab_correction<W: Real>(mpf: &mut MpFactorization<W>, r: &[W]) -> Result<(Vec<W>, KrylovOutcome)> {
    correction_of_kind(mpf, r, KrylovMethod::Bicgstab)
}

/// Krylov-IR with the factorization's termination parameters.
pub fn krylov_ir_solve<W: Real>(mpf: &mut MpFactorization<W>, b: &[W]) -> Result<SolveReport<W>> {
    let term = mpf.term;
    krylov_ir_solve_with(mpf, b, &term)
}

/// Krylov-IR: the refinement loop of [`crate::ir_solve`] with each
/// correction computed by the workspace's Krylov method.
pub fn krylov_ir_solve_with<W: Real>(mpf: &mut MpFactorization<W>, b: &[W], term: &TermParams) -> Result<SolveReport<W>> {
    let MpFactorization { core, bufs, krylov, .. } = mpf;
    let ws = krylov
        .as_mut()
        .ok_or_else(|| MpError::InvalidConfig("factorization has no Krylov workspace".into()))?;
    let crit = Criteria::for_core(core);
    let (a, lu) = (&core.a_high, &core.lu);
    match &mut bufs.tr {
        TrBuffers::B64 { x, r } => {
            let out = refine(a, b, x, r, term, &crit, |r| {
                let o = left_correction(a, lu, ws, r)?;
                Ok(Step {
                    iters: Some(o.iters),
                    breakdown: o.breakdown,
                })
            })?;
            Ok(finish(x, out))
        }
        TrBuffers::B32 { x, r } => {
            let out = refine(a, b, x, r, term, &crit, |r| {
                let o = left_correction(a, lu, ws, r)?;
                Ok(Step {
                    iters: Some(o.iters),
                    breakdown: o.breakdown,
                })
            })?;
            Ok(finish(x, out))
        }
    }
}

/// Solve `A P z = b` by a single right-preconditioned Krylov run (no
/// refinement) and return `x = P z`. `tol` bounds the relative 2-norm of the
/// unpreconditioned residual.
pub fn direct_precond_solve<W: Real>(
    mpf: &MpFactorization<W>,
    b: &[W],
    method: KrylovMethod,
    maxiters: usize,
    tol: f64,
) -> Result<(Vec<W>, KrylovOutcome)> {
    let n = mpf.n();
    check_len(n, b.len())?;
    if maxiters == 0 {
        return Err(MpError::InvalidParameter("maxiters must be at least 1".into()));
    }
    let a = &mpf.core.a_high;
    let lu = &mpf.core.lu;
    let mut tmp = vec![W::ZERO; n];
    let mut op = |v: &[W], w: &mut [W]| {
        tmp.copy_from_slice(v);
        lu.solve_mps(&mut tmp)?;
        a.matvec_into(&tmp, w);
        Ok(())
    };
    let (mut z, outcome) = match method {
        KrylovMethod::Gmres => {
            let mut ws = KrylovWorkspace::<W>::gmres(n, maxiters)?;
            let KrylovWorkspace::Gmres {
                basis,
                hessenberg,
                givens,
                g,
                rhs,
                ..
            } = &mut ws
            else {
                unreachable!()
            };
            basis.as_mut_slice()[..n].copy_from_slice(b);
            let parts = GmresParts {
                basis,
                h: hessenberg,
                givens,
                g,
            };
            let o = gmres_core(&mut op, parts, maxiters, tol, rhs)?;
            (std::mem::take(rhs), o)
        }
        KrylovMethod::Bicgstab => {
            let mut vecs: [Vec<W>; 7] = std::array::from_fn(|_| vec![W::ZERO; n]);
            vecs[1].copy_from_slice(b);
            let o = bicgstab_core(&mut op, &mut vecs, maxiters, tol)?;
            (std::mem::take(&mut vecs[0]), o)
        }
    };
    if outcome.rel_residual > tol {
        return Err(MpError::NotConverged {
            iters: outcome.iters,
            residual: outcome.rel_residual,
        });
    }
    lu.solve_mps(&mut z)?;
    Ok((z, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::ir_solve;
    use crate::mp::{mp_blu, mp_glu, mp_lu, MpOptions};
    use crate::precision::Precision;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity(n: usize) -> Matrix<f64> {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    fn spd_shifted(n: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Matrix<f64> = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        Matrix::from_fn(n, n, |i, j| {
            let s: f64 = (0..n).map(|k| m[(i, k)] * m[(j, k)]).sum();
            if i == j {
                s + n as f64
            } else {
                s
            }
        })
    }

    // plain Gaussian elimination with partial pivoting
    fn dense_solve(a: &Matrix<f64>, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[(i, j)]).chain([b[i]]).collect()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| m[x][k].abs().total_cmp(&m[y][k].abs())).unwrap();
            m.swap(k, p);
            for i in k + 1..n {
                let l = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= l * m[k][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (m[i][n] - s) / m[i][i];
        }
        x
    }

    fn max_diff(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_converges_in_one_step() {
        let r = [3.0, -4.0, 0.5, 2.0];
        let mut g = mp_glu(&identity(4), &MpOptions::default(), 5).unwrap();
        let (d, o) = gmres_correction(&mut g, &r).unwrap();
        assert_eq!(o.iters, 1);
        assert!(max_diff(&d, &r) <= 4.0 * f64::EPSILON * 4.0);
        let mut b = mp_blu(&identity(4), &MpOptions::default(), 5).unwrap();
        let (d, o) = bicgstab_correction(&mut b, &r).unwrap();
        assert_eq!(o.iters, 1);
        assert!(max_diff(&d, &r) <= 4.0 * f64::EPSILON * 4.0);
    }

    #[test]
    fn zero_residual_gives_zero_correction() {
        let mut g = mp_glu(&identity(3), &MpOptions::default(), 2).unwrap();
        let (d, o) = gmres_correction(&mut g, &[0.0; 3]).unwrap();
        assert_eq!(d, vec![0.0; 3]);
        assert_eq!(o.iters, 0);
    }

    #[test]
    fn corrections_match_dense_oracle() {
        let n = 8;
        let a = spd_shifted(n, 5);
        let r: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
        let want = dense_solve(&a, &r);
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 100.0 * Precision::B64.unit_roundoff() * scale;

        let mut g = mp_glu(&a, &MpOptions::default(), n).unwrap();
        g.krylov_mut().unwrap().set_tolerance(1e-30).unwrap();
        let (d, _) = gmres_correction(&mut g, &r).unwrap();
        assert!(max_diff(&d, &want) <= tol, "gmres {}", max_diff(&d, &want));

        let mut b = mp_blu(&a, &MpOptions::default(), n).unwrap();
        b.krylov_mut().unwrap().set_tolerance(1e-30).unwrap();
        let (d, _) = bicgstab_correction(&mut b, &r).unwrap();
        assert!(max_diff(&d, &want) <= tol, "bicgstab {}", max_diff(&d, &want));
    }

    #[test]
    fn arnoldi_basis_is_orthonormal() {
        let n = 40;
        let m = 6;
        let a: Matrix<f32> = crate::greens::build_matrix(n, 700.0).unwrap();
        let mut g = mp_glu(&a, &MpOptions::default(), m).unwrap();
        let r: Vec<f32> = (0..n).map(|i| 1.0 + (i % 3) as f32).collect();
        let (_, o) = gmres_correction(&mut g, &r).unwrap();
        assert!(o.iters >= 3, "{o:?}");
        let Some(KrylovWorkspace::Gmres { basis, .. }) = g.krylov() else {
            panic!("expected a GMRES workspace")
        };
        let bound = 100.0 * Precision::B32.unit_roundoff() * m as f64;
        for i in 0..=o.iters {
            for j in 0..=o.iters {
                let d = dot(basis.col(i), basis.col(j)) as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).abs() <= bound, "({i},{j}) {d}");
            }
        }
    }

    #[test]
    fn gmres_residual_never_increases() {
        let n = 30;
        let a: Matrix<f32> = crate::greens::build_matrix(n, 780.0).unwrap();
        let r: Vec<f32> = (0..n).map(|i| (i as f32).cos()).collect();
        let mut last = f64::INFINITY;
        for m in 1..=8 {
            let mut g = mp_glu(&a, &MpOptions::default(), m).unwrap();
            g.krylov_mut().unwrap().set_tolerance(1e-30).unwrap();
            let (_, o) = gmres_correction(&mut g, &r).unwrap();
            assert!(o.iters <= m);
            assert!(o.rel_residual <= last, "m={m}");
            last = o.rel_residual;
        }
    }

    #[test]
    fn khist_bounded_by_basis_size() {
        let n = 64;
        let a: Matrix<f32> = crate::greens::build_matrix(n, 790.0).unwrap();
        let b = vec![1.0f32; n];
        let mut g = mp_glu(&a, &MpOptions::default(), 3).unwrap();
        let rep = krylov_ir_solve(&mut g, &b).unwrap();
        assert_eq!(rep.khist.len(), rep.dhist.len());
        assert!(rep.khist.iter().all(|&k| k <= 3));
        let mut bi = mp_blu(&a, &MpOptions::default(), 4).unwrap();
        let rep = krylov_ir_solve(&mut bi, &b).unwrap();
        assert!(rep.khist.iter().all(|&k| k <= 4));
    }

    #[test]
    fn identity_krylov_ir_agrees_with_plain_ir() {
        let n = 5;
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 1.5).collect();
        let opts = MpOptions::default().tf(Precision::B64);
        let plain = ir_solve(&mut mp_lu(&identity(n), &opts).unwrap(), &b).unwrap();
        let kry = krylov_ir_solve(&mut mp_glu(&identity(n), &opts, 4).unwrap(), &b).unwrap();
        assert_eq!(plain.sol, b);
        assert!(max_diff(&kry.sol, &plain.sol) <= 2.0 * f64::EPSILON * 2.5);
        assert_eq!(kry.reason, plain.reason);
        assert_eq!(kry.khist, vec![1]);
    }

    #[test]
    fn wrong_workspace_is_rejected() {
        let mut f = mp_lu(&identity(3), &MpOptions::default()).unwrap();
        assert!(matches!(gmres_correction(&mut f, &[1.0; 3]), Err(MpError::InvalidConfig(_))));
        assert!(matches!(krylov_ir_solve(&mut f, &[1.0; 3]), Err(MpError::InvalidConfig(_))));
        let mut g = mp_glu(&identity(3), &MpOptions::default(), 2).unwrap();
        assert!(matches!(bicgstab_correction(&mut g, &[1.0; 3]), Err(MpError::InvalidConfig(_))));
    }

    #[test]
    fn direct_solve_of_identity() {
        let f = mp_lu(&identity(4), &MpOptions::default()).unwrap();
        let b = [1.0, 2.0, -3.0, 0.25];
        for method in [KrylovMethod::Gmres, KrylovMethod::Bicgstab] {
            let (x, o) = direct_precond_solve(&f, &b, method, 5, 1e-12).unwrap();
            assert_eq!(o.iters, 1);
            assert!(max_diff(&x, &b) <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn direct_solve_errors() {
        let f = mp_lu(&identity(4), &MpOptions::default()).unwrap();
        assert!(matches!(
            direct_precond_solve(&f, &[1.0; 3], KrylovMethod::Gmres, 5, 1e-8),
            Err(MpError::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(direct_precond_solve(&f, &[1.0; 4], KrylovMethod::Bicgstab, 0, 1e-8).is_err());
        // one step cannot resolve a hard problem
        let a = crate::greens::build_matrix::<f64>(64, 795.0).unwrap();
        let f = mp_lu(&a, &MpOptions::default().tf(Precision::B16)).unwrap();
        assert!(matches!(
            direct_precond_solve(&f, &[1.0; 64], KrylovMethod::Gmres, 1, 1e-12),
            Err(MpError::NotConverged { iters: 1, .. })
        ));
    }

    #[test]
    fn direct_solve_beats_failed_plain_ir() {
        let n = 256;
        let p = crate::greens::build_problem::<f32>(n, 800.0, crate::greens::Rhs::Manufactured).unwrap();
        let mut f = mp_lu(&p.a, &MpOptions::default().on_the_fly(false)).unwrap();
        let plain = ir_solve(&mut f, &p.b).unwrap();
        let (x, _) = direct_precond_solve(&f, &p.b, KrylovMethod::Gmres, 40, 1e-5).unwrap();
        let r = crate::ir::residual_tr(&f, &x, &p.b).unwrap();
        assert!(norm_inf(&r) < plain.final_residual());
    }
}
