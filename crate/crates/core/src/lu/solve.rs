use super::LuFactors;
use crate::error::{check_len, MpError, Result};
use crate::matrix::norm_inf;
use crate::precision::Real;

/// Mixed precision solve: `L U d = P r` with each factor entry promoted to
/// the vector format `S` at use. Overwrites `r` with `d`.
///
/// Substitution is column oriented (axpy form) for unit-stride access.
pub fn solve_mps_in_place<F: Real, S: Real>(f: &LuFactors<F>, r: &mut [S]) -> Result<()> {
    let n = f.n();
    check_len(n, r.len())?;
    f.apply_swaps(r);
    let lu = f.packed();
    for k in 0..n {
        let rk = r[k];
        if rk == S::ZERO {
            continue;
        }
        let col = &lu.col(k)[k + 1..];
        for (ri, &l) in r[k + 1..].iter_mut().zip(col) {
            *ri -= l.cast::<S>() * rk;
        }
    }
    for k in (0..n).rev() {
        let col = lu.col(k);
        r[k] = r[k] / col[k].cast::<S>();
        let rk = r[k];
        if rk == S::ZERO {
            continue;
        }
        for (ri, &u) in r[..k].iter_mut().zip(&col[..k]) {
            *ri -= u.cast::<S>() * rk;
        }
    }
    if r.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MpError::non_finite("triangular solve"))
    }
}

/// Transposed solve `Aᵀ x = r` in `S` with promoted factor entries.
/// With `P A = L U`, `Aᵀ = Uᵀ Lᵀ P`; overwrites `r` with `x`.
pub fn solve_transpose_in_place<F: Real, S: Real>(f: &LuFactors<F>, r: &mut [S]) -> Result<()> {
    let n = f.n();
    check_len(n, r.len())?;
    let lu = f.packed();
    for k in 0..n {
        let col = lu.col(k);
        let mut s = r[k];
        for (&u, &y) in col[..k].iter().zip(&r[..k]) {
            s -= u.cast::<S>() * y;
        }
        r[k] = s / col[k].cast::<S>();
    }
    for k in (0..n).rev() {
        let col = lu.col(k);
        let mut s = r[k];
        for (&l, &z) in col[k + 1..].iter().zip(&r[k + 1..]) {
            s -= l.cast::<S>() * z;
        }
        r[k] = s;
    }
    for (k, &p) in f.swaps().iter().enumerate().rev() {
        if p != k {
            r.swap(k, p);
        }
    }
    if r.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MpError::non_finite("transposed triangular solve"))
    }
}

pub fn solve_mps<F: Real, S: Real>(f: &LuFactors<F>, r: &[S]) -> Result<Vec<S>> {
    let mut d = r.to_vec();
    solve_mps_in_place(f, &mut d)?;
    Ok(d)
}

/// Low precision solve. With `ρ = ‖r‖∞`, rounds `r/ρ` to `F`, substitutes
/// entirely in `F`, widens the result and multiplies by `ρ`. The unit scaling
/// keeps the narrowing from overflowing and limits underflow.
///
/// `scratch` must have length `n`; `r` is overwritten with `d`.
pub fn solve_lps_in_place<F: Real, V: Real>(f: &LuFactors<F>, r: &mut [V], scratch: &mut [F]) -> Result<()> {
    let n = f.n();
    check_len(n, r.len())?;
    check_len(n, scratch.len())?;
    let rho = norm_inf(r);
    if rho == 0.0 {
        r.fill(V::ZERO);
        return Ok(());
    }
    if !rho.is_finite() {
        return Err(MpError::non_finite("residual scaling"));
    }
    // rho is one of the entries of r, so it is exact in V
    let rho = V::from_f64(rho);
    for (s, &x) in scratch.iter_mut().zip(r.iter()) {
        *s = (x / rho).cast::<F>();
    }
    solve_mps_in_place::<F, F>(f, scratch)?;
    for (x, &s) in r.iter_mut().zip(scratch.iter()) {
        *x = rho * s.cast::<V>();
    }
    if r.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(MpError::non_finite("triangular solve"))
    }
}

pub fn solve_lps<F: Real, V: Real>(f: &LuFactors<F>, r: &[V]) -> Result<Vec<V>> {
    let mut d = r.to_vec();
    let mut scratch = vec![F::ZERO; f.n()];
    solve_lps_in_place(f, &mut d, &mut scratch)?;
    Ok(d)
}
