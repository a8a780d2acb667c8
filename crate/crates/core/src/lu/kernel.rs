//! Blocked right-looking LU with partial pivoting on column-major storage.
//!
//! `swaps[k]` records the row exchanged with row `k` at elimination step `k`
//! (LAPACK `ipiv` convention, zero based). Both kernels process each
//! trailing entry's updates in increasing `k`; the binary16 kernel performs
//! every multiply and subtract with binary16 rounding, so its output does not
//! depend on the block size or on how column blocks are scheduled.

use half::slice::HalfFloatSliceExt;
use half::f16;
use rayon::prelude::*;

use crate::error::{MpError, Result};
use crate::precision::{round_to_f16, Real};

/// Scalars with a native GEMM.
pub(crate) trait Gemm: Real {
    /// `C -= A * B`, all column-major with leading dimension `ld`.
    ///
    /// # Safety
    /// The three regions must lie inside one allocation and `C` must not
    /// overlap `A` or `B`.
    unsafe fn gemm_sub(m: usize, k: usize, n: usize, a: *const Self, b: *const Self, c: *mut Self, ld: usize);
}

impl Gemm for f64 {
    unsafe fn gemm_sub(m: usize, k: usize, n: usize, a: *const f64, b: *const f64, c: *mut f64, ld: usize) {
        let ld = ld as isize;
        matrixmultiply::dgemm(m, k, n, -1.0, a, 1, ld, b, 1, ld, 1.0, c, 1, ld);
    }
}

impl Gemm for f32 {
    unsafe fn gemm_sub(m: usize, k: usize, n: usize, a: *const f32, b: *const f32, c: *mut f32, ld: usize) {
        let ld = ld as isize;
        matrixmultiply::sgemm(m, k, n, -1.0, a, 1, ld, b, 1, ld, 1.0, c, 1, ld);
    }
}

/// Elementwise arithmetic used by the unblocked parts of the factorization.
pub(crate) trait Arith: Copy + PartialOrd + Send + Sync {
    fn sub_mul(x: Self, l: Self, u: Self) -> Self;
    fn div(x: Self, p: Self) -> Self;
    fn mag(x: Self) -> Self;
    fn is_zero(x: Self) -> bool;
}

macro_rules! native_arith {
    ($t:ty) => {
        impl Arith for $t {
            #[inline(always)]
            fn sub_mul(x: Self, l: Self, u: Self) -> Self {
                x - l * u
            }
            #[inline(always)]
            fn div(x: Self, p: Self) -> Self {
                x / p
            }
            #[inline(always)]
            fn mag(x: Self) -> Self {
                x.abs()
            }
            #[inline(always)]
            fn is_zero(x: Self) -> bool {
                x == 0.0
            }
        }
    };
}
native_arith!(f64);
native_arith!(f32);

/// binary16 values carried in `f32` registers, rounded after every operation.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
#[repr(transparent)]
pub(crate) struct Emu16(f32);

impl Arith for Emu16 {
    #[inline(always)]
    fn sub_mul(x: Self, l: Self, u: Self) -> Self {
        Emu16(round_to_f16(x.0 - round_to_f16(l.0 * u.0)))
    }
    #[inline(always)]
    fn div(x: Self, p: Self) -> Self {
        Emu16(round_to_f16(x.0 / p.0))
    }
    #[inline(always)]
    fn mag(x: Self) -> Self {
        Emu16(x.0.abs())
    }
    #[inline(always)]
    fn is_zero(x: Self) -> bool {
        x.0 == 0.0
    }
}

/// Unblocked elimination of panel columns `kb..kend` over rows `kb..n`.
/// Row exchanges are applied across the panel columns only.
fn factor_panel<T: Arith>(a: &mut [T], n: usize, kb: usize, kend: usize, swaps: &mut [usize]) -> Result<()> {
    for k in kb..kend {
        let colk = &a[k * n..(k + 1) * n];
        let mut p = k;
        let mut best = T::mag(colk[k]);
        for (i, &v) in colk.iter().enumerate().skip(k + 1) {
            let m = T::mag(v);
            if m > best {
                best = m;
                p = i;
            }
        }
        if T::is_zero(best) {
            return Err(MpError::SingularPivot(k));
        }
        swaps[k] = p;
        if p != k {
            for j in kb..kend {
                a.swap(j * n + k, j * n + p);
            }
        }
        let (left, right) = a.split_at_mut((k + 1) * n);
        let colk = &mut left[k * n..];
        let piv = colk[k];
        for v in &mut colk[k + 1..] {
            *v = T::div(*v, piv);
        }
        let lk = &colk[k + 1..];
        for j in k + 1..kend {
            let colj = &mut right[(j - k - 1) * n..(j - k) * n];
            let u = colj[k];
            if T::is_zero(u) {
                continue;
            }
            for (x, &l) in colj[k + 1..].iter_mut().zip(lk) {
                *x = T::sub_mul(*x, l, u);
            }
        }
    }
    Ok(())
}

/// Apply the panel's row exchanges to one column outside the panel.
#[inline]
fn swap_rows<T>(col: &mut [T], kb: usize, kend: usize, swaps: &[usize]) {
    for k in kb..kend {
        let p = swaps[k];
        if p != k {
            col.swap(k, p);
        }
    }
}

/// Unit lower triangular solve with the panel's diagonal block.
#[inline]
fn trsm_col<T: Arith>(col: &mut [T], panel: &[T], n: usize, kb: usize, kend: usize) {
    for k in kb..kend {
        let u = col[k];
        if T::is_zero(u) {
            continue;
        }
        let l = &panel[(k - kb) * n..(k - kb + 1) * n];
        for i in k + 1..kend {
            col[i] = T::sub_mul(col[i], l[i], u);
        }
    }
}

fn check_args<T>(a: &[T], n: usize, swaps: &[usize], block: usize) -> Result<()> {
    if a.len() != n * n {
        return Err(MpError::DimensionMismatch {
            expected: n * n,
            found: a.len(),
        });
    }
    if swaps.len() != n {
        return Err(MpError::DimensionMismatch {
            expected: n,
            found: swaps.len(),
        });
    }
    if block == 0 {
        return Err(MpError::InvalidParameter("block size must be positive".into()));
    }
    Ok(())
}

/// Blocked LU for binary64/binary32 with a GEMM trailing update.
pub(crate) fn factor_gemm<T: Gemm + Arith>(a: &mut [T], n: usize, swaps: &mut [usize], block: usize) -> Result<()> {
    check_args(a, n, swaps, block)?;
    let mut kb = 0;
    while kb < n {
        let kend = (kb + block).min(n);
        factor_panel(a, n, kb, kend, swaps)?;
        for j in (0..kb).chain(kend..n) {
            swap_rows(&mut a[j * n..(j + 1) * n], kb, kend, swaps);
        }
        if kend < n {
            let (head, tail) = a.split_at_mut(kend * n);
            let panel = &head[kb * n..];
            for col in tail.chunks_exact_mut(n) {
                trsm_col(col, panel, n, kb, kend);
            }
            let m = n - kend;
            let ptr = a.as_mut_ptr();
            // SAFETY: L21 = rows kend.., cols kb..kend; U12 = rows kb..kend,
            // cols kend..; A22 = rows kend.., cols kend... A22 shares no
            // entries with either operand.
            unsafe {
                T::gemm_sub(
                    m,
                    kend - kb,
                    m,
                    ptr.add(kb * n + kend),
                    ptr.add(kend * n + kb),
                    ptr.add(kend * n + kend),
                    n,
                );
            }
        }
        kb = kend;
    }
    Ok(())
}

/// Emulated binary16 LU. The matrix is widened once into an `f32` work
/// array (exact), factored with binary16 rounding, and narrowed back (exact).
pub(crate) fn factor_half(a: &mut [f16], n: usize, swaps: &mut [usize], block: usize) -> Result<()> {
    check_args(a, n, swaps, block)?;
    let mut work = vec![0.0f32; n * n];
    a.convert_to_f32_slice(&mut work);
    // SAFETY: Emu16 is repr(transparent) over f32.
    let emu: &mut [Emu16] =
        unsafe { std::slice::from_raw_parts_mut(work.as_mut_ptr().cast::<Emu16>(), work.len()) };
    let result = factor_half_work(emu, n, swaps, block);
    a.convert_from_f32_slice(&work);
    result
}

fn factor_half_work(a: &mut [Emu16], n: usize, swaps: &mut [usize], block: usize) -> Result<()> {
    let parallel = rayon::current_num_threads() > 1;
    let mut kb = 0;
    while kb < n {
        let kend = (kb + block).min(n);
        factor_panel(a, n, kb, kend, swaps)?;
        for j in 0..kb {
            swap_rows(&mut a[j * n..(j + 1) * n], kb, kend, swaps);
        }
        if kend < n {
            let (head, tail) = a.split_at_mut(kend * n);
            let panel = &head[kb * n..];
            let update = |cols: &mut [Emu16]| {
                for col in cols.chunks_exact_mut(n) {
                    swap_rows(col, kb, kend, swaps);
                    trsm_col(col, panel, n, kb, kend);
                    half_trailing_col(col, panel, n, kb, kend);
                }
            };
            if parallel {
                tail.par_chunks_mut(block * n).for_each(update);
            } else {
                update(tail);
            }
        }
        kb = kend;
    }
    Ok(())
}

fn half_trailing_col(col: &mut [Emu16], panel: &[Emu16], n: usize, kb: usize, kend: usize) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("f16c") {
            // SAFETY: features checked above.
            unsafe { half_trailing_col_f16c(col, panel, n, kb, kend) };
            return;
        }
    }
    half_trailing_col_impl(col, panel, n, kb, kend);
}

/// Same arithmetic as `half_trailing_col_impl`, with the binary16 rounding
/// done by the hardware conversion instructions eight lanes at a time.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,f16c")]
unsafe fn half_trailing_col_f16c(col: &mut [Emu16], panel: &[Emu16], n: usize, kb: usize, kend: usize) {
    use std::arch::x86_64::*;
    #[inline(always)]
    unsafe fn r8(x: __m256) -> __m256 {
        _mm256_cvtph_ps(_mm256_cvtps_ph::<_MM_FROUND_TO_NEAREST_INT>(x))
    }
    let (upper, rows) = col.split_at_mut(kend);
    let m = n - kend;
    let rows = rows.as_mut_ptr().cast::<f32>();
    let lcol = |k: usize| panel.as_ptr().add((k - kb) * n + kend).cast::<f32>();
    let vec_end = m - m % 8;
    let mut k = kb;
    while k + 4 <= kend {
        let us = [upper[k].0, upper[k + 1].0, upper[k + 2].0, upper[k + 3].0];
        let ls = [lcol(k), lcol(k + 1), lcol(k + 2), lcol(k + 3)];
        let uv = us.map(|u| _mm256_set1_ps(u));
        let mut i = 0;
        while i < vec_end {
            let mut v = _mm256_loadu_ps(rows.add(i));
            for t in 0..4 {
                let p = r8(_mm256_mul_ps(_mm256_loadu_ps(ls[t].add(i)), uv[t]));
                v = r8(_mm256_sub_ps(v, p));
            }
            _mm256_storeu_ps(rows.add(i), v);
            i += 8;
        }
        for i in vec_end..m {
            let mut v = *rows.add(i);
            for t in 0..4 {
                v = round_to_f16(v - round_to_f16(*ls[t].add(i) * us[t]));
            }
            *rows.add(i) = v;
        }
        k += 4;
    }
    while k < kend {
        let u = upper[k].0;
        let l = lcol(k);
        let uv = _mm256_set1_ps(u);
        let mut i = 0;
        while i < vec_end {
            let v = _mm256_loadu_ps(rows.add(i));
            let p = r8(_mm256_mul_ps(_mm256_loadu_ps(l.add(i)), uv));
            _mm256_storeu_ps(rows.add(i), r8(_mm256_sub_ps(v, p)));
            i += 8;
        }
        for i in vec_end..m {
            *rows.add(i) = round_to_f16(*rows.add(i) - round_to_f16(*l.add(i) * u));
        }
        k += 1;
    }
}

/// Rows `kend..n` of one trailing column. Four panel columns are applied
/// per pass over the rows; each entry still sees them in order `k, k+1, ...`.
#[inline(always)]
fn half_trailing_col_impl(col: &mut [Emu16], panel: &[Emu16], n: usize, kb: usize, kend: usize) {
    let (upper, rows) = col.split_at_mut(kend);
    let rows = &mut rows[..n - kend];
    let lcol = |k: usize| &panel[(k - kb) * n + kend..(k - kb + 1) * n];
    let r = |x: f32| round_to_f16(x);
    let mut k = kb;
    while k + 4 <= kend {
        let (u0, u1, u2, u3) = (upper[k].0, upper[k + 1].0, upper[k + 2].0, upper[k + 3].0);
        let (l0, l1, l2, l3) = (lcol(k), lcol(k + 1), lcol(k + 2), lcol(k + 3));
        for ((((x, a0), a1), a2), a3) in rows.iter_mut().zip(l0).zip(l1).zip(l2).zip(l3) {
            let mut v = x.0;
            v = r(v - r(a0.0 * u0));
            v = r(v - r(a1.0 * u1));
            v = r(v - r(a2.0 * u2));
            v = r(v - r(a3.0 * u3));
            x.0 = v;
        }
        k += 4;
    }
    while k < kend {
        let u = upper[k].0;
        for (x, a) in rows.iter_mut().zip(lcol(k)) {
            x.0 = r(x.0 - r(a.0 * u));
        }
        k += 1;
    }
}
