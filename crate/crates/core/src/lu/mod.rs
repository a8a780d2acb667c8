//! LU factorization with partial pivoting and the two triangular solve
//! strategies for low precision factors.

pub(crate) mod kernel;
mod solve;

pub use solve::{solve_lps, solve_lps_in_place, solve_mps, solve_mps_in_place, solve_transpose_in_place};

use half::f16;

use crate::error::{MpError, Result};
use crate::matrix::Matrix;
use crate::precision::{demote_into, Real};

/// Default column block for the binary16 kernel.
pub const HALF_BLOCK: usize = 32;
/// Default column block for the GEMM based kernel.
pub const GEMM_BLOCK: usize = 64;

/// Packed LU factors of a square matrix.
///
/// The strictly lower part of `packed` holds the unit lower factor `L`, the
/// rest holds `U`, and `P A = L U` where row `i` of `P A` is row
/// `pivots()[i]` of `A`.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    packed: Matrix<T>,
    swaps: Vec<usize>,
    perm: Vec<usize>,
}

fn default_block<T: Real>() -> usize {
    if T::PRECISION == crate::Precision::B16 {
        HALF_BLOCK
    } else {
        GEMM_BLOCK
    }
}

/// Factor `a` in place, consuming it. The factors reuse the matrix storage.
pub fn lu_factor<T: Real>(a: Matrix<T>) -> Result<LuFactors<T>> {
    lu_factor_with_block(a, default_block::<T>())
}

/// Binary16 factorization with the blocked, column-parallel kernel.
pub fn lu_factor_half(a: Matrix<f16>) -> Result<LuFactors<f16>> {
    lu_factor_with_block(a, HALF_BLOCK)
}

pub fn lu_factor_with_block<T: Real>(a: Matrix<T>, block: usize) -> Result<LuFactors<T>> {
    if !a.is_square() {
        return Err(MpError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !a.all_finite() {
        return Err(MpError::InvalidParameter("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let mut f = LuFactors {
        packed: a,
        swaps: vec![0; n],
        perm: vec![0; n],
    };
    f.factor(block)?;
    Ok(f)
}

impl<T: Real> LuFactors<T> {
    fn factor(&mut self, block: usize) -> Result<()> {
        let n = self.n();
        T::factor_in_place(self.packed.as_mut_slice(), n, &mut self.swaps, block)?;
        for (i, p) in self.perm.iter_mut().enumerate() {
            *p = i;
        }
        for k in 0..n {
            self.perm.swap(k, self.swaps[k]);
        }
        let diag_ok = (0..n).all(|k| {
            let d = self.packed[(k, k)];
            d.is_finite() && d != T::ZERO
        });
        if !diag_ok {
            let k = (0..n)
                .find(|&k| self.packed[(k, k)] == T::ZERO || !self.packed[(k, k)].is_finite())
                .unwrap_or(0);
            return Err(MpError::SingularPivot(k));
        }
        Ok(())
    }

    /// Overwrite the factors with those of `src` rounded to `T`, reusing all
    /// storage. Dimensions must match.
    pub fn refactor_from<W: Real>(&mut self, src: &Matrix<W>) -> Result<()> {
        if src.nrows() != self.n() || src.ncols() != self.n() {
            return Err(MpError::DimensionMismatch {
                expected: self.n(),
                found: src.nrows().max(src.ncols()),
            });
        }
        demote_into(src, &mut self.packed)?;
        self.factor(default_block::<T>())
    }

    pub fn n(&self) -> usize {
        self.packed.nrows()
    }

    pub fn packed(&self) -> &Matrix<T> {
        &self.packed
    }

    /// Row permutation as an index vector.
    pub fn pivots(&self) -> &[usize] {
        &self.perm
    }

    /// Interchange sequence, `swaps()[k]` exchanged with `k` at step `k`.
    pub fn swaps(&self) -> &[usize] {
        &self.swaps
    }

    /// Explicit `(L, U)` widened to `U`.
    pub fn unpack<W: Real>(&self) -> (Matrix<W>, Matrix<W>) {
        let n = self.n();
        let l = Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed[(i, j)].cast(),
            std::cmp::Ordering::Equal => W::ONE,
            std::cmp::Ordering::Less => W::ZERO,
        });
        let u = Matrix::from_fn(n, n, |i, j| if i <= j { self.packed[(i, j)].cast() } else { W::ZERO });
        (l, u)
    }

    /// `‖P A − L U‖∞` evaluated in binary64 from the widened factors.
    pub fn reconstruction_error<W: Real>(&self, a: &Matrix<W>) -> f64 {
        let n = self.n();
        let (l, u) = self.unpack::<f64>();
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let kmax = i.min(j);
                let mut s = 0.0;
                for k in 0..=kmax {
                    s += l[(i, k)] * u[(k, j)];
                }
                row_sum += (a[(self.perm[i], j)].to_f64() - s).abs();
            }
            worst = worst.max(row_sum);
        }
        worst
    }

    pub(crate) fn apply_swaps<S>(&self, r: &mut [S]) {
        for (k, &p) in self.swaps.iter().enumerate() {
            if p != k {
                r.swap(k, p);
            }
        }
    }
}
