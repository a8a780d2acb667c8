//! Column-major dense matrices and the handful of BLAS-2 style kernels the
//! solvers need.

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::precision::Real;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![T::default(); nrows * ncols],
        }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Matrix { nrows, ncols, data }
    }

    /// Panics if the rows are ragged.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        assert!(rows.iter().all(|r| r.as_ref().len() == ncols), "ragged rows");
        Self::from_fn(nrows, ncols, |i, j| rows[i].as_ref()[j])
    }

    /// Wrap column-major storage.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Matrix { nrows, ncols, data }
    }
}

impl<T> Matrix<T> {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Heap bytes held by the entries.
    pub fn storage_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>()
    }
}

impl<T: Real> Matrix<T> {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::ONE } else { T::ZERO })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Entrywise conversion, rounding if `U` is narrower.
    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|x| x.cast()).collect(),
        }
    }

    /// `y = A x` accumulated in `T`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::ZERO; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.fill(T::ZERO);
        gemv_acc(self, x, y, T::ONE);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.to_f64().abs()))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i + j * self.nrows]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i + j * self.nrows]
    }
}

const PAR_ROWS: usize = 1024;
const ROW_CHUNK: usize = 512;
const ROW_BLOCK: usize = 64;
const COL_BLOCK: usize = 16;
const LEVELS: usize = 48;

/// `y += sign * A x` where the entries of `A` and `x` are promoted to the
/// accumulation format `R` at use. No copy of `A` in `R` is formed.
///
/// Columns are summed pairwise in blocks of 16, so the rounding error in each
/// row grows like `log n` rather than `n`.
pub(crate) fn gemv_acc<T: Real, X: Real, R: Real>(a: &Matrix<T>, x: &[X], y: &mut [R], sign: R) {
    let n = a.nrows;
    let run = |row0: usize, y: &mut [R]| {
        for (b, yb) in y.chunks_mut(ROW_BLOCK).enumerate() {
            pairwise_block(a, x, row0 + b * ROW_BLOCK, yb, sign);
        }
    };
    if n >= PAR_ROWS && rayon::current_num_threads() > 1 {
        y.par_chunks_mut(ROW_CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| run(c * ROW_CHUNK, chunk));
    } else {
        run(0, y);
    }
}

fn pairwise_block<T: Real, X: Real, R: Real>(a: &Matrix<T>, x: &[X], row0: usize, y: &mut [R], sign: R) {
    let n = a.nrows;
    let m = y.len();
    // stack[k] holds the sum of 2^k column blocks when bit k of `used` is set
    let mut stack = [[R::ZERO; ROW_BLOCK]; LEVELS];
    let mut used = 0u64;
    let mut part = [R::ZERO; ROW_BLOCK];
    for j0 in (0..x.len()).step_by(COL_BLOCK) {
        part[..m].fill(R::ZERO);
        for (j, &xj) in x.iter().enumerate().skip(j0).take(COL_BLOCK) {
            let xj: R = sign * xj.cast::<R>();
            let col = &a.data[j * n + row0..j * n + row0 + m];
            for (p, &aij) in part.iter_mut().zip(col) {
                *p += aij.cast::<R>() * xj;
            }
        }
        let mut k = 0;
        while used & (1 << k) != 0 {
            for (p, s) in part[..m].iter_mut().zip(&stack[k]) {
                *p += *s;
            }
            used &= !(1 << k);
            k += 1;
        }
        stack[k][..m].copy_from_slice(&part[..m]);
        used |= 1 << k;
    }
    part[..m].fill(R::ZERO);
    for (k, level) in stack.iter().enumerate() {
        if used & (1 << k) != 0 {
            for (p, s) in part[..m].iter_mut().zip(level) {
                *p += *s;
            }
        }
    }
    for (yi, p) in y.iter_mut().zip(&part) {
        *yi += *p;
    }
}

/// Max column sum computed in the matrix's own precision.
pub fn matrix_one_norm<T: Real>(a: &Matrix<T>) -> T {
    let mut best = T::ZERO;
    for j in 0..a.ncols {
        let mut s = T::ZERO;
        for &v in a.col(j) {
            s += v.abs();
        }
        if s > best {
            best = s;
        }
    }
    best
}

/// Max row sum, in `f64`.
pub fn matrix_inf_norm<T: Real>(a: &Matrix<T>) -> f64 {
    let mut rows = vec![0.0f64; a.nrows];
    for j in 0..a.ncols {
        for (r, &v) in rows.iter_mut().zip(a.col(j)) {
            *r += v.to_f64().abs();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

/// `max |v_i|`, exact in any format.
pub fn norm_inf<T: Real>(v: &[T]) -> f64 {
    v.iter().fold(0.0, |m, x| {
        let a = x.to_f64().abs();
        if a > m || a.is_nan() {
            a
        } else {
            m
        }
    })
}

pub(crate) fn norm2<T: Real>(v: &[T]) -> T {
    // scaled to avoid overflow in f16/f32
    let scale = norm_inf(v);
    if scale == 0.0 || !scale.is_finite() {
        return T::from_f64(scale);
    }
    let s = T::from_f64(scale);
    let mut acc = T::ZERO;
    for &x in v {
        let t = x / s;
        acc += t * t;
    }
    acc.sqrt() * s
}

pub(crate) fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    let mut acc = T::ZERO;
    for (&a, &b) in x.iter().zip(y) {
        acc += a * b;
    }
    acc
}

pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
