//! Test problems from the trapezoid rule discretization of the Green's
//! function for `-u''` on `[0, 1]` with zero boundary values.

use crate::error::{MpError, Result};
use crate::matrix::{norm2, Matrix};
use crate::precision::{demote_matrix, Real};

/// `g(x, y) = y (1 - x)` for `x > y`, `x (1 - y)` otherwise.
pub fn greens_kernel(x: f64, y: f64) -> f64 {
    if x > y {
        y * (1.0 - x)
    } else {
        x * (1.0 - y)
    }
}

/// Nodes `x_i = i h`, `h = 1 / (n - 1)`.
pub fn grid(n: usize) -> Vec<f64> {
    let h = 1.0 / (n as f64 - 1.0);
    (0..n).map(|i| i as f64 * h).collect()
}

/// `G[i][j] = g(x_i, x_j) w_j` with trapezoid weights (`h` inside, `h/2`
/// at the ends). The kernel vanishes on the boundary, so `G` is symmetric.
pub fn build_greens_matrix(n: usize) -> Result<Matrix<f64>> {
    if n < 3 {
        return Err(MpError::InvalidSize(n));
    }
    let x = grid(n);
    let h = 1.0 / (n as f64 - 1.0);
    Ok(Matrix::from_fn(n, n, |i, j| {
        let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
        greens_kernel(x[i], x[j]) * w
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rhs {
    /// `b = A·1` for the stored `A`, each row sum rounded once.
    Manufactured,
    /// `f(x) = 1 - α x (1 - x) / 2`, whose continuous solution is `u ≡ 1`.
    Integral,
    /// `b = 1`.
    Ones,
}

impl std::str::FromStr for Rhs {
    type Err = MpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "manufactured" => Ok(Rhs::Manufactured),
            "integral" => Ok(Rhs::Integral),
            "ones" => Ok(Rhs::Ones),
            other => Err(MpError::InvalidParameter(format!("unknown right side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GreensProblem<W> {
    pub n: usize,
    pub alpha: f64,
    pub a: Matrix<W>,
    pub b: Vec<W>,
    /// Known (or continuous) solution, all ones; `None` for [`Rhs::Ones`].
    pub x_star: Option<Vec<W>>,
}

/// `A = I - α G` assembled in binary64, then rounded to `W`.
pub fn build_matrix<W: Real>(n: usize, alpha: f64) -> Result<Matrix<W>> {
    let mut a = build_greens_matrix(n)?;
    for (k, v) in a.as_mut_slice().iter_mut().enumerate() {
        *v *= -alpha;
        if k % (n + 1) == 0 {
            *v += 1.0;
        }
    }
    Ok(demote_matrix(&a)?.matrix)
}

pub fn build_problem<W: Real>(n: usize, alpha: f64, rhs: Rhs) -> Result<GreensProblem<W>> {
    if !alpha.is_finite() {
        return Err(MpError::InvalidParameter(format!("alpha must be finite, got {alpha}")));
    }
    let a = build_matrix::<W>(n, alpha)?;
    let ones = vec![W::ONE; n];
    let (b, x_star) = match rhs {
        Rhs::Manufactured => (row_sums(&a), Some(ones)),
        Rhs::Integral => {
            let b = grid(n)
                .into_iter()
                .map(|x| W::from_f64(1.0 - alpha * x * (1.0 - x) * 0.5))
                .collect();
            (b, Some(ones))
        }
        Rhs::Ones => (ones, None),
    };
    Ok(GreensProblem { n, alpha, a, b, x_star })
}

/// Neumaier-compensated row sums, so `1` solves `A x = b` to within a
/// few ulps instead of `n` roundings.
fn row_sums<W: Real>(a: &Matrix<W>) -> Vec<W> {
    let n = a.nrows();
    let mut sum = vec![0.0f64; n];
    let mut comp = vec![0.0f64; n];
    for j in 0..a.ncols() {
        for (i, v) in a.col(j).iter().enumerate() {
            let v = v.to_f64();
            let t = sum[i] + v;
            comp[i] += if sum[i].abs() >= v.abs() { (sum[i] - t) + v } else { (v - t) + sum[i] };
            sum[i] = t;
        }
    }
    sum.iter().zip(&comp).map(|(s, c)| W::from_f64(s + c)).collect()
}

/// Largest `k` eigenvalues of a symmetric matrix by orthogonal iteration
/// with a Rayleigh-Ritz step, sorted in decreasing order.
pub fn top_eigenvalues(a: &Matrix<f64>, k: usize, iters: usize) -> Vec<f64> {
    let n = a.nrows();
    let k = k.min(n);
    // deterministic, generic start block
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..n).map(|i| ((i * (c + 2) + c) as f64 * 0.7548776662).sin() + 0.1).collect())
        .collect();
    orthonormalize(&mut q);
    for _ in 0..iters {
        for v in q.iter_mut() {
            *v = a.matvec(v);
        }
        orthonormalize(&mut q);
    }
    // Rayleigh-Ritz on span(q): eigenvalues of the k x k projection
    let aq: Vec<Vec<f64>> = q.iter().map(|v| a.matvec(v)).collect();
    let mut t = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            t[i][j] = q[i].iter().zip(&aq[j]).map(|(x, y)| x * y).sum();
        }
    }
    let mut ev = jacobi_eigenvalues(t);
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn orthonormalize(q: &mut [Vec<f64>]) {
    for i in 0..q.len() {
        let (done, rest) = q.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let c: f64 = u.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(u).for_each(|(y, x)| *y -= c * x);
        }
        let nv = norm2(v);
        v.iter_mut().for_each(|y| *y /= nv);
    }
}

/// Cyclic Jacobi for a small symmetric matrix.
fn jacobi_eigenvalues(mut t: Vec<Vec<f64>>) -> Vec<f64> {
    let k = t.len();
    for _ in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| t[i][j] * t[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..k {
            for r in p + 1..k {
                if t[p][r] == 0.0 {
                    continue;
                }
                let theta = (t[r][r] - t[p][p]) / (2.0 * t[p][r]);
                let tt = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (tt * tt + 1.0).sqrt();
                let s = tt * c;
                for row in t.iter_mut() {
                    let (a, b) = (row[p], row[r]);
                    row[p] = c * a - s * b;
                    row[r] = s * a + c * b;
                }
                for j in 0..k {
                    let (a, b) = (t[p][j], t[r][j]);
                    t[p][j] = c * a - s * b;
                    t[r][j] = s * a + c * b;
                }
            }
        }
    }
    (0..k).map(|i| t[i][i]).collect()
}
