//! Condition number estimation from LU factors (Hager's method with
//! Higham's refinements).

use crate::error::Result;
use crate::lu::{lu_factor, solve_mps_in_place, solve_transpose_in_place, LuFactors};
use crate::matrix::{matrix_inf_norm, Matrix};

const MAX_SWEEPS: usize = 5;

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Lower bound on `‖B‖₁`, usually exact, from a handful of products with
/// `B` and `Bᵀ`. Both closures overwrite their argument.
pub fn norm1_estimate(
    n: usize,
    mut apply: impl FnMut(&mut [f64]) -> Result<()>,
    mut apply_t: impl FnMut(&mut [f64]) -> Result<()>,
) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for sweep in 0..MAX_SWEEPS {
        apply(&mut x)?;
        let y_norm = norm1(&x);
        if sweep > 0 && y_norm <= est {
            break;
        }
        est = y_norm;
        let mut z: Vec<f64> = x.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
        apply_t(&mut z)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bj, bm), (i, v)| if v.abs() > bm { (i, v.abs()) } else { (bj, bm) });
        // z^T x for the current unit vector x = e_last (or the start vector)
        let ztx = if sweep == 0 {
            z.iter().sum::<f64>() / n as f64
        } else {
            z[last_j]
        };
        if sweep > 0 && (zmax <= ztx || j == last_j) {
            break;
        }
        x.fill(0.0);
        x[j] = 1.0;
        last_j = j;
    }
    // alternating test vector guards against unlucky sign patterns
    let mut alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        })
        .collect();
    apply(&mut alt)?;
    Ok(est.max(2.0 * norm1(&alt) / (3.0 * n as f64)))
}

/// Estimate of `‖A⁻¹‖∞` from the factors of `A`.
pub fn inverse_inf_norm_estimate(f: &LuFactors<f64>) -> Result<f64> {
    // ‖A⁻¹‖∞ = ‖A⁻ᵀ‖₁
    norm1_estimate(
        f.n(),
        |v| solve_transpose_in_place(f, v),
        |v| solve_mps_in_place(f, v),
    )
}

/// Estimate of `κ∞(A) = ‖A‖∞ ‖A⁻¹‖∞`, factoring `A` in binary64.
pub fn cond_inf_estimate(a: &Matrix<f64>) -> Result<f64> {
    let f = lu_factor(a.clone())?;
    Ok(matrix_inf_norm(a) * inverse_inf_norm_estimate(&f)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_cond_inf(a: &Matrix<f64>) -> f64 {
        let n = a.nrows();
        let f = lu_factor(a.clone()).unwrap();
        let mut rows = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0f64; n];
            e[j] = 1.0;
            solve_mps_in_place(&f, &mut e).unwrap();
            for (r, v) in rows.iter_mut().zip(e) {
                *r += v.abs();
            }
        }
        matrix_inf_norm(a) * rows.into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_is_exact() {
        let a = Matrix::from_fn(4, 4, |i, j| if i == j { [1.0, 2.0, 0.5, 8.0][i] } else { 0.0 });
        assert_eq!(cond_inf_estimate(&a).unwrap(), 16.0);
    }

    #[test]
    fn lower_bound_and_close_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let n = rng.gen_range(2..30);
            let a: Matrix<f64> = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let exact = exact_cond_inf(&a);
            let est = cond_inf_estimate(&a).unwrap();
            assert!(est <= exact * (1.0 + 1e-10), "{est} > {exact}");
            assert!(est >= exact / 10.0, "{est} << {exact}");
        }
    }
}
