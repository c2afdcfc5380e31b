use nalgebra::{DMatrix, DVector};

use super::{CscMatrix, Factorization};
use crate::{Error, Result};

/// Hager-Higham estimate of `||A||_1 ||A^-1||_1` using the LU factors.
pub fn condest_1norm(matrix: &CscMatrix, factors: &Factorization) -> Result<f64> {
    let n = matrix.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let inv_norm = inverse_norm1_estimate(factors, n)?;
    Ok(matrix.norm_1() * inv_norm)
}

fn inverse_norm1_estimate(f: &Factorization, n: usize) -> Result<f64> {
    const MAX_ITERS: usize = 5;
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for _ in 0..MAX_ITERS {
        let y = f.solve(&x)?;
        let new_est = y.lp_norm(1);
        if new_est <= est {
            break;
        }
        est = new_est;
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = f.solve_transpose(&xi)?;
        let (j, zmax) =
            z.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| {
                    if v.abs() > acc.1 {
                        (i, v.abs())
                    } else {
                        acc
                    }
                },
            );
        if zmax <= z.dot(&x) || j == last_j {
            break;
        }
        last_j = j;
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    // alternating test vector guarding against the known failure modes
    let b = DVector::from_fn(n, |i, _| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
    });
    let alt = 2.0 * f.solve(&b)?.lp_norm(1) / (3.0 * n as f64);
    Ok(est.max(alt))
}

/// Exact `||A||_1 ||A^-1||_1` from a dense inverse.
pub fn dense_condition_1norm(a: &DMatrix<f64>) -> Result<f64> {
    let inv = a.clone().try_inverse().ok_or(Error::SingularMatrix { pivot: None })?;
    let norm1 = |m: &DMatrix<f64>| (0..m.ncols()).map(|j| m.column(j).lp_norm(1)).fold(0.0, f64::max);
    Ok(norm1(a) * norm1(&inv))
}
