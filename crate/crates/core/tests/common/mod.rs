//! Slow reference routines shared by the integration tests.

#![allow(dead_code)]

use snsm::linalg::Matrix;

/// One-sided Jacobi SVD of an `m × n` matrix with `m ≥ n`.
///
/// Returns the left singular vectors as columns of an `m × n` matrix and the
/// singular values, both sorted by decreasing singular value.
pub fn jacobi_svd(a: &Matrix) -> (Matrix, Vec<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n, "oracle expects a tall matrix");
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..m).map(|i| a.get(i, j)).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (x, y) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .map(|c| {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            let unit = if norm > 0.0 {
                c.iter().map(|x| x / norm).collect()
            } else {
                c
            };
            (norm, unit)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let u = Matrix::from_fn(m, n, |i, j| pairs[j].1[i]);
    (u, pairs.into_iter().map(|p| p.0).collect())
}

/// `U_k U_kᵀ` for the first `k` columns of `u`.
pub fn column_projector(u: &Matrix, k: usize) -> Matrix {
    let m = u.rows();
    Matrix::from_fn(m, m, |i, j| (0..k).map(|c| u.get(i, c) * u.get(j, c)).sum())
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
