//! Dense vector helpers and the largest-eigenvalue routines used for
//! Lipschitz constants.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest dimension for which the dense symmetric eigensolver is used.
pub const DENSE_EIGEN_MAX_DIM: usize = 64;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

/// `‖a - b‖²`
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Symmetric eigenvalues in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|x, y| x.total_cmp(y));
    values
}

/// Power iteration on a symmetric PSD matrix. Stops when the Rayleigh
/// quotient changes by less than `tol` (relative).
pub fn power_iteration(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with no exact orthogonality to any eigenvector in practice.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i as f64) * 0.7).sin());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Largest eigenvalue of a symmetric PSD matrix: dense solve for small
/// matrices, power iteration otherwise.
pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    if a.nrows() <= DENSE_EIGEN_MAX_DIM {
        symmetric_eigenvalues(a).last().copied().unwrap_or(0.0)
    } else {
        power_iteration(a, 1e-10, 100_000)
    }
}

/// `AᵀA` for a row-major sample matrix given as rows.
pub fn gram(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(dim, dim);
    for r in rows {
        for i in 0..dim {
            for j in 0..dim {
                g[(i, j)] += r[i] * r[j];
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_agrees_with_dense_solver() {
        let b = DMatrix::from_fn(8, 8, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let a = b.transpose() * &b;
        let dense = symmetric_eigenvalues(&a).last().copied().unwrap();
        let power = power_iteration(&a, 1e-14, 1_000_000);
        assert!((dense - power).abs() <= 1e-8 * dense, "{dense} vs {power}");
    }

    #[test]
    fn dist_and_norms() {
        assert_eq!(dist2(&[1.0, 2.0], &[0.0, 0.0]), 5.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
    }
}
