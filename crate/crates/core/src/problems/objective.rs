use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm};
use crate::rng::rng_from_seed;

/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_EIGEN_FLOOR: f64 = -1e-10;

/// Default gradient-norm target when refining a numerical optimum.
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;

const REFINE_MAX_ITER: usize = 2_000_000;
const NEWTON_HANDOFF: f64 = 1e-6;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Debug)]
enum Kind {
    /// `½ xᵀAx`, `a` stored symmetric (column-major == row-major).
    Quadratic { a: DMatrix<f64> },
    /// Average logistic loss over `(features[i], labels[i])`.
    Logistic { features: Vec<Vec<f64>>, labels: Vec<f64> },
}

/// A smooth convex objective with exact gradient, gradient-Lipschitz
/// constant and a reference optimum `(f*, x*)`.
///
/// Immutable once built; shareable across threads.
#[derive(Clone, Debug)]
pub struct Objective {
    kind: Kind,
    dim: usize,
    lipschitz: f64,
    fstar: f64,
    xstar: Vec<f64>,
}

impl Objective {
    /// `f(x) = ½ xᵀAx` with `A` symmetrized as `(A + Aᵀ)/2`.
    pub fn quadratic(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "quadratic matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidArgument("quadratic matrix is empty".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("quadratic matrix has non-finite entries".into()));
        }
        let sym = (&a + a.transpose()) * 0.5;
        let eig = linalg::symmetric_eigenvalues(&sym);
        let min = eig[0];
        if min < PSD_EIGEN_FLOOR {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
        }
        let dim = sym.nrows();
        let lipschitz = if dim <= linalg::DENSE_EIGEN_MAX_DIM {
            eig[dim - 1].max(0.0)
        } else {
            linalg::power_iteration(&sym, 1e-10, 100_000)
        };
        Ok(Objective {
            kind: Kind::Quadratic { a: sym },
            dim,
            lipschitz,
            fstar: 0.0,
            xstar: vec![0.0; dim],
        })
    }

    /// Seeded random quadratic `Q diag(λ) Qᵀ` with `Q` orthogonal (QR of a
    /// Gaussian matrix) and `λ` uniform on `[eig_min, eig_max]`.
    pub fn random_quadratic(dim: usize, seed: u64, eig_min: f64, eig_max: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(eig_min >= 0.0 && eig_max >= eig_min && eig_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue range [{eig_min}, {eig_max}] must satisfy 0 <= min <= max"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = g.qr().q();
        let lambdas: Vec<f64> = (0..dim).map(|_| rng.random_range(eig_min..=eig_max)).collect();
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas));
        Objective::quadratic(&q * diag * q.transpose())
    }

    /// Average logistic loss `(1/N) Σ log(1 + e^{zᵢ}) − yᵢ zᵢ`, `zᵢ = xᵢᵀβ`.
    ///
    /// The reference optimum starts at `β = 0`; call [`Objective::refined`]
    /// (or [`fstar_refine`]) before using `f*`.
    pub fn logistic(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidArgument(
                "logistic regression needs at least one sample".into(),
            ));
        }
        if features.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        for (i, row) in features.iter().enumerate() {
            check_dim(dim, row.len())?;
            if !linalg::all_finite(row) {
                return Err(Error::InvalidArgument(format!("sample {i} has non-finite features")));
            }
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "label {y} at sample {i} is not in {{0, 1}}"
            )));
        }
        let n = features.len() as f64;
        let lipschitz = linalg::lambda_max(&linalg::gram(&features, dim)) / (4.0 * n);
        let mut obj = Objective {
            kind: Kind::Logistic { features, labels },
            dim,
            lipschitz,
            fstar: 0.0,
            xstar: vec![0.0; dim],
        };
        obj.fstar = obj.eval(&obj.xstar);
        Ok(obj)
    }

    /// Same objective with `(f*, x*)` replaced by [`fstar_refine`]'s result.
    pub fn refined(mut self, tol: f64) -> Result<Self> {
        let (fstar, xstar) = fstar_refine(&self, tol)?;
        self.fstar = fstar;
        self.xstar = xstar;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn fstar(&self) -> f64 {
        self.fstar
    }

    pub fn xstar(&self) -> &[f64] {
        &self.xstar
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, Kind::Quadratic { .. })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Quadratic { .. } => "quadratic",
            Kind::Logistic { .. } => "logistic",
        }
    }

    /// The quadratic's matrix, if this is a quadratic.
    pub fn quadratic_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Quadratic { a } => Some(a),
            Kind::Logistic { .. } => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.kind {
            Kind::Quadratic { a } => {
                let data = a.as_slice();
                let mut acc = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    acc += xi * dot(&data[i * self.dim..(i + 1) * self.dim], x);
                }
                0.5 * acc
            }
            Kind::Logistic { features, labels } => {
                let total: f64 = features
                    .iter()
                    .zip(labels)
                    .map(|(row, &y)| {
                        let z = dot(row, x);
                        softplus(z) - y * z
                    })
                    .sum();
                total / features.len() as f64
            }
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            Kind::Quadratic { a } => {
                let data = a.as_slice();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dot(&data[i * self.dim..(i + 1) * self.dim], x);
                }
            }
            Kind::Logistic { features, labels } => {
                out.fill(0.0);
                for (row, &y) in features.iter().zip(labels) {
                    let r = sigmoid(dot(row, x)) - y;
                    for (o, f) in out.iter_mut().zip(row) {
                        *o += r * f;
                    }
                }
                let n = features.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
            }
        }
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out);
        out
    }

    /// `(1/n) Σ σ(z)(1−σ(z)) a aᵀ` for logistic objectives.
    fn logistic_hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let Kind::Logistic { features, .. } = &self.kind else {
            return None;
        };
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for row in features {
            let s = sigmoid(dot(row, x));
            let a = nalgebra::DVector::from_column_slice(row);
            h.ger(s * (1.0 - s), &a, &a, 1.0);
        }
        Some(h / features.len() as f64)
    }

    /// `f(x) − f*`
    pub fn gap(&self, x: &[f64]) -> f64 {
        self.eval(x) - self.fstar
    }
}

/// `log(1 + eᶻ)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Deterministic gradient descent with backtracking from `x0` until
/// `‖∇f‖ ≤ tol`. Returns `(f, x, iterations)`.
pub fn descend_to_tolerance(obj: &Objective, x0: &[f64], tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>, usize)> {
    check_dim(obj.dim(), x0.len())?;
    let base = if obj.lipschitz() > 0.0 {
        1.0 / obj.lipschitz()
    } else {
        1.0
    };
    let mut x = x0.to_vec();
    let mut g = obj.grad(&x);
    let mut fx = obj.eval(&x);
    let mut step = base;
    let mut trial = vec![0.0; x.len()];
    for iter in 0..max_iter {
        let gn2 = linalg::norm2(&g);
        if gn2.sqrt() <= tol {
            return Ok((fx, x, iter));
        }
        step = (step * 2.0).min(base * 1e3);
        loop {
            for ((t, xi), gi) in trial.iter_mut().zip(&x).zip(&g) {
                *t = xi - step * gi;
            }
            let ft = obj.eval(&trial);
            // Steps at or below 1/L always descend in exact arithmetic; take them
            // even when the Armijo test is lost in rounding near the optimum.
            if ft <= fx - 0.5 * step * gn2 || step <= base {
                fx = ft;
                break;
            }
            step = (step * 0.5).max(base);
        }
        std::mem::swap(&mut x, &mut trial);
        obj.grad_into(&x, &mut g);
        if !linalg::all_finite(&x) {
            return Err(Error::NonFinite {
                at: format!("refinement iteration {iter}"),
            });
        }
    }
    let gn = norm(&g);
    if gn <= tol {
        Ok((fx, x, max_iter))
    } else {
        Err(Error::RefineFailed {
            iterations: max_iter,
            grad_norm: gn,
            tol,
        })
    }
}

/// Numerical optimum `(f*, x*)`. Quadratics return their analytic optimum
/// `(0, 0)` unchanged; other objectives descend from the current `x*`.
pub fn fstar_refine(obj: &Objective, tol: f64) -> Result<(f64, Vec<f64>)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "refinement tolerance {tol} must be positive"
        )));
    }
    if obj.is_quadratic() {
        return Ok((0.0, vec![0.0; obj.dim()]));
    }
    // Gradient descent stalls in rounding well before tight tolerances on
    // ill-conditioned data, so it only warms up a Newton finish.
    let warm = tol.max(NEWTON_HANDOFF);
    let (mut f, mut x, _) = descend_to_tolerance(obj, obj.xstar(), warm, REFINE_MAX_ITER)?;
    for _ in 0..NEWTON_MAX_ITER {
        let g = obj.grad(&x);
        if norm(&g) <= tol {
            return Ok((f, x));
        }
        let Some(h) = obj.logistic_hessian(&x) else { break };
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&nalgebra::DVector::from_vec(g));
        x.iter_mut().zip(step.iter()).for_each(|(xi, si)| *xi -= si);
        f = obj.eval(&x);
        if !linalg::all_finite(&x) {
            return Err(Error::NonFinite {
                at: "Newton refinement".into(),
            });
        }
    }
    let (f, x, _) = descend_to_tolerance(obj, &x, tol, REFINE_MAX_ITER)?;
    Ok((f, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(obj: &Objective, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (obj.eval(&p) - obj.eval(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn identity_quadratic() {
        let obj = Objective::quadratic(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(obj.eval(&[1.0, 1.0]), 1.0);
        assert_eq!(obj.grad(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert_eq!(obj.lipschitz(), 1.0);
    }

    #[test]
    fn diagonal_quadratic() {
        let obj = Objective::quadratic(DMatrix::from_diagonal(&nalgebra::dvector![2.0, 0.0])).unwrap();
        assert_eq!(obj.eval(&[1.0, 1.0]), 1.0);
        assert_eq!(obj.grad(&[1.0, 1.0]), vec![2.0, 0.0]);
        assert_eq!(obj.fstar(), 0.0);
    }

    #[test]
    fn rejects_non_square_and_indefinite() {
        assert!(matches!(
            Objective::quadratic(DMatrix::zeros(2, 3)),
            Err(Error::InvalidArgument(_))
        ));
        let err = Objective::quadratic(DMatrix::from_diagonal(&nalgebra::dvector![1.0, -0.5])).unwrap_err();
        match err {
            Error::NotPositiveSemidefinite { min_eigenvalue } => assert!((min_eigenvalue + 0.5).abs() < 1e-12),
            other => panic!("unexpected {other}"),
        }
        assert!(err_message_names_eigenvalue());
    }

    fn err_message_names_eigenvalue() -> bool {
        let err = Objective::quadratic(DMatrix::from_diagonal(&nalgebra::dvector![1.0, -0.5])).unwrap_err();
        err.to_string().contains("-5e-1")
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let obj = Objective::quadratic(a).unwrap();
        assert_eq!(obj.grad(&[1.0, 0.0]), vec![2.0, 0.5]);
    }

    #[test]
    fn logistic_single_zero_feature() {
        let obj = Objective::logistic(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!((obj.eval(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(obj.grad(&[0.0]), vec![0.0]);
        assert!((obj.eval(&[3.0]) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn logistic_two_points_against_finite_differences() {
        let obj = Objective::logistic(vec![vec![1.0], vec![-1.0]], vec![1.0, 0.0]).unwrap();
        assert!((obj.eval(&[0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        let g = obj.grad(&[0.0]);
        let fd = central_diff(&obj, &[0.0], 1e-5);
        assert!((g[0] - fd[0]).abs() < 1e-6, "{g:?} vs {fd:?}");
        assert!((g[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn logistic_value_at_zero_is_log2() {
        let features = vec![vec![0.3, -2.0], vec![1.5, 0.1], vec![-0.7, 0.9]];
        let obj = Objective::logistic(features, vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(obj.eval(&[0.0, 0.0]), std::f64::consts::LN_2);
    }

    #[test]
    fn logistic_rejects_bad_input() {
        assert!(Objective::logistic(vec![], vec![]).is_err());
        assert!(Objective::logistic(vec![vec![1.0]], vec![0.5]).is_err());
        assert!(Objective::logistic(vec![vec![1.0]], vec![2.0]).is_err());
    }

    #[test]
    fn logistic_lipschitz_is_gram_over_4n() {
        let obj = Objective::logistic(vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 0.0]).unwrap();
        assert!((obj.lipschitz() - 4.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_refine_is_identity() {
        let obj = Objective::quadratic(DMatrix::identity(3, 3)).unwrap();
        let (f, x) = fstar_refine(&obj, 1e-10).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn descent_from_far_start_reaches_tolerance() {
        let obj = Objective::quadratic(DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.3, 2.0])).unwrap();
        let (_, x, _) = descend_to_tolerance(&obj, &[1e3, -2e3, 5e2], 1e-10, 1_000_000).unwrap();
        assert!(norm(&obj.grad(&x)) <= 1e-10);
    }

    #[test]
    fn refine_reaches_tight_tolerance_on_blobs() {
        let d = crate::problems::synthetic_blobs(200, 10, 2.0, 0).unwrap();
        let obj = Objective::logistic(d.features, d.labels)
            .unwrap()
            .refined(1e-12)
            .unwrap();
        assert!(norm(&obj.grad(obj.xstar())) <= 1e-12);
        assert!(obj.gap(&[0.0; 10]) > 0.0);
    }

    #[test]
    fn refine_matches_one_dimensional_newton() {
        // Non-separable 1-d data: the minimizer is finite.
        let xs = [1.0, 2.0, -1.0];
        let ys = [1.0, 0.0, 0.0];
        let obj = Objective::logistic(xs.iter().map(|&v| vec![v]).collect(), ys.to_vec())
            .unwrap()
            .refined(1e-12)
            .unwrap();

        // Independent oracle: Newton on the scalar derivative.
        let mut b = 0.0_f64;
        for _ in 0..100 {
            let (mut d1, mut d2) = (0.0, 0.0);
            for (x, y) in xs.iter().zip(ys) {
                let s = 1.0 / (1.0 + (-b * x).exp());
                d1 += (s - y) * x;
                d2 += s * (1.0 - s) * x * x;
            }
            b -= d1 / d2;
        }
        let fstar_oracle: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (1.0 + (b * x).exp()).ln() - y * b * x)
            .sum::<f64>()
            / 3.0;
        assert!((obj.fstar() - fstar_oracle).abs() < 1e-9);
        assert!((obj.xstar()[0] - b).abs() < 1e-6);
    }

    #[test]
    fn random_quadratic_respects_spectrum() {
        let obj = Objective::random_quadratic(10, 3, 0.1, 1.0).unwrap();
        let eig = linalg::symmetric_eigenvalues(obj.quadratic_matrix().unwrap());
        assert!(eig[0] >= 0.1 - 1e-12 && eig[9] <= 1.0 + 1e-12);
        assert_eq!(obj.lipschitz(), eig[9]);
    }
}
