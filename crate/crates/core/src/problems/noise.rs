use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    GaussianIsotropic,
    BoundedUniform,
}

/// Additive gradient noise `ξ`.
///
/// Carries two distinct scales: `sigma2`, the second-moment bound
/// `E‖ξ‖² ≤ σ²` used by the expectation analysis, and `hp_sigma2`, the
/// sub-Gaussian scale with `E[exp(‖ξ‖²/σ²)] ≤ e` used by the anytime
/// analysis. They are never interchangeable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    kind: NoiseKind,
    dim: usize,
    /// Per-coordinate variance (Gaussian) or half-width (uniform).
    scale: f64,
}

impl NoiseModel {
    /// `ξ ~ N(0, s² I)`.
    pub fn gaussian(dim: usize, coord_variance: f64) -> Result<Self> {
        if !(coord_variance >= 0.0 && coord_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance {coord_variance} must be finite and >= 0"
            )));
        }
        Ok(NoiseModel {
            kind: NoiseKind::GaussianIsotropic,
            dim,
            scale: coord_variance,
        })
    }

    /// Independent `U[-h, h]` coordinates.
    pub fn uniform(dim: usize, half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise half-width {half_width} must be finite and >= 0"
            )));
        }
        Ok(NoiseModel {
            kind: NoiseKind::BoundedUniform,
            dim,
            scale: half_width,
        })
    }

    pub fn none(dim: usize) -> Self {
        NoiseModel {
            kind: NoiseKind::GaussianIsotropic,
            dim,
            scale: 0.0,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_noiseless(&self) -> bool {
        self.scale == 0.0
    }

    pub fn coord_variance(&self) -> f64 {
        match self.kind {
            NoiseKind::GaussianIsotropic => self.scale,
            NoiseKind::BoundedUniform => self.scale * self.scale / 3.0,
        }
    }

    /// `E‖ξ‖²`, the constant in `E‖g‖² ≤ ‖∇f‖² + σ²`.
    pub fn sigma2(&self) -> f64 {
        self.dim as f64 * self.coord_variance()
    }

    /// Sub-Gaussian scale with `E[exp(‖ξ‖²/σ²)] ≤ e`.
    ///
    /// For `N(0, s²Iₙ)`, `E[exp(‖ξ‖²/σ²)] = (1 − 2s²/σ²)^{−n/2}`; the value
    /// `2ns²/(1 − e^{−2/n})` is `n` times the tight threshold. For uniform
    /// noise `‖ξ‖² ≤ nh²` surely.
    pub fn hp_sigma2(&self) -> f64 {
        let n = self.dim as f64;
        match self.kind {
            NoiseKind::GaussianIsotropic => {
                if self.scale == 0.0 {
                    0.0
                } else {
                    2.0 * n * self.scale / (-(-2.0 / n).exp_m1())
                }
            }
            NoiseKind::BoundedUniform => n * self.scale * self.scale,
        }
    }

    /// Overwrites `out` with one draw of `ξ`.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        if self.scale == 0.0 {
            out.fill(0.0);
            return;
        }
        match self.kind {
            NoiseKind::GaussianIsotropic => {
                let sd = self.scale.sqrt();
                for o in out.iter_mut() {
                    *o = sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
            NoiseKind::BoundedUniform => {
                for o in out.iter_mut() {
                    *o = rng.random_range(-self.scale..=self.scale);
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sample_into(rng, &mut out);
        out
    }
}

/// `g = ∇f(x) + ξ`, written into `out`; `xi` receives the noise draw.
pub fn sample_gradient_into(
    obj: &Objective,
    noise: &NoiseModel,
    x: &[f64],
    rng: &mut Rng,
    xi: &mut [f64],
    out: &mut [f64],
) {
    obj.grad_into(x, out);
    noise.sample_into(rng, xi);
    for (o, e) in out.iter_mut().zip(xi.iter()) {
        *o += e;
    }
}

/// Stochastic gradient `∇f(x) + ξ`. Deterministic given the generator state.
pub fn sample_gradient(obj: &Objective, noise: &NoiseModel, x: &[f64], rng: &mut Rng) -> Vec<f64> {
    let mut xi = vec![0.0; obj.dim()];
    let mut g = vec![0.0; obj.dim()];
    sample_gradient_into(obj, noise, x, rng, &mut xi, &mut g);
    g
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn noiseless_gradient_is_exact() {
        let obj = Objective::quadratic(DMatrix::identity(3, 3) * 2.0).unwrap();
        let noise = NoiseModel::gaussian(3, 0.0).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(
            sample_gradient(&obj, &noise, &[1.0, 2.0, 3.0], &mut rng),
            vec![2.0, 4.0, 6.0]
        );
    }

    #[test]
    fn same_seed_same_draw() {
        let obj = Objective::quadratic(DMatrix::identity(4, 4)).unwrap();
        let noise = NoiseModel::gaussian(4, 100.0).unwrap();
        let a = sample_gradient(&obj, &noise, &[1.0; 4], &mut rng_from_seed(5));
        let b = sample_gradient(&obj, &noise, &[1.0; 4], &mut rng_from_seed(5));
        assert_eq!(a, b);
    }

    #[test]
    fn hp_scale_formula() {
        let noise = NoiseModel::gaussian(10, 1.0).unwrap();
        let expect = 20.0 / (1.0 - (-0.2f64).exp());
        assert!((noise.hp_sigma2() - expect).abs() < 1e-12 * expect);
        assert_eq!(noise.sigma2(), 10.0);
        assert_eq!(NoiseModel::uniform(4, 0.5).unwrap().hp_sigma2(), 1.0);
    }

    #[test]
    fn rejects_negative_scales() {
        assert!(NoiseModel::gaussian(2, -1.0).is_err());
        assert!(NoiseModel::uniform(2, f64::NAN).is_err());
    }
}
