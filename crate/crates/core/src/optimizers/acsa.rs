use crate::error::{check_dim, Error, Result};

/// Accelerated stochastic approximation with three sequences:
///
/// ```text
/// y_k = (1 − α_k) x_{k−1} + α_k z_{k−1}
/// z_k = z_{k−1} − γ_k g(y_k)
/// x_k = (1 − α_k) x_{k−1} + α_k z_k
/// ```
///
/// with `α_k = 2/(k+1)` and `1/γ_k = 2L/k + γ√k`, or `γ_k = 1/(γ√k)` when
/// `simplified` is set.
#[derive(Clone, Debug)]
pub struct AcsaState {
    k: u64,
    x: Vec<f64>,
    z: Vec<f64>,
    gamma_scale: f64,
    lipschitz: f64,
    simplified: bool,
}

impl AcsaState {
    /// Starts at `k = 1` with `x_0 = z_0 = x0`.
    pub fn new(x0: Vec<f64>, gamma_scale: f64, lipschitz: f64, simplified: bool) -> Result<Self> {
        if !(gamma_scale > 0.0 && gamma_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "AC-SA gamma {gamma_scale} must be positive"
            )));
        }
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz constant {lipschitz} must be >= 0"
            )));
        }
        Ok(AcsaState {
            k: 1,
            z: x0.clone(),
            x: x0,
            gamma_scale,
            lipschitz,
            simplified,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `x_{k−1}`
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `z_{k−1}`
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn alpha(k: u64) -> f64 {
        2.0 / (k as f64 + 1.0)
    }

    /// `γ_k` for the current step.
    pub fn gamma(&self) -> f64 {
        let kf = self.k as f64;
        let inv = if self.simplified {
            self.gamma_scale * kf.sqrt()
        } else {
            2.0 * self.lipschitz / kf + self.gamma_scale * kf.sqrt()
        };
        1.0 / inv
    }

    /// `y_k`, where the gradient for the next step must be taken.
    pub fn query_point(&self) -> Vec<f64> {
        let a = Self::alpha(self.k);
        self.x.iter().zip(&self.z).map(|(x, z)| (1.0 - a) * x + a * z).collect()
    }

    /// Completes step `k` given `g = g(y_k)`.
    pub fn step_with(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x.len(), g.len())?;
        let a = Self::alpha(self.k);
        let gamma = self.gamma();
        for ((x, z), gi) in self.x.iter_mut().zip(self.z.iter_mut()).zip(g) {
            *z -= gamma * gi;
            *x = (1.0 - a) * *x + a * *z;
        }
        self.k += 1;
        Ok(())
    }

    /// One step querying `oracle` at `y_k`.
    pub fn step<F>(&mut self, mut oracle: F) -> Result<()>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let y = self.query_point();
        let g = oracle(&y);
        self.step_with(&g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_collapses_to_z() {
        let mut s = AcsaState::new(vec![4.0], 1.0, 1.0, false).unwrap();
        assert_eq!(s.query_point(), s.z().to_vec());
        s.step(|y| vec![y[0]]).unwrap();
        assert_eq!(s.x(), s.z());
    }

    #[test]
    fn matches_hand_loop_on_scalar_quadratic() {
        let mut s = AcsaState::new(vec![1.0], 1.0, 1.0, false).unwrap();
        let (mut x, mut z) = (1.0f64, 1.0f64);
        for k in 1..=5u64 {
            s.step(|y| vec![y[0]]).unwrap();
            let a = 2.0 / (k as f64 + 1.0);
            let gamma = 1.0 / (2.0 / k as f64 + (k as f64).sqrt());
            let y = (1.0 - a) * x + a * z;
            z -= gamma * y;
            x = (1.0 - a) * x + a * z;
            assert!((s.x()[0] - x).abs() < 1e-14);
            assert!((s.z()[0] - z).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_gradient_converges_to_z0() {
        let mut s = AcsaState::new(vec![1.0], 1.0, 1.0, false).unwrap();
        // Move x off z first, then run with zero gradients.
        s.x = vec![5.0];
        for _ in 0..200 {
            s.step(|_| vec![0.0]).unwrap();
            assert_eq!(s.z(), &[1.0]);
        }
        assert!((s.x()[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn simplified_gamma() {
        let s = AcsaState::new(vec![0.0], 2.0, 10.0, true).unwrap();
        assert_eq!(s.gamma(), 0.5);
    }
}
