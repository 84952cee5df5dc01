use crate::error::{check_dim, Result};
use crate::optimizers::StepSchedule;

/// Coefficient multiplying the stochastic gradient in one SGDM step:
/// `2√η_k / ((k+2)√k)`.
pub fn noise_coefficient(k: u64, eta: f64) -> f64 {
    let kf = k as f64;
    2.0 * eta.sqrt() / ((kf + 2.0) * kf.sqrt())
}

/// Position form of SGDM:
/// `x_{k+1} = x_k + k/(k+2)·(x_k − x_{k−1}) − 2√η_k/((k+2)√k)·g`.
#[derive(Clone, Debug)]
pub struct SgdmState {
    k: u64,
    x_prev: Vec<f64>,
    x_cur: Vec<f64>,
    schedule: StepSchedule,
}

impl SgdmState {
    /// Starts at `k = 1` with `x_0 = x_1 = x1`.
    pub fn new(x1: Vec<f64>, schedule: StepSchedule) -> Self {
        SgdmState {
            k: 1,
            x_prev: x1.clone(),
            x_cur: x1,
            schedule,
        }
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// `x_k`
    pub fn x(&self) -> &[f64] {
        &self.x_cur
    }

    /// `x_{k−1}`
    pub fn x_prev(&self) -> &[f64] {
        &self.x_prev
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    /// `η_k` for the current `k`.
    pub fn eta(&self) -> f64 {
        self.schedule.eval(self.k)
    }

    /// Applies one step with gradient estimate `g` taken at `x_k`.
    pub fn step(&mut self, g: &[f64]) -> Result<()> {
        check_dim(self.x_cur.len(), g.len())?;
        let kf = self.k as f64;
        let momentum = kf / (kf + 2.0);
        let coef = noise_coefficient(self.k, self.eta());
        // Reuse x_prev's buffer for x_{k+1}.
        for ((p, &c), &gi) in self.x_prev.iter_mut().zip(&self.x_cur).zip(g) {
            *p = c + momentum * (c - *p) - coef * gi;
        }
        std::mem::swap(&mut self.x_prev, &mut self.x_cur);
        self.k += 1;
        Ok(())
    }
}

/// Velocity form: `x' = x + η v` and `v' = (v − (2/k)·g/√(kη)) / (1 + 2/k)`,
/// the exact solution of the implicit update `v' − v = −(2/k)v' − (2/k)g/√(kη)`.
///
/// Maps `(x_{k−1}, v_{k−1})` to `(x_k, v_k)`; `g` is the estimate taken at `x_k`.
pub fn velocity_step(x: &[f64], v: &[f64], k: u64, eta: f64, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(k >= 1 && eta > 0.0);
    let kf = k as f64;
    let push = (2.0 / kf) / (kf * eta).sqrt();
    let damp = 1.0 + 2.0 / kf;
    let x_next = x.iter().zip(v).map(|(xi, vi)| xi + eta * vi).collect();
    let v_next = v.iter().zip(g).map(|(vi, gi)| (vi - push * gi) / damp).collect();
    (x_next, v_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::ScheduleKind;

    #[test]
    fn zero_gradient_keeps_initial_point() {
        let mut s = SgdmState::new(vec![2.0], StepSchedule::anytime(1.0).unwrap());
        s.step(&[0.0]).unwrap();
        assert_eq!(s.x(), &[2.0]);
        assert_eq!(s.k(), 2);
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = SgdmState::new(vec![1.0], StepSchedule::anytime(1.0).unwrap());
        s.step(&[1.0]).unwrap();
        let expect = 1.0 - 1.0 / (6.0 * 3f64.ln());
        assert!((s.x()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn velocity_fixed_point_and_hand_solution() {
        let (x, v) = velocity_step(&[3.0], &[0.0], 5, 0.1, &[0.0]);
        assert_eq!((x, v), (vec![3.0], vec![0.0]));
        let (x, v) = velocity_step(&[0.0], &[1.0], 2, 1.0, &[0.0]);
        assert_eq!(x, vec![1.0]);
        assert_eq!(v, vec![0.5]);
    }

    #[test]
    fn velocity_form_matches_position_form() {
        // With velocity v_{k-1} = (x_k − x_{k−1})/η, the velocity recursion
        // reproduces the position recursion for constant η.
        let eta = 0.05;
        let sched = StepSchedule::new(ScheduleKind::Constant, eta, 0.0, 0.0).unwrap();
        let mut s = SgdmState::new(vec![1.0, -2.0], sched);
        let mut x = vec![1.0, -2.0];
        let mut v = vec![0.0, 0.0];
        for k in 1..=100u64 {
            let g = [x[0] * 0.7 + (k as f64).sin(), x[1] * 1.3 - 0.5];
            s.step(&g).unwrap();
            // Position form uses x_{k+1} = x_k + η v_k.
            let (_, v_next) = velocity_step(&x, &v, k, eta, &g);
            let (x_next, _) = velocity_step(&x, &v_next, k, eta, &g);
            x = x_next;
            v = v_next;
            for (a, b) in s.x().iter().zip(&x) {
                assert!((a - b).abs() < 1e-12, "step {k}: {a} vs {b}");
            }
        }
    }
}
