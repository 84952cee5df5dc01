use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, dot, norm2};
use crate::lyapunov::{descent_rhs, discrete_energy, tau};
use crate::optimizers::{sgd_step_eta, AcsaState, SgdmState, StepSchedule};
use crate::problems::{sample_gradient_into, NoiseModel, Objective};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sgdm,
    Sgd,
    Acsa,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sgdm => "sgdm",
            Algorithm::Sgd => "sgd",
            Algorithm::Acsa => "acsa",
        }
    }
}

/// Knobs of [`run_trajectory`] beyond the core inputs.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Initial point; `None` means the all-ones vector.
    pub x0: Option<Vec<f64>>,
    /// Keep `x_k`, `g_k`, `∇f(x_k)` per row.
    pub keep_vectors: bool,
    pub acsa_gamma: f64,
    pub acsa_simplified: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            x0: None,
            keep_vectors: false,
            acsa_gamma: 1.0,
            acsa_simplified: false,
        }
    }
}

/// Vectors logged when [`RunOptions::keep_vectors`] is set.
#[derive(Clone, Debug, PartialEq)]
pub struct RowVectors {
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub grad: Vec<f64>,
}

/// One logged step `k`.
///
/// For SGDM and SGD the iterate is `x_k` and the gradient is taken there.
/// For AC-SA the iterate is `x_{k−1}` and the gradient is taken at `y_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub k: u64,
    pub f_gap: f64,
    /// `η_k` (for AC-SA, `γ_k`).
    pub eta: f64,
    /// `E(k)`
    pub lyapunov: f64,
    /// `E(k−1)`
    pub lyapunov_prev: f64,
    /// `E(k) − E(k−1)`
    pub descent_lhs: f64,
    pub descent_rhs: f64,
    pub grad_norm: f64,
    pub noise_norm: f64,
    /// `‖θ_k‖²` with `θ_k = ∇f(x_k) − g_k`.
    pub theta_norm2: f64,
    /// `⟨θ_k, τ_k⟩`
    pub theta_dot_tau: f64,
    /// `‖τ_k‖²`
    pub tau_norm2: f64,
    pub vectors: Option<RowVectors>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub algorithm: Algorithm,
    pub schedule_monotone: bool,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// `f(x_0) − f*`
    pub f_gap0: f64,
    /// `η_0`
    pub eta0: f64,
    /// `E(0)`
    pub energy0: f64,
    pub rows: Vec<TrajectoryRow>,
}

pub const TRAJECTORY_CSV_HEADER: &str = "k,f_gap,eta,lyapunov,descent_lhs,descent_rhs,grad_norm,noise_norm";

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn f_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f_gap).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.k, r.f_gap, r.eta, r.lyapunov, r.descent_lhs, r.descent_rhs, r.grad_norm, r.noise_norm
            )?;
        }
        Ok(())
    }

    /// Row-major little-endian `f64` dump of `x_k` for every row.
    pub fn write_state_dump<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            let v = r.vectors.as_ref().ok_or_else(|| {
                Error::InvalidArgument("state dump needs a trajectory recorded with keep_vectors".into())
            })?;
            for x in &v.x {
                w.write_all(&x.to_le_bytes()).map_err(|e| Error::io("state dump", e))?;
            }
        }
        Ok(())
    }
}

enum Stepper {
    Sgdm(SgdmState),
    Sgd,
    Acsa(AcsaState),
}

/// Runs `steps` iterations of `algorithm` from `x_0 = x_1` and logs every
/// step, including the discrete energy and the descent-inequality terms.
///
/// Deterministic given `seed`; all randomness is drawn from one generator.
pub fn run_trajectory(
    obj: &Objective,
    noise: &NoiseModel,
    algorithm: Algorithm,
    schedule: &StepSchedule,
    steps: u64,
    seed: u64,
    opts: &RunOptions,
) -> Result<TrajectoryRecord> {
    if steps == 0 {
        return Err(Error::InvalidArgument("number of steps must be at least 1".into()));
    }
    let dim = obj.dim();
    check_dim(dim, noise.dim())?;
    let x0 = opts.x0.clone().unwrap_or_else(|| vec![1.0; dim]);
    check_dim(dim, x0.len())?;
    if !linalg::all_finite(&x0) {
        return Err(Error::NonFinite {
            at: "initial point".into(),
        });
    }
    let xstar = obj.xstar();
    let lip = obj.lipschitz();
    let mut rng = rng_from_seed(seed);

    let mut stepper = match algorithm {
        Algorithm::Sgdm => Stepper::Sgdm(SgdmState::new(x0.clone(), schedule.clone())),
        Algorithm::Sgd => Stepper::Sgd,
        Algorithm::Acsa => Stepper::Acsa(AcsaState::new(x0.clone(), opts.acsa_gamma, lip, opts.acsa_simplified)?),
    };

    let f_gap0 = obj.gap(&x0);
    let eta0 = match &stepper {
        Stepper::Acsa(s) => s.gamma(),
        _ => schedule.eval(0),
    };
    let energy0 = discrete_energy(&x0, &x0, 0, eta0, f_gap0, xstar)?;

    let mut x_prev = x0.clone();
    let mut x_cur = x0.clone();
    let mut x_next = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut xi = vec![0.0; dim];
    let mut e_prev = energy0;
    let mut rows = Vec::with_capacity(steps as usize);

    for k in 1..=steps {
        let (eta, query) = match &stepper {
            Stepper::Acsa(s) => (s.gamma(), s.query_point()),
            _ => (schedule.eval(k), x_cur.clone()),
        };
        sample_gradient_into(obj, noise, &query, &mut rng, &mut xi, &mut g);
        grad.iter_mut().zip(&g).zip(&xi).for_each(|((d, gi), e)| *d = gi - e);
        let f_gap = obj.gap(&x_cur);
        let rhs = descent_rhs(&x_cur, &x_prev, &g, &grad, f_gap, k, eta, lip, xstar);
        let t = tau(&x_cur, &x_prev, k, xstar);
        // θ_k = ∇f − g = −ξ
        let theta_dot_tau = -dot(&xi, &t);

        match &mut stepper {
            Stepper::Sgdm(s) => {
                s.step(&g)?;
                x_next.copy_from_slice(s.x());
            }
            Stepper::Sgd => {
                x_next.copy_from_slice(&x_cur);
                sgd_step_eta(&mut x_next, eta, &g);
            }
            Stepper::Acsa(s) => {
                s.step_with(&g)?;
                x_next.copy_from_slice(s.x());
            }
        }
        if !linalg::all_finite(&x_next) || !f_gap.is_finite() {
            return Err(Error::NonFinite {
                at: format!("{} iteration {k}", algorithm.as_str()),
            });
        }
        let e_k = discrete_energy(&x_next, &x_cur, k, eta, f_gap, xstar)?;
        let vectors = opts.keep_vectors.then(|| RowVectors {
            x: x_cur.clone(),
            g: g.clone(),
            grad: grad.clone(),
        });
        rows.push(TrajectoryRow {
            k,
            f_gap,
            eta,
            lyapunov: e_k,
            lyapunov_prev: e_prev,
            descent_lhs: e_k - e_prev,
            descent_rhs: rhs,
            grad_norm: norm2(&grad).sqrt(),
            noise_norm: norm2(&xi).sqrt(),
            theta_norm2: norm2(&xi),
            theta_dot_tau,
            tau_norm2: norm2(&t),
            vectors,
        });
        e_prev = e_k;
        std::mem::swap(&mut x_prev, &mut x_cur);
        std::mem::swap(&mut x_cur, &mut x_next);
    }

    Ok(TrajectoryRecord {
        algorithm,
        schedule_monotone: schedule.is_monotone(),
        seed,
        x0,
        f_gap0,
        eta0,
        energy0,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::lyapunov::check_descent;

    fn quad10() -> Objective {
        Objective::random_quadratic(10, 7, 0.1, 1.0).unwrap()
    }

    #[test]
    fn single_step_logs_initial_point() {
        let obj = Objective::quadratic(DMatrix::identity(2, 2)).unwrap();
        let noise = NoiseModel::none(2);
        let sched = StepSchedule::anytime(1.0).unwrap();
        let opts = RunOptions {
            x0: Some(vec![3.0, -1.0]),
            keep_vectors: true,
            ..Default::default()
        };
        let rec = run_trajectory(&obj, &noise, Algorithm::Sgdm, &sched, 1, 0, &opts).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].k, 1);
        assert_eq!(rec.rows[0].vectors.as_ref().unwrap().x, vec![3.0, -1.0]);
    }

    #[test]
    fn same_seed_same_record() {
        let obj = quad10();
        let noise = NoiseModel::gaussian(10, 100.0).unwrap();
        let sched = StepSchedule::anytime(obj.lipschitz()).unwrap();
        let opts = RunOptions::default();
        let a = run_trajectory(&obj, &noise, Algorithm::Sgdm, &sched, 200, 11, &opts).unwrap();
        let b = run_trajectory(&obj, &noise, Algorithm::Sgdm, &sched, 200, 11, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_run_satisfies_descent() {
        let obj = quad10();
        let noise = NoiseModel::none(10);
        let sched = StepSchedule::anytime(obj.lipschitz()).unwrap();
        let rec = run_trajectory(&obj, &noise, Algorithm::Sgdm, &sched, 500, 1, &RunOptions::default()).unwrap();
        let rep = check_descent(&rec).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let obj = quad10();
        let sched = StepSchedule::anytime(obj.lipschitz()).unwrap();
        let rec = run_trajectory(
            &obj,
            &NoiseModel::none(10),
            Algorithm::Sgd,
            &sched,
            3,
            0,
            &RunOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(TRAJECTORY_CSV_HEADER));
    }

    #[test]
    fn state_dump_layout() {
        let obj = Objective::quadratic(DMatrix::identity(2, 2)).unwrap();
        let sched = StepSchedule::anytime(1.0).unwrap();
        let opts = RunOptions {
            x0: Some(vec![1.0, 2.0]),
            keep_vectors: true,
            ..Default::default()
        };
        let rec = run_trajectory(&obj, &NoiseModel::none(2), Algorithm::Sgdm, &sched, 2, 0, &opts).unwrap();
        let mut buf = Vec::new();
        rec.write_state_dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 2 * 2 * 8);
        assert_eq!(f64::from_le_bytes(buf[8..16].try_into().unwrap()), 2.0);
    }

    #[test]
    fn divergence_is_reported() {
        let obj = Objective::quadratic(DMatrix::identity(1, 1) * 10.0).unwrap();
        let sched = StepSchedule::new(crate::optimizers::ScheduleKind::Constant, 1e3, 0.0, 0.0).unwrap();
        let err = run_trajectory(
            &obj,
            &NoiseModel::none(1),
            Algorithm::Sgd,
            &sched,
            10_000,
            0,
            &RunOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
