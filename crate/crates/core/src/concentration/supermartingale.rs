use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::AnytimeConstants;
use crate::error::{Error, Result};
use crate::lyapunov::DESCENT_TOL;
use crate::optimizers::{run_trajectory, Algorithm, RunOptions, StepSchedule, TrajectoryRecord};
use crate::problems::{NoiseModel, Objective};
use crate::rng::seed_split;
use crate::stats::MeanAccumulator;

/// Exponents above this are clamped before `exp`.
pub const EXPONENT_CLAMP: f64 = 700.0;

/// `S(k)`, `M(k)` and `N^t(k)` for `k = 0..=K` along one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleTrace {
    pub t: f64,
    /// `S(k) = Σ_{l≤k} a_l ‖θ_l‖²`
    pub s: Vec<f64>,
    /// `M(k) = E(k) − S(k)`
    pub m: Vec<f64>,
    /// Exponent of `N^t(k)`.
    pub log_n: Vec<f64>,
    pub n: Vec<f64>,
    pub clamped: bool,
    /// Largest `(M(k) − M(k−1) − √a_k⟨θ_k, τ_k⟩) / (1 + |E(k)|)`.
    pub max_increment_residual: f64,
    /// Steps where `‖τ_k‖² > E(k−1)` beyond tolerance.
    pub tau_violations: usize,
}

impl SupermartingaleTrace {
    pub fn increment_bound_holds(&self) -> bool {
        self.max_increment_residual <= DESCENT_TOL
    }
}

/// Builds the trace of an SGDM record.
///
/// `N^t(k) = exp(P_{k+1}·t·M(k) − Σ_{l≤k} a_l σ² γ2 t S(l−1))` with the tail
/// product `P_{k+1} = γ2 / Π_{l≤k}(1 + a_l σ²)`. Both occurrences of `γ2`
/// take the upper end of its bracket; with `t = 1/γ2⁺` the unknown exact
/// `γ2` then cancels and the result equals the exact `N^{1/γ2}`.
pub fn supermartingale_trace(
    record: &TrajectoryRecord,
    constants: &AnytimeConstants,
    t: f64,
) -> Result<SupermartingaleTrace> {
    let gamma2 = constants.gammas.gamma2.hi;
    if !(t > 0.0 && t <= 1.0 / gamma2 * (1.0 + 1e-15)) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must lie in (0, 1/gamma2 = {}]",
            1.0 / gamma2
        )));
    }
    if record.algorithm != Algorithm::Sgdm {
        return Err(Error::InvalidArgument(
            "supermartingale traces need an SGDM record".into(),
        ));
    }
    let sigma2 = constants.sigma2;
    let k_max = record.rows.len();
    let mut s = Vec::with_capacity(k_max + 1);
    let mut m = Vec::with_capacity(k_max + 1);
    let mut log_n = Vec::with_capacity(k_max + 1);
    let mut clamped = false;
    let mut max_residual = f64::NEG_INFINITY;
    let mut tau_violations = 0;

    let mut push_n = |log_n: &mut Vec<f64>, x: f64| {
        if x > EXPONENT_CLAMP {
            clamped = true;
            log_n.push(EXPONENT_CLAMP);
        } else {
            log_n.push(x);
        }
    };

    s.push(0.0);
    m.push(record.energy0);
    push_n(&mut log_n, gamma2 * t * record.energy0);

    let mut log_partial = 0.0; // log Π_{l≤k}(1 + a_l σ²)
    let mut drift = 0.0; // Σ_{l≤k} a_l σ² γ2 t S(l−1)
    for row in &record.rows {
        let a = 16.0 * row.eta / row.k as f64;
        let s_prev = *s.last().unwrap();
        let m_prev = *m.last().unwrap();
        drift += a * sigma2 * gamma2 * t * s_prev;
        log_partial += (a * sigma2).ln_1p();
        let s_k = s_prev + a * row.theta_norm2;
        let m_k = row.lyapunov - s_k;
        let tail = gamma2 * (-log_partial).exp();
        push_n(&mut log_n, tail * t * m_k - drift);

        let residual = (m_k - m_prev - a.sqrt() * row.theta_dot_tau) / (1.0 + row.lyapunov.abs());
        max_residual = max_residual.max(residual);
        if row.tau_norm2 - row.lyapunov_prev > DESCENT_TOL * (1.0 + row.lyapunov_prev.abs()) {
            tau_violations += 1;
        }
        s.push(s_k);
        m.push(m_k);
    }
    let n = log_n.iter().map(|x| x.exp()).collect();
    Ok(SupermartingaleTrace {
        t,
        s,
        m,
        log_n,
        n,
        clamped,
        max_increment_residual: if k_max == 0 { 0.0 } else { max_residual },
        tau_violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupermartingaleMcReport {
    pub runs: usize,
    pub horizon: u64,
    pub t: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Largest `(mean_k − mean_{k−1}) / √(se_k² + se_{k−1}²)`.
    pub max_rise_z: f64,
    pub non_increasing_within_3se: bool,
    pub max_increment_residual: f64,
    pub tau_violations: usize,
    pub clamped_runs: usize,
}

/// Monte-Carlo mean of `N^t(k)` with `t = 1/γ2⁺` over `runs` SGDM runs.
///
/// The unconditional mean of a supermartingale is non-increasing; the check
/// allows each step to rise by at most `3·SE`.
#[allow(clippy::too_many_arguments)]
pub fn supermartingale_mc(
    obj: &Objective,
    noise: &NoiseModel,
    schedule: &StepSchedule,
    constants: &AnytimeConstants,
    steps: u64,
    runs: usize,
    seed: u64,
    opts: &RunOptions,
) -> Result<SupermartingaleMcReport> {
    let t = 1.0 / constants.gammas.gamma2.hi;
    let traces: Vec<SupermartingaleTrace> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let rec = run_trajectory(obj, noise, Algorithm::Sgdm, schedule, steps, seed_split(seed, i), opts)?;
            supermartingale_trace(&rec, constants, t)
        })
        .collect::<Result<_>>()?;
    let len = steps as usize + 1;
    let mut mean = Vec::with_capacity(len);
    let mut stderr = Vec::with_capacity(len);
    for k in 0..len {
        let acc: MeanAccumulator = traces.iter().map(|tr| tr.n[k]).collect();
        mean.push(acc.mean());
        stderr.push(acc.stderr());
    }
    let mut max_rise_z = f64::NEG_INFINITY;
    let mut ok = true;
    for k in 1..len {
        let rise = mean[k] - mean[k - 1];
        let se = stderr[k].hypot(stderr[k - 1]);
        ok &= rise <= 3.0 * se;
        let z = if se > 0.0 {
            rise / se
        } else if rise > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_rise_z = max_rise_z.max(z);
    }
    Ok(SupermartingaleMcReport {
        runs,
        horizon: steps,
        t,
        mean,
        stderr,
        max_rise_z,
        non_increasing_within_3se: ok,
        max_increment_residual: traces
            .iter()
            .map(|t| t.max_increment_residual)
            .fold(f64::NEG_INFINITY, f64::max),
        tau_violations: traces.iter().map(|t| t.tau_violations).sum(),
        clamped_runs: traces.iter().filter(|t| t.clamped).count(),
    })
}
