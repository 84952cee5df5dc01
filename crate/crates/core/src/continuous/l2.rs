use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::continuous::{grid_index, ode_integrate, sgdm_velocity_advance, OdeParams};
use crate::error::{check_dim, Error, Result};
use crate::linalg::dist2;
use crate::problems::Objective;
use crate::rng::{run_rng, seed_split};
use crate::stats::MeanAccumulator;

/// Minimum number of SGDM steps in `[T0, T]` for an estimate to count.
pub const MIN_L2_STEPS: u64 = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct L2Row {
    pub eta: f64,
    pub mean_sq_dist: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Inputs of [`l2_limit_estimate`].
#[derive(Clone, Debug)]
pub struct L2Setup {
    pub t0: f64,
    pub t_end: f64,
    /// RK4 step for the reference ODE solve.
    pub dt: f64,
    /// Per-coordinate standard deviation of `ξ`.
    pub noise_sd: f64,
    /// Starting point `x_0 = x_1` of the warm-up run.
    pub x_init: Vec<f64>,
    pub runs: usize,
}

/// Monte-Carlo estimate of `E‖x_{T/η} − X(T)‖²` for each `η`.
///
/// Per `η`: one warm-up SGDM run from `x_init` to `k0 = ⌊T0/η⌋` fixes the
/// shared start `(X(T0), V(T0)) = (x_{k0}, v_{k0})`, with `v_{k0}` the
/// velocity-form iterate `(x_{k0+1} − x_{k0})/η`. The ODE `(p, α) = (1, 3/2)`
/// is solved once from there and `runs` independent SGDM continuations are
/// measured against `X(T)`.
pub fn l2_limit_estimate(obj: &Objective, etas: &[f64], setup: &L2Setup, seed: u64) -> Result<Vec<L2Row>> {
    check_dim(obj.dim(), setup.x_init.len())?;
    if setup.runs < 2 {
        return Err(Error::InvalidArgument("L2 estimate needs at least two runs".into()));
    }
    if !(setup.t0 > 0.0 && setup.t_end >= setup.t0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < t0 <= t_end, got [{}, {}]",
            setup.t0, setup.t_end
        )));
    }
    let mut rows = Vec::with_capacity(etas.len());
    for (idx, &eta) in etas.iter().enumerate() {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta = {eta} must be positive")));
        }
        if setup.t_end == setup.t0 {
            rows.push(L2Row {
                eta,
                mean_sq_dist: 0.0,
                stderr: 0.0,
                runs: setup.runs,
            });
            continue;
        }
        let k0 = grid_index(setup.t0, eta).max(1);
        let k1 = grid_index(setup.t_end, eta);
        if k1 < k0 + MIN_L2_STEPS {
            return Err(Error::InvalidArgument(format!(
                "eta = {eta} leaves {} steps in [{}, {}]; need at least {MIN_L2_STEPS}",
                k1.saturating_sub(k0),
                setup.t0,
                setup.t_end
            )));
        }
        let eta_seed = seed_split(seed, idx as u64);

        let mut x = setup.x_init.clone();
        let mut v = vec![0.0; x.len()];
        let mut warm = run_rng(eta_seed, 0);
        sgdm_velocity_advance(obj, eta, 1, k0, &mut x, &mut v, setup.noise_sd, &mut warm, |_, _, _| {})?;

        let params = OdeParams::sgdm(k0 as f64 * eta, k1 as f64 * eta, setup.dt);
        let target = ode_integrate(obj, &params, &x, &v)?.final_x().to_vec();

        let dists: Vec<f64> = (0..setup.runs)
            .into_par_iter()
            .map(|i| {
                let mut rng = run_rng(eta_seed, i as u64 + 1);
                let mut xr = x.clone();
                let mut vr = v.clone();
                sgdm_velocity_advance(
                    obj,
                    eta,
                    k0 + 1,
                    k1,
                    &mut xr,
                    &mut vr,
                    setup.noise_sd,
                    &mut rng,
                    |_, _, _| {},
                )?;
                Ok(dist2(&xr, &target))
            })
            .collect::<Result<_>>()?;
        let mut acc = MeanAccumulator::default();
        dists.iter().for_each(|&d| acc.push(d));
        rows.push(L2Row {
            eta,
            mean_sq_dist: acc.mean(),
            stderr: acc.stderr(),
            runs: setup.runs,
        });
    }
    Ok(rows)
}

/// Monotone-decrease verdicts for rows ordered by decreasing `η`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct L2Trend {
    /// `est_{i+1} ≤ est_i + 2·√(se_i² + se_{i+1}²)` for every consecutive pair.
    pub decreasing_within_2se: bool,
    /// `est_{i+1} < est_i` for every consecutive pair.
    pub strictly_decreasing: bool,
    /// Least-squares slope of `log est` against `log η` (informational).
    pub log_log_slope: f64,
}

pub fn l2_trend(rows: &[L2Row]) -> L2Trend {
    let mut within = true;
    let mut strict = true;
    for w in rows.windows(2) {
        let slack = 2.0 * w[0].stderr.hypot(w[1].stderr);
        within &= w[1].mean_sq_dist <= w[0].mean_sq_dist + slack;
        strict &= w[1].mean_sq_dist < w[0].mean_sq_dist;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_sq_dist > 0.0)
        .map(|r| (r.eta.ln(), r.mean_sq_dist.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            f64::NAN
        }
    } else {
        f64::NAN
    };
    L2Trend {
        decreasing_within_2se: within,
        strictly_decreasing: strict,
        log_log_slope: slope,
    }
}

pub fn write_l2_csv<W: Write>(rows: &[L2Row], mut w: W) -> std::io::Result<()> {
    writeln!(w, "eta,mean_sq_dist,stderr,runs")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.eta, r.mean_sq_dist, r.stderr, r.runs)?;
    }
    Ok(())
}
