use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::{AnytimeConstants, Bracket};
use crate::error::{Error, Result};
use crate::optimizers::{run_trajectory, Algorithm, RunOptions, StepSchedule};
use crate::problems::{NoiseModel, Objective};
use crate::rng::seed_split;

#[derive(Clone, Debug, Serialize)]
pub struct BoundConstants {
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl From<&AnytimeConstants> for BoundConstants {
    fn from(c: &AnytimeConstants) -> Self {
        let pair = |b: Bracket| [b.lo, b.hi];
        BoundConstants {
            gamma1: pair(c.gammas.gamma1),
            gamma2: pair(c.gammas.gamma2),
            c1: c.c1,
            c2: c.c2,
        }
    }
}

/// Coverage at one confidence level.
#[derive(Clone, Debug, Serialize)]
pub struct CoverageEntry {
    pub beta: f64,
    pub runs: usize,
    pub horizon: u64,
    pub violations: usize,
    pub fraction: f64,
    pub bound_constants: BoundConstants,
}

impl CoverageEntry {
    /// The bound is violated by at most a `2β` fraction of runs.
    pub fn passed(&self) -> bool {
        self.fraction <= 2.0 * self.beta
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverageReport {
    pub entries: Vec<CoverageEntry>,
    /// Per run, `max_{0≤k≤K} (f(x_k) − f*) / rate(k)`. A run violates the
    /// bound at `β` exactly when this exceeds `C1 + C2 log(1/β)`.
    #[serde(skip)]
    pub worst_ratio: Vec<f64>,
    pub energy0: f64,
    /// Fractions never increase as `β` decreases.
    pub monotone_in_beta: bool,
}

/// Runs `runs` SGDM trajectories of length `steps` and counts, for each `β`,
/// how many break `f(x_k) − f* ≤ (C1 + C2 log(1/β))·rate(k)` at some
/// `0 ≤ k ≤ steps`. `E(0)` in `C1` comes from the actual initial point.
#[allow(clippy::too_many_arguments)]
pub fn anytime_coverage(
    obj: &Objective,
    noise: &NoiseModel,
    schedule: &StepSchedule,
    steps: u64,
    betas: &[f64],
    runs: usize,
    seed: u64,
    tail_tol: f64,
    opts: &RunOptions,
) -> Result<CoverageReport> {
    if runs == 0 {
        return Err(Error::InvalidArgument("coverage needs at least one run".into()));
    }
    for &b in betas {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidArgument(format!("beta = {b} must lie in (0, 1]")));
        }
    }
    // E(0) depends only on the shared initial point; a one-step run yields it.
    let probe = run_trajectory(obj, &NoiseModel::none(obj.dim()), Algorithm::Sgdm, schedule, 1, 0, opts)?;
    let constants = AnytimeConstants::new(schedule, noise.hp_sigma2(), probe.energy0, tail_tol)?;

    let worst_ratio: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let rec = run_trajectory(obj, noise, Algorithm::Sgdm, schedule, steps, seed_split(seed, i), opts)?;
            let first = rec.f_gap0 / constants.rate(0);
            Ok(rec
                .rows
                .iter()
                .map(|r| r.f_gap / constants.rate(r.k))
                .fold(first, f64::max))
        })
        .collect::<Result<_>>()?;

    let entries: Vec<CoverageEntry> = betas
        .iter()
        .map(|&beta| {
            let level = constants.c1 + constants.c2 * (1.0 / beta).ln();
            let violations = worst_ratio.iter().filter(|&&r| r > level).count();
            CoverageEntry {
                beta,
                runs,
                horizon: steps,
                violations,
                fraction: violations as f64 / runs as f64,
                bound_constants: BoundConstants::from(&constants),
            }
        })
        .collect();
    let mut by_beta: Vec<(f64, f64)> = entries.iter().map(|e| (e.beta, e.fraction)).collect();
    by_beta.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone_in_beta = by_beta.windows(2).all(|w| w[0].1 <= w[1].1);
    Ok(CoverageReport {
        entries,
        worst_ratio,
        energy0: probe.energy0,
        monotone_in_beta,
    })
}
