//! Monte-Carlo aggregation and the expectation, subsequence and smoothness
//! checks built on it.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optimizers::{noise_coefficient, run_trajectory, Algorithm, RunOptions, StepSchedule};
use crate::problems::{NoiseModel, Objective};
use crate::rng::seed_split;

/// Streaming mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanAccumulator::default();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// `{0, 1, 2, 5, 10, 20, 50, …} ∩ [0, K]` plus `K` itself.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = vec![0];
    let mut decade = 1u64;
    'outer: loop {
        for m in [1, 2, 5] {
            let k = m * decade;
            if k > horizon {
                break 'outer;
            }
            out.push(k);
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    if *out.last().unwrap() != horizon {
        out.push(horizon);
    }
    out
}

/// `M` trajectories of one configuration, aligned on `k`.
#[derive(Clone, Debug)]
pub struct RunEnsemble {
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub noiseless: bool,
    pub seeds: Vec<u64>,
    /// `f(x_0) − f*` per run.
    pub f_gap0: Vec<f64>,
    /// `f_gaps[run][k − 1] = f(x_k) − f*`.
    pub f_gaps: Vec<Vec<f64>>,
}

impl RunEnsemble {
    pub fn runs(&self) -> usize {
        self.f_gaps.len()
    }

    pub fn horizon(&self) -> u64 {
        self.f_gaps.first().map_or(0, |r| r.len() as u64)
    }

    /// `f(x_k) − f*` of every run, `k = 0` meaning the initial point.
    pub fn column(&self, k: u64) -> Vec<f64> {
        if k == 0 {
            self.f_gap0.clone()
        } else {
            self.f_gaps.iter().map(|r| r[k as usize - 1]).collect()
        }
    }

    /// CSV `k,mean,stderr,q10,q50,q90` for every `k` in `ks`.
    pub fn write_curve_csv<W: Write>(&self, ks: &[u64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,mean,stderr,q10,q50,q90")?;
        for &k in ks {
            let mut col = self.column(k);
            let acc: MeanAccumulator = col.iter().copied().collect();
            col.sort_by(f64::total_cmp);
            writeln!(
                w,
                "{},{},{},{},{},{}",
                k,
                acc.mean(),
                acc.stderr(),
                quantile_sorted(&col, 0.1),
                quantile_sorted(&col, 0.5),
                quantile_sorted(&col, 0.9)
            )?;
        }
        Ok(())
    }
}

/// Runs `runs` independent trajectories in parallel; run `i` uses
/// `seed_split(master_seed, i)`, so the result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    obj: &Objective,
    noise: &NoiseModel,
    algorithm: Algorithm,
    schedule: &StepSchedule,
    steps: u64,
    runs: usize,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<RunEnsemble> {
    if runs == 0 {
        return Err(Error::InvalidArgument("ensemble needs at least one run".into()));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| seed_split(master_seed, i)).collect();
    let results: Vec<(f64, Vec<f64>)> = seeds
        .par_iter()
        .map(|&s| {
            let rec = run_trajectory(obj, noise, algorithm, schedule, steps, s, opts)?;
            Ok((rec.f_gap0, rec.f_gaps()))
        })
        .collect::<Result<_>>()?;
    let (f_gap0, f_gaps) = results.into_iter().unzip();
    Ok(RunEnsemble {
        algorithm,
        schedule: schedule.clone(),
        noiseless: noise.is_noiseless(),
        seeds,
        f_gap0,
        f_gaps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckpointResult {
    pub k: u64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpectationReport {
    pub runs: usize,
    pub horizon: u64,
    pub lipschitz: f64,
    pub dist0_sq: f64,
    pub sigma2: f64,
    pub checkpoints: Vec<CheckpointResult>,
    pub passed: bool,
}

/// `(3L‖x_0 − x*‖² + 4σ²/L)·log(k+2) / (2√(k+1))`
pub fn expectation_bound(k: u64, lipschitz: f64, dist0_sq: f64, sigma2: f64) -> f64 {
    let kf = k as f64;
    (3.0 * lipschitz * dist0_sq + 4.0 * sigma2 / lipschitz) * (kf + 2.0).ln() / (2.0 * (kf + 1.0).sqrt())
}

/// MC mean of `f(x_k) − f*` against [`expectation_bound`] plus `3·SE` at
/// log-spaced checkpoints.
pub fn expectation_rate_check(ens: &RunEnsemble, lipschitz: f64, dist0_sq: f64, sigma2: f64) -> ExpectationReport {
    let checkpoints: Vec<CheckpointResult> = log_checkpoints(ens.horizon())
        .into_iter()
        .map(|k| {
            let acc: MeanAccumulator = ens.column(k).into_iter().collect();
            let bound = expectation_bound(k, lipschitz, dist0_sq, sigma2);
            CheckpointResult {
                k,
                mean: acc.mean(),
                stderr: acc.stderr(),
                bound,
                passed: acc.mean() <= bound + 3.0 * acc.stderr(),
            }
        })
        .collect();
    ExpectationReport {
        runs: ens.runs(),
        horizon: ens.horizon(),
        lipschitz,
        dist0_sq,
        sigma2,
        passed: checkpoints.iter().all(|c| c.passed),
        checkpoints,
    }
}

/// First `k` entering the running minimum.
pub const SUBSEQUENCE_START: u64 = 10;

/// Running minimum `m(K) = min_{10 ≤ k ≤ K} √k·log log(k+2)·(f(x_k) − f*)`.
#[derive(Clone, Debug, Serialize)]
pub struct SubsequenceTrace {
    pub start: u64,
    /// `running_min[i] = m(start + i)`.
    pub running_min: Vec<f64>,
}

impl SubsequenceTrace {
    pub fn end(&self) -> u64 {
        self.start + self.running_min.len() as u64 - 1
    }

    pub fn at(&self, horizon: u64) -> f64 {
        assert!(
            horizon >= self.start && horizon <= self.end(),
            "K = {horizon} outside trace"
        );
        self.running_min[(horizon - self.start) as usize]
    }

    /// `m(K_end) / m(K_end / 10)`, or `None` when `K_end/10` precedes the start.
    pub fn decay_ratio(&self) -> Option<f64> {
        let end = self.end();
        let tenth = end / 10;
        (tenth >= self.start).then(|| self.at(end) / self.at(tenth))
    }

    /// True when the minimum never moved after the first value.
    pub fn stalled(&self) -> bool {
        self.running_min.last() == self.running_min.first()
    }
}

/// `f_gaps[k − 1] = f(x_k) − f*`, needs `K ≥ 10`.
pub fn subsequence_rate_check(f_gaps: &[f64]) -> Result<SubsequenceTrace> {
    let horizon = f_gaps.len() as u64;
    if horizon < SUBSEQUENCE_START {
        return Err(Error::InvalidArgument(format!(
            "subsequence trace needs K >= {SUBSEQUENCE_START}, got {horizon}"
        )));
    }
    let mut running = f64::INFINITY;
    let running_min = (SUBSEQUENCE_START..=horizon)
        .map(|k| {
            let kf = k as f64;
            let v = kf.sqrt() * (kf + 2.0).ln().ln() * f_gaps[k as usize - 1];
            running = running.min(v);
            running
        })
        .collect();
    Ok(SubsequenceTrace {
        start: SUBSEQUENCE_START,
        running_min,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    pub window_start: u64,
    pub sgdm_median: f64,
    pub sgd_median: f64,
    pub sgdm_variances: Vec<f64>,
    pub sgd_variances: Vec<f64>,
    /// SGDM noise multiplier `2√η_K/((K+2)√K)` divided by SGD's `η_K`.
    pub multiplier_ratio_at_end: f64,
    pub skipped: bool,
    pub passed: bool,
    pub notice: String,
}

/// Sample variance of successive increments `f_{k+1} − f_k` for `k` in the
/// trailing `window` fraction of the run.
pub fn increment_variance(f_gaps: &[f64], window: f64) -> f64 {
    let n = f_gaps.len();
    let start = n - ((n as f64 * window).round() as usize).clamp(2, n);
    f_gaps[start..]
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect::<MeanAccumulator>()
        .variance()
}

/// Compares the per-run increment variance over the last `window` fraction;
/// SGDM's median should be strictly below SGD's.
pub fn smoothness_comparison(sgdm: &RunEnsemble, sgd: &RunEnsemble, window: f64) -> Result<SmoothnessReport> {
    if sgdm.horizon() != sgd.horizon() {
        return Err(Error::InvalidArgument(format!(
            "ensembles have different horizons ({} vs {})",
            sgdm.horizon(),
            sgd.horizon()
        )));
    }
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fraction {window} must lie in (0, 1]"
        )));
    }
    let horizon = sgdm.horizon();
    if horizon < 4 {
        return Err(Error::InvalidArgument("smoothness comparison needs K >= 4".into()));
    }
    let var = |e: &RunEnsemble| {
        e.f_gaps
            .iter()
            .map(|r| increment_variance(r, window))
            .collect::<Vec<_>>()
    };
    let sgdm_variances = var(sgdm);
    let sgd_variances = var(sgd);
    let (a, b) = (median(&sgdm_variances), median(&sgd_variances));
    let eta_end = sgdm.schedule.eval(horizon);
    let ratio = noise_coefficient(horizon, eta_end) / sgd.schedule.eval(horizon);
    let window_start = horizon - ((horizon as f64 * window).round() as u64).clamp(2, horizon) + 1;

    let (skipped, passed, notice) = if sgdm.noiseless && sgd.noiseless {
        (
            true,
            true,
            "noiseless runs: increment variances carry no noise, comparison skipped".to_string(),
        )
    } else if a < b {
        (false, true, format!("SGDM median {a:e} < SGD median {b:e}"))
    } else if a == b {
        (
            false,
            false,
            format!("medians are equal ({a:e}); were the same runs passed for both methods?"),
        )
    } else {
        (false, false, format!("SGDM median {a:e} is not below SGD median {b:e}"))
    };
    Ok(SmoothnessReport {
        window_start,
        sgdm_median: a,
        sgd_median: b,
        sgdm_variances,
        sgd_variances,
        multiplier_ratio_at_end: ratio,
        skipped,
        passed,
        notice,
    })
}
