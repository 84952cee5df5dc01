use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::rng::{run_rng, Rng};
use crate::stats::MeanAccumulator;

const BATCH: usize = 1 << 13;

/// Draws `(Γ, Δ)` with `E[Γ] = 0`, `|Γ| ≤ cΔ` and `E[exp(Δ²/σ²)] ≤ e`.
pub trait PairSampler: Sync {
    fn sample(&self, rng: &mut Rng) -> (f64, f64);
}

/// Draws `Φ_1, …, Φ_k` with `E[exp(Φ_l²/σ²) | past] ≤ e`.
pub trait PathSampler: Sync {
    fn sample_path(&self, rng: &mut Rng, out: &mut [f64]);
}

/// `θ ~ N(0, s² I_n)`; as a pair sampler returns `Γ = c⟨θ, u⟩`, `Δ = ‖θ‖`
/// for a fixed unit `u`, as a path sampler returns i.i.d. `‖θ_l‖`.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    pub dim: usize,
    pub coord_sd: f64,
    pub c: f64,
    u: Vec<f64>,
}

impl GaussianSampler {
    pub fn new(dim: usize, coord_sd: f64, c: f64) -> Result<Self> {
        if dim == 0 || !(coord_sd >= 0.0) || !(c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian sampler needs dim > 0, sd >= 0, c > 0 (got {dim}, {coord_sd}, {c})"
            )));
        }
        let mut u = vec![0.0; dim];
        u[0] = 1.0;
        Ok(GaussianSampler { dim, coord_sd, c, u })
    }

    /// `2ns²/(1 − e^{−2/n})`, a scale satisfying `E[exp(‖θ‖²/σ²)] ≤ e`.
    pub fn hp_sigma2(&self) -> f64 {
        let n = self.dim as f64;
        2.0 * n * self.coord_sd * self.coord_sd / (-(-2.0 / n).exp_m1())
    }

    fn draw(&self, rng: &mut Rng, theta: &mut [f64]) {
        for t in theta.iter_mut() {
            *t = self.coord_sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

impl PairSampler for GaussianSampler {
    fn sample(&self, rng: &mut Rng) -> (f64, f64) {
        let mut theta = vec![0.0; self.dim];
        self.draw(rng, &mut theta);
        let gamma = self.c * theta.iter().zip(&self.u).map(|(a, b)| a * b).sum::<f64>();
        (gamma, norm(&theta))
    }
}

impl PathSampler for GaussianSampler {
    fn sample_path(&self, rng: &mut Rng, out: &mut [f64]) {
        let mut theta = vec![0.0; self.dim];
        for o in out.iter_mut() {
            self.draw(rng, &mut theta);
            *o = norm(&theta);
        }
    }
}

/// Sampler producing `Γ ≡ 0`, `Δ ≡ 0`.
#[derive(Clone, Copy, Debug)]
pub struct ZeroSampler;

impl PairSampler for ZeroSampler {
    fn sample(&self, _: &mut Rng) -> (f64, f64) {
        (0.0, 0.0)
    }
}

impl PathSampler for ZeroSampler {
    fn sample_path(&self, _: &mut Rng, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Chan et al. merge of two Welford accumulators, kept here because only
/// batch reductions need it.
fn merge(a: MeanAccumulatorParts, b: MeanAccumulatorParts) -> MeanAccumulatorParts {
    if a.n == 0.0 {
        return b;
    }
    if b.n == 0.0 {
        return a;
    }
    let n = a.n + b.n;
    let d = b.mean - a.mean;
    MeanAccumulatorParts {
        n,
        mean: a.mean + d * b.n / n,
        m2: a.m2 + b.m2 + d * d * a.n * b.n / n,
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct MeanAccumulatorParts {
    n: f64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulatorParts {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let acc: MeanAccumulator = values.collect();
        MeanAccumulatorParts {
            n: acc.count() as f64,
            mean: acc.mean(),
            m2: acc.variance() * (acc.count().max(1) - 1) as f64,
        }
    }

    fn stderr(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MgfEntry {
    pub lambda: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MgfPreconditions {
    pub mean_gamma: f64,
    pub mean_gamma_stderr: f64,
    /// `max |Γ| / (cΔ)` over samples with `Δ > 0`.
    pub max_gamma_ratio: f64,
    /// MC estimate of `E[exp(Δ²/σ²)]`.
    pub exp_moment: f64,
    pub exp_moment_stderr: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MgfReport {
    pub samples: usize,
    pub c: f64,
    pub sigma: f64,
    pub preconditions: MgfPreconditions,
    pub entries: Vec<MgfEntry>,
    /// λ values whose check ran while the preconditions failed.
    pub precondition_failures: Vec<f64>,
}

impl MgfReport {
    pub fn passed(&self) -> bool {
        self.preconditions.passed && self.entries.iter().all(|e| e.passed)
    }
}

/// Estimates `E[exp(λΓ/(cσ))]` for each `λ` and compares it with
/// `exp(3λ²/4)·(1 + 3·relative SE)`. Preconditions of the sampler are
/// estimated from the same draws.
pub fn mgf_lemma_check<S: PairSampler>(
    lambdas: &[f64],
    c: f64,
    sigma: f64,
    sampler: &S,
    samples: usize,
    seed: u64,
) -> Result<MgfReport> {
    if samples < 2 || !(c > 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need samples >= 2, c > 0, sigma > 0 (got {samples}, {c}, {sigma})"
        )));
    }
    let batches = samples.div_ceil(BATCH);
    let nl = lambdas.len();
    // Per batch: [Γ, exp(Δ²/σ²), exp(λ_i Γ/(cσ))...] accumulators and max ratio.
    let per_batch: Vec<(Vec<MeanAccumulatorParts>, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = run_rng(seed, b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let draws: Vec<(f64, f64)> = (0..count).map(|_| sampler.sample(&mut rng)).collect();
            let mut accs = Vec::with_capacity(2 + nl);
            accs.push(MeanAccumulatorParts::of(draws.iter().map(|d| d.0)));
            accs.push(MeanAccumulatorParts::of(
                draws.iter().map(|d| (d.1 * d.1 / (sigma * sigma)).exp()),
            ));
            for &l in lambdas {
                accs.push(MeanAccumulatorParts::of(
                    draws.iter().map(|d| (l * d.0 / (c * sigma)).exp()),
                ));
            }
            let ratio = draws
                .iter()
                .filter(|d| d.1 > 0.0)
                .map(|d| d.0.abs() / (c * d.1))
                .fold(0.0, f64::max);
            (accs, ratio)
        })
        .collect();
    let mut totals = vec![MeanAccumulatorParts::default(); 2 + nl];
    let mut max_ratio = 0.0f64;
    for (accs, ratio) in per_batch {
        for (t, a) in totals.iter_mut().zip(accs) {
            *t = merge(*t, a);
        }
        max_ratio = max_ratio.max(ratio);
    }
    let e = std::f64::consts::E;
    let pre = MgfPreconditions {
        mean_gamma: totals[0].mean,
        mean_gamma_stderr: totals[0].stderr(),
        max_gamma_ratio: max_ratio,
        exp_moment: totals[1].mean,
        exp_moment_stderr: totals[1].stderr(),
        passed: totals[0].mean.abs() <= 3.0 * totals[0].stderr()
            && max_ratio <= 1.0 + 1e-12
            && totals[1].mean <= e + 3.0 * totals[1].stderr(),
    };
    let entries: Vec<MgfEntry> = lambdas
        .iter()
        .zip(&totals[2..])
        .map(|(&lambda, acc)| {
            let bound = (0.75 * lambda * lambda).exp();
            let rel = if acc.mean > 0.0 { acc.stderr() / acc.mean } else { 0.0 };
            MgfEntry {
                lambda,
                estimate: acc.mean,
                stderr: acc.stderr(),
                bound,
                passed: acc.mean <= bound * (1.0 + 3.0 * rel),
            }
        })
        .collect();
    let precondition_failures = if pre.passed { Vec::new() } else { lambdas.to_vec() };
    Ok(MgfReport {
        samples,
        c,
        sigma,
        preconditions: pre,
        entries,
        precondition_failures,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TailEntry {
    pub omega: f64,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial SE at the bound, `√(p(1−p)/N)` with `p = e^{−Ω}`.
    pub binomial_se: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub samples: usize,
    pub terms: usize,
    pub sigma2: f64,
    pub entries: Vec<TailEntry>,
}

impl TailReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

/// Empirical frequency of `Σ c_l Φ_l² ≥ (1+Ω) Σ c_l σ²` against `e^{−Ω}`
/// plus three binomial standard errors.
pub fn tail_lemma_check<S: PathSampler>(
    weights: &[f64],
    sigma2: f64,
    omegas: &[f64],
    sampler: &S,
    samples: usize,
    seed: u64,
) -> Result<TailReport> {
    if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be non-empty and positive".into()));
    }
    if samples == 0 || !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need samples > 0 and sigma^2 > 0 (got {samples}, {sigma2})"
        )));
    }
    let k = weights.len();
    let scale: f64 = weights.iter().sum::<f64>() * sigma2;
    let batches = samples.div_ceil(BATCH);
    let counts: Vec<Vec<usize>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = run_rng(seed, b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let mut phi = vec![0.0; k];
            let mut hits = vec![0usize; omegas.len()];
            for _ in 0..count {
                sampler.sample_path(&mut rng, &mut phi);
                let total: f64 = weights.iter().zip(&phi).map(|(c, p)| c * p * p).sum();
                for (h, &om) in hits.iter_mut().zip(omegas) {
                    if total >= (1.0 + om) * scale {
                        *h += 1;
                    }
                }
            }
            hits
        })
        .collect();
    let n = samples as f64;
    let entries = omegas
        .iter()
        .enumerate()
        .map(|(i, &omega)| {
            let hits: usize = counts.iter().map(|c| c[i]).sum();
            let bound = (-omega).exp();
            let se = (bound * (1.0 - bound) / n).sqrt();
            let frequency = hits as f64 / n;
            TailEntry {
                omega,
                frequency,
                bound,
                binomial_se: se,
                passed: frequency <= bound + 3.0 * se,
            }
        })
        .collect();
    Ok(TailReport {
        samples,
        terms: k,
        sigma2,
        entries,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityScan {
    pub points: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` seen.
    pub max_excess: f64,
}

/// Grid scan of `e^x ≤ x + e^{9x²/16}` on `[lo, hi]`.
pub fn exp_inequality_scan(lo: f64, hi: f64, points: usize) -> InequalityScan {
    scan(points, |i| {
        let x = lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64;
        let rhs = x + (9.0 * x * x / 16.0).exp();
        (x.exp() - rhs, rhs)
    })
}

/// Grid scan of `λx ≤ (3/8)λ² + (2/3)x²` on `[−r, r]²`.
pub fn young_inequality_scan(r: f64, points_per_axis: usize) -> InequalityScan {
    let m = points_per_axis.max(2);
    let at = |i: usize| -r + 2.0 * r * i as f64 / (m - 1) as f64;
    scan(m * m, |i| {
        let (l, x) = (at(i / m), at(i % m));
        let rhs = 0.375 * l * l + 2.0 / 3.0 * x * x;
        (l * x - rhs, rhs)
    })
}

/// A point violates when `lhs − rhs` exceeds rounding, `1e-12·(1 + |rhs|)`.
/// The second inequality is an equality along `λ = 4x/3`.
fn scan(points: usize, excess: impl Fn(usize) -> (f64, f64)) -> InequalityScan {
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..points {
        let (e, rhs) = excess(i);
        if e > 1e-12 * (1.0 + rhs.abs()) {
            violations += 1;
        }
        max_excess = max_excess.max(e);
    }
    InequalityScan {
        points,
        violations,
        max_excess,
    }
}
