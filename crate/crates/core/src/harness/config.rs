use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, RunOptions, ScheduleKind, StepSchedule};
use crate::problems::{load_csv, synthetic_blobs, NoiseModel, Objective};

/// One invalid field and what is wrong with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "`{}`: {}", self.field, self.message)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub dim: usize,
    /// Seed of the random quadratic or of the synthetic dataset.
    pub seed: u64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub samples: usize,
    pub separation: f64,
    /// CSV file `y,x1,...,xd`; replaces the synthetic dataset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub refine_tol: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            kind: ProblemKind::Quadratic,
            dim: 10,
            seed: 0,
            eig_min: 0.1,
            eig_max: 1.0,
            samples: 200,
            separation: 2.0,
            data: None,
            refine_tol: crate::problems::DEFAULT_REFINE_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConfigKind {
    Gaussian,
    Uniform,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseConfigKind,
    /// Per-coordinate variance of Gaussian noise.
    pub variance: f64,
    /// Per-coordinate half-width of uniform noise.
    pub half_width: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            kind: NoiseConfigKind::Gaussian,
            variance: 1.0,
            half_width: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn build(&self, dim: usize) -> Result<NoiseModel> {
        match self.kind {
            NoiseConfigKind::Gaussian => NoiseModel::gaussian(dim, self.variance),
            NoiseConfigKind::Uniform => NoiseModel::uniform(dim, self.half_width),
            NoiseConfigKind::None => Ok(NoiseModel::none(dim)),
        }
    }

    /// Per-coordinate standard deviation.
    pub fn coord_sd(&self) -> f64 {
        match self.kind {
            NoiseConfigKind::Gaussian => self.variance.sqrt(),
            NoiseConfigKind::Uniform => self.half_width / 3f64.sqrt(),
            NoiseConfigKind::None => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub scale: f64,
    pub epsilon: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            kind: ScheduleKind::AnytimeLog2,
            scale: 1.0,
            epsilon: 0.5,
        }
    }
}

impl ScheduleConfig {
    fn with(kind: ScheduleKind, scale: f64) -> Self {
        ScheduleConfig {
            kind,
            scale,
            ..Self::default()
        }
    }

    pub fn build(&self, lipschitz: f64) -> Result<StepSchedule> {
        StepSchedule::new(self.kind, self.scale, self.epsilon, lipschitz)
    }

    fn check(&self, field: &str, out: &mut Vec<Diagnostic>) {
        if self.kind == ScheduleKind::Custom {
            push(out, format!("{field}.kind"), "custom schedules are library-only");
        }
        positive(out, format!("{field}.scale"), self.scale);
        if self.kind == ScheduleKind::EpsilonLog && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            push(
                out,
                format!("{field}.epsilon"),
                format!("{} must lie in (0, 1]", self.epsilon),
            );
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Sgdm,
    Sgd,
    Acsa,
}

impl From<AlgorithmName> for Algorithm {
    fn from(a: AlgorithmName) -> Self {
        match a {
            AlgorithmName::Sgdm => Algorithm::Sgdm,
            AlgorithmName::Sgd => Algorithm::Sgd,
            AlgorithmName::Acsa => Algorithm::Acsa,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: AlgorithmName,
    pub steps: u64,
    pub runs: usize,
    /// Initial point; all ones when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Write a little-endian binary dump of `(k, x_k)` per run.
    pub dump_state: bool,
    pub acsa_gamma: f64,
    pub acsa_simplified: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: AlgorithmName::Sgdm,
            steps: 1000,
            runs: 1,
            x0: None,
            dump_state: false,
            acsa_gamma: 1.0,
            acsa_simplified: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    pub steps: u64,
    pub runs: usize,
    /// Also check the same seeds without noise.
    pub include_noiseless: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            steps: 1000,
            runs: 50,
            include_noiseless: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpectationConfig {
    pub steps: u64,
    pub runs: usize,
    pub schedule: ScheduleConfig,
    /// Length of the noiseless run for the running-minimum check; 0 skips it.
    pub subsequence_steps: u64,
}

impl Default for ExpectationConfig {
    fn default() -> Self {
        ExpectationConfig {
            steps: 10_000,
            runs: 200,
            schedule: ScheduleConfig::with(ScheduleKind::ExpectationLog2, 0.25),
            subsequence_steps: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnytimeConfig {
    pub steps: u64,
    pub runs: usize,
    pub betas: Vec<f64>,
    pub tail_tol: f64,
    pub schedule: ScheduleConfig,
}

impl Default for AnytimeConfig {
    fn default() -> Self {
        AnytimeConfig {
            steps: 10_000,
            runs: 500,
            betas: vec![0.05],
            tail_tol: 1e-6,
            schedule: ScheduleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    /// `(p, α)` pairs for the energy and rate checks.
    pub pairs: Vec<[f64; 2]>,
    pub t0: f64,
    pub t: f64,
    pub dt: f64,
    /// Allowed per-step energy rise, relative to `E(T0)`.
    pub energy_tol: f64,
    /// Every how many grid points a row of `ode_*.csv` is written.
    pub csv_stride: usize,
    pub etas: Vec<f64>,
    pub l2_t0: f64,
    pub l2_t: f64,
    pub l2_dt: f64,
    pub l2_runs: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        OdeConfig {
            pairs: vec![[1.0, 1.5], [1.0, 2.0], [2.0, 1.0], [2.0, 1.5]],
            t0: 1.0,
            t: 100.0,
            dt: 1e-3,
            energy_tol: 1e-8,
            csv_stride: 100,
            etas: vec![0.1, 0.05, 0.02, 0.01],
            l2_t0: 1.0,
            l2_t: 4.0,
            l2_dt: 1e-3,
            l2_runs: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    /// Dimension of the Gaussian vectors `θ`.
    pub dim: usize,
    pub coord_sd: f64,
    /// Constant `c` in `|Γ| ≤ cΔ`.
    pub c: f64,
    pub lambdas: Vec<f64>,
    pub mgf_samples: usize,
    pub omegas: Vec<f64>,
    pub tail_terms: usize,
    pub tail_samples: usize,
    pub scan_points: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            dim: 10,
            coord_sd: 1.0,
            c: 1.0,
            lambdas: vec![0.25, 0.5, 1.0, 1.33],
            mgf_samples: 1_000_000,
            omegas: vec![0.5, 1.0, 2.0, 3.0],
            tail_terms: 20,
            tail_samples: 100_000,
            scan_points: 100_001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupermartingaleConfig {
    pub steps: u64,
    /// 0 skips the check.
    pub runs: usize,
}

impl Default for SupermartingaleConfig {
    fn default() -> Self {
        SupermartingaleConfig {
            steps: 100,
            runs: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothnessConfig {
    pub steps: u64,
    pub runs: usize,
    /// Trailing fraction of the run whose increments are compared.
    pub window: f64,
    /// SGD step `scale/√k`.
    pub sgd_scale: f64,
    pub schedule: ScheduleConfig,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        SmoothnessConfig {
            steps: 1000,
            runs: 10,
            window: 0.25,
            sgd_scale: 1.0,
            schedule: ScheduleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub tail_tol: f64,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { tail_tol: 1e-6 }
    }
}

/// Everything a subcommand needs, read from TOML and then overridden by flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub workers: usize,
    pub out: PathBuf,
    pub problem: ProblemConfig,
    pub noise: NoiseConfig,
    pub schedule: ScheduleConfig,
    pub run: RunConfig,
    pub descent: DescentConfig,
    pub expectation: ExpectationConfig,
    pub anytime: AnytimeConfig,
    pub ode: OdeConfig,
    pub concentration: ConcentrationConfig,
    pub supermartingale: SupermartingaleConfig,
    pub smoothness: SmoothnessConfig,
    pub constants: ConstantsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            workers: 0,
            out: PathBuf::from("out"),
            problem: ProblemConfig::default(),
            noise: NoiseConfig::default(),
            schedule: ScheduleConfig::default(),
            run: RunConfig::default(),
            descent: DescentConfig::default(),
            expectation: ExpectationConfig::default(),
            anytime: AnytimeConfig::default(),
            ode: OdeConfig::default(),
            concentration: ConcentrationConfig::default(),
            supermartingale: SupermartingaleConfig::default(),
            smoothness: SmoothnessConfig::default(),
            constants: ConstantsConfig::default(),
        }
    }
}

fn push(out: &mut Vec<Diagnostic>, field: impl Into<String>, message: impl Into<String>) {
    out.push(Diagnostic {
        field: field.into(),
        message: message.into(),
    });
}

fn positive(out: &mut Vec<Diagnostic>, field: impl Into<String>, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        push(out, field, format!("{v} must be positive and finite"));
    }
}

fn at_least_one<T: PartialOrd + From<u8> + std::fmt::Display>(out: &mut Vec<Diagnostic>, field: &str, v: T) {
    if v < T::from(1) {
        push(out, field, format!("{v} must be at least 1"));
    }
}

fn unit_interval(out: &mut Vec<Diagnostic>, field: &str, values: &[f64], closed_right: bool) {
    if values.is_empty() {
        push(out, field, "must not be empty");
    }
    for &v in values {
        let ok = v > 0.0 && if closed_right { v <= 1.0 } else { v < 1.0 };
        if !ok {
            let interval = if closed_right { "(0, 1]" } else { "(0, 1)" };
            push(out, field, format!("{v} must lie in {interval}"));
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Every field problem found, in declaration order.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let p = &self.problem;
        at_least_one(&mut d, "problem.dim", p.dim);
        match p.kind {
            ProblemKind::Quadratic => {
                if !(p.eig_min >= 0.0 && p.eig_min <= p.eig_max && p.eig_max > 0.0 && p.eig_max.is_finite()) {
                    push(
                        &mut d,
                        "problem.eig_min",
                        format!(
                            "need 0 <= eig_min <= eig_max, eig_max > 0 (got {}, {})",
                            p.eig_min, p.eig_max
                        ),
                    );
                }
            }
            ProblemKind::Logistic => {
                if p.data.is_none() {
                    at_least_one(&mut d, "problem.samples", p.samples);
                    if !(p.separation >= 0.0 && p.separation.is_finite()) {
                        push(
                            &mut d,
                            "problem.separation",
                            format!("{} must be finite and >= 0", p.separation),
                        );
                    }
                } else if let Some(f) = p.data.as_ref().filter(|f| !f.is_file()) {
                    push(
                        &mut d,
                        "problem.data",
                        format!("{} is not a readable file", f.display()),
                    );
                }
            }
        }
        positive(&mut d, "problem.refine_tol", p.refine_tol);

        match self.noise.kind {
            NoiseConfigKind::Gaussian if !(self.noise.variance >= 0.0 && self.noise.variance.is_finite()) => push(
                &mut d,
                "noise.variance",
                format!("{} must be finite and >= 0", self.noise.variance),
            ),
            NoiseConfigKind::Uniform if !(self.noise.half_width >= 0.0 && self.noise.half_width.is_finite()) => push(
                &mut d,
                "noise.half_width",
                format!("{} must be finite and >= 0", self.noise.half_width),
            ),
            _ => {}
        }
        self.schedule.check("schedule", &mut d);

        let r = &self.run;
        at_least_one(&mut d, "run.steps", r.steps);
        at_least_one(&mut d, "run.runs", r.runs);
        if let Some(x0) = &r.x0 {
            if p.data.is_none() && x0.len() != p.dim {
                push(
                    &mut d,
                    "run.x0",
                    format!("has {} entries, problem.dim is {}", x0.len(), p.dim),
                );
            }
            if x0.iter().any(|v| !v.is_finite()) {
                push(&mut d, "run.x0", "entries must be finite");
            }
        }
        positive(&mut d, "run.acsa_gamma", r.acsa_gamma);

        at_least_one(&mut d, "descent.steps", self.descent.steps);
        at_least_one(&mut d, "descent.runs", self.descent.runs);

        let e = &self.expectation;
        at_least_one(&mut d, "expectation.steps", e.steps);
        if e.runs < 2 {
            push(
                &mut d,
                "expectation.runs",
                format!("{} must be at least 2 for a standard error", e.runs),
            );
        }
        e.schedule.check("expectation.schedule", &mut d);
        if e.subsequence_steps != 0 && e.subsequence_steps < crate::stats::SUBSEQUENCE_START * 100 {
            push(
                &mut d,
                "expectation.subsequence_steps",
                format!(
                    "{} must be 0 or at least {}",
                    e.subsequence_steps,
                    crate::stats::SUBSEQUENCE_START * 100
                ),
            );
        }

        let a = &self.anytime;
        at_least_one(&mut d, "anytime.steps", a.steps);
        at_least_one(&mut d, "anytime.runs", a.runs);
        unit_interval(&mut d, "anytime.betas", &a.betas, true);
        positive(&mut d, "anytime.tail_tol", a.tail_tol);
        a.schedule.check("anytime.schedule", &mut d);
        if !matches!(
            a.schedule.kind,
            ScheduleKind::AnytimeLog2 | ScheduleKind::ExpectationLog2 | ScheduleKind::EpsilonLog
        ) {
            push(
                &mut d,
                "anytime.schedule.kind",
                "needs a logarithmic schedule with summable a_k",
            );
        }

        let o = &self.ode;
        if o.pairs.is_empty() {
            push(&mut d, "ode.pairs", "must not be empty");
        }
        for &[pp, alpha] in &o.pairs {
            if !(pp.is_finite() && alpha.is_finite() && alpha <= 2.0 && pp + alpha >= 2.0) {
                push(
                    &mut d,
                    "ode.pairs",
                    format!("({pp}, {alpha}) needs finite values with alpha <= 2, p + alpha >= 2"),
                );
            }
        }
        positive(&mut d, "ode.t0", o.t0);
        if !(o.t >= o.t0 && o.t.is_finite()) {
            push(&mut d, "ode.t", format!("{} must be finite and >= t0 = {}", o.t, o.t0));
        }
        positive(&mut d, "ode.dt", o.dt);
        positive(&mut d, "ode.energy_tol", o.energy_tol);
        at_least_one(&mut d, "ode.csv_stride", o.csv_stride);
        if o.etas.is_empty() {
            push(&mut d, "ode.etas", "must not be empty");
        }
        for &eta in &o.etas {
            positive(&mut d, "ode.etas", eta);
        }
        if o.etas.windows(2).any(|w| w[1] >= w[0]) {
            push(&mut d, "ode.etas", "must be strictly decreasing");
        }
        positive(&mut d, "ode.l2_t0", o.l2_t0);
        if !(o.l2_t >= o.l2_t0 && o.l2_t.is_finite()) {
            push(
                &mut d,
                "ode.l2_t",
                format!("{} must be finite and >= l2_t0 = {}", o.l2_t, o.l2_t0),
            );
        }
        positive(&mut d, "ode.l2_dt", o.l2_dt);
        if o.l2_runs < 2 {
            push(&mut d, "ode.l2_runs", format!("{} must be at least 2", o.l2_runs));
        }

        let c = &self.concentration;
        at_least_one(&mut d, "concentration.dim", c.dim);
        positive(&mut d, "concentration.coord_sd", c.coord_sd);
        positive(&mut d, "concentration.c", c.c);
        if c.mgf_samples < 2 {
            push(
                &mut d,
                "concentration.mgf_samples",
                format!("{} must be at least 2", c.mgf_samples),
            );
        }
        if c.lambdas.iter().any(|l| !l.is_finite()) {
            push(&mut d, "concentration.lambdas", "entries must be finite");
        }
        if c.omegas.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            push(&mut d, "concentration.omegas", "entries must be finite and >= 0");
        }
        at_least_one(&mut d, "concentration.tail_terms", c.tail_terms);
        at_least_one(&mut d, "concentration.tail_samples", c.tail_samples);
        if c.scan_points < 2 {
            push(
                &mut d,
                "concentration.scan_points",
                format!("{} must be at least 2", c.scan_points),
            );
        }

        let s = &self.supermartingale;
        at_least_one(&mut d, "supermartingale.steps", s.steps);
        if s.runs == 1 {
            push(&mut d, "supermartingale.runs", "must be 0 (skip) or at least 2");
        }

        let m = &self.smoothness;
        if m.steps < 4 {
            push(&mut d, "smoothness.steps", format!("{} must be at least 4", m.steps));
        }
        at_least_one(&mut d, "smoothness.runs", m.runs);
        unit_interval(&mut d, "smoothness.window", &[m.window], true);
        positive(&mut d, "smoothness.sgd_scale", m.sgd_scale);
        m.schedule.check("smoothness.schedule", &mut d);

        positive(&mut d, "constants.tail_tol", self.constants.tail_tol);
        d
    }

    /// Builds the objective, refined to its optimum.
    pub fn objective(&self) -> Result<Objective> {
        let p = &self.problem;
        match p.kind {
            ProblemKind::Quadratic => Objective::random_quadratic(p.dim, p.seed, p.eig_min, p.eig_max),
            ProblemKind::Logistic => {
                let data = match &p.data {
                    Some(path) => load_csv(path)?,
                    None => synthetic_blobs(p.samples, p.dim, p.separation, p.seed)?,
                };
                Objective::logistic(data.features, data.labels)?.refined(p.refine_tol)
            }
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            x0: self.run.x0.clone(),
            keep_vectors: false,
            acsa_gamma: self.run.acsa_gamma,
            acsa_simplified: self.run.acsa_simplified,
        }
    }
}
