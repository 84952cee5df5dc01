use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::commands;
use super::config::{Diagnostic, ExperimentConfig};
use super::verdict::{Check, Outputs, Verdict};
use crate::error::{Error, Result};

/// Process exit code for passing checks.
pub const EXIT_PASS: i32 = 0;
/// Process exit code for failed checks or runtime errors.
pub const EXIT_FAIL: i32 = 1;
/// Process exit code for invalid configuration or usage.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sgdm-lab", version, about = "Momentum SGD experiments and guarantee checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run single or ensemble trajectories and write per-step CSVs.
    Run,
    /// Check the pathwise energy descent inequality on every step.
    VerifyDescent,
    /// Compare the mean optimality gap with the expectation bound.
    VerifyExpectation,
    /// Monte-Carlo coverage of the anytime bound and supermartingale checks.
    VerifyAnytime,
    /// ODE energy and rate checks plus the discrete-to-continuous L2 table.
    OdeCompare,
    /// Monte-Carlo checks of the two concentration lemmas.
    Concentration,
    /// Compare increment variance of SGDM and SGD.
    Smoothness,
    /// Certified gamma brackets and bound constants.
    Constants,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::VerifyDescent => "verify-descent",
            Command::VerifyExpectation => "verify-expectation",
            Command::VerifyAnytime => "verify-anytime",
            Command::OdeCompare => "ode-compare",
            Command::Concentration => "concentration",
            Command::Smoothness => "smoothness",
            Command::Constants => "constants",
        }
    }
}

/// Comma-separated numbers given as one flag value.
#[derive(Clone, Debug, PartialEq)]
struct FloatList(Vec<f64>);

fn parse_list(s: &str) -> std::result::Result<FloatList, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(FloatList)
}

#[derive(Clone, Debug, Default, Args)]
struct Overrides {
    /// TOML config file; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; run i uses a seed derived from (seed, i).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and verdict.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Confidence levels, comma separated.
    #[arg(long, global = true, value_parser = parse_list)]
    beta: Option<FloatList>,
    /// Iterations per run for the chosen subcommand.
    #[arg(long, global = true)]
    steps: Option<u64>,
    /// Monte-Carlo runs (for ode-compare, runs per step size of the L2 table).
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Step sizes of the L2 table, comma separated and decreasing.
    #[arg(long = "eta-grid", global = true, value_parser = parse_list)]
    eta_grid: Option<FloatList>,
    /// ODE damping exponent p; replaces the configured pairs with one pair.
    #[arg(long, global = true)]
    p: Option<f64>,
    /// ODE gradient exponent alpha; replaces the configured pairs with one pair.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Start time of the ODE and L2 windows.
    #[arg(long, global = true)]
    t0: Option<f64>,
    /// End time of the ODE and L2 windows.
    #[arg(long, global = true)]
    t: Option<f64>,
    /// Integrator step of the ODE and L2 windows.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

fn not_applicable(flag: &str, cmd: Command) -> Diagnostic {
    Diagnostic {
        field: flag.to_string(),
        message: format!("does not apply to `{}`", cmd.name()),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig, cmd: Command) -> Vec<Diagnostic> {
        let mut bad = Vec::new();
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(steps) = self.steps {
            match cmd {
                Command::Run => cfg.run.steps = steps,
                Command::VerifyDescent => cfg.descent.steps = steps,
                Command::VerifyExpectation => cfg.expectation.steps = steps,
                Command::VerifyAnytime => cfg.anytime.steps = steps,
                Command::Smoothness => cfg.smoothness.steps = steps,
                _ => bad.push(not_applicable("--steps", cmd)),
            }
        }
        if let Some(runs) = self.runs {
            match cmd {
                Command::Run => cfg.run.runs = runs,
                Command::VerifyDescent => cfg.descent.runs = runs,
                Command::VerifyExpectation => cfg.expectation.runs = runs,
                Command::VerifyAnytime => cfg.anytime.runs = runs,
                Command::OdeCompare => cfg.ode.l2_runs = runs,
                Command::Smoothness => cfg.smoothness.runs = runs,
                _ => bad.push(not_applicable("--runs", cmd)),
            }
        }
        if let Some(b) = &self.beta {
            if cmd == Command::VerifyAnytime {
                cfg.anytime.betas = b.0.clone();
            } else {
                bad.push(not_applicable("--beta", cmd));
            }
        }
        let ode_flags = [
            ("--eta-grid", self.eta_grid.is_some()),
            ("--p", self.p.is_some()),
            ("--alpha", self.alpha.is_some()),
            ("--t0", self.t0.is_some()),
            ("--t", self.t.is_some()),
            ("--dt", self.dt.is_some()),
        ];
        if cmd != Command::OdeCompare {
            bad.extend(ode_flags.iter().filter(|f| f.1).map(|f| not_applicable(f.0, cmd)));
            return bad;
        }
        let o = &mut cfg.ode;
        if let Some(etas) = &self.eta_grid {
            o.etas = etas.0.clone();
        }
        if self.p.is_some() || self.alpha.is_some() {
            o.pairs = vec![[self.p.unwrap_or(1.0), self.alpha.unwrap_or(1.5)]];
        }
        if let Some(v) = self.t0 {
            o.t0 = v;
            o.l2_t0 = v;
        }
        if let Some(v) = self.t {
            o.t = v;
            o.l2_t = v;
        }
        if let Some(v) = self.dt {
            o.dt = v;
            o.l2_dt = v;
        }
        bad
    }
}

fn resolve(cli: &Cli) -> Result<(ExperimentConfig, Vec<Diagnostic>)> {
    let mut cfg = match &cli.overrides.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let mut diags = cli.overrides.apply(&mut cfg, cli.command);
    diags.extend(cfg.validate());
    Ok((cfg, diags))
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    match cmd {
        Command::Run => commands::run(cfg, out),
        Command::VerifyDescent => commands::verify_descent(cfg, out),
        Command::VerifyExpectation => commands::verify_expectation(cfg, out),
        Command::VerifyAnytime => commands::verify_anytime(cfg, out),
        Command::OdeCompare => commands::ode_compare(cfg, out),
        Command::Concentration => commands::concentration(cfg, out),
        Command::Smoothness => commands::smoothness(cfg, out),
        Command::Constants => commands::constants(cfg, out),
    }
}

/// Runs one subcommand on an already validated config and writes the
/// resolved config, the artifacts and `verdict.json` into `cfg.out`.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<Verdict> {
    let out = Outputs::create(&cfg.out)?;
    out.write_bytes("config.resolved.toml", cfg.to_toml().as_bytes())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let verdict = match pool.install(|| dispatch(cmd, cfg, &out)) {
        Ok(checks) => Verdict::from_checks(cmd.name(), checks),
        Err(e @ Error::Config { .. }) => {
            out.write_json("verdict.json", &Verdict::failed(cmd.name(), e.to_string()))?;
            return Err(e);
        }
        Err(e) => Verdict::failed(cmd.name(), e.to_string()),
    };
    out.write_json("verdict.json", &verdict)?;
    Ok(verdict)
}

fn report_config_errors(cmd: Option<Command>, out: Option<&Path>, errors: &[String]) -> i32 {
    for e in errors {
        eprintln!("error: {e}");
    }
    if let (Some(cmd), Some(dir)) = (cmd, out) {
        if let Ok(o) = Outputs::create(dir) {
            let _ = o.write_json("verdict.json", &Verdict::failed(cmd.name(), errors.join("; ")));
        }
    }
    EXIT_CONFIG
}

/// Entry point of the `sgdm-lab` binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_PASS } else { EXIT_CONFIG };
        }
    };
    let cmd = cli.command;
    let (cfg, diags) = match resolve(&cli) {
        Ok(r) => r,
        Err(e) => return report_config_errors(Some(cmd), cli.overrides.out.as_deref(), &[e.to_string()]),
    };
    if !diags.is_empty() {
        let msgs: Vec<String> = diags.iter().map(|d| format!("config field {d}")).collect();
        return report_config_errors(Some(cmd), Some(&cfg.out), &msgs);
    }
    match execute(cmd, &cfg) {
        Ok(verdict) => {
            for c in &verdict.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("[{tag}] {} value={} threshold={}", c.name, c.value, c.threshold);
            }
            if let Some(err) = &verdict.error {
                eprintln!("error: {err}");
            }
            let status = if verdict.passed { "PASS" } else { "FAIL" };
            println!("{}: {status} ({})", cmd.name(), cfg.out.join("verdict.json").display());
            if verdict.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}
