//! The experiments behind each subcommand. Each returns the checks it
//! asserts and writes its artifacts into the output directory.

use std::io::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::verdict::{Check, Outputs};
use crate::concentration::{
    anytime_coverage, exp_inequality_scan, mgf_lemma_check, schedule_condition_holds, supermartingale_mc,
    tail_lemma_check, young_inequality_scan, AnytimeConstants, Bracket, GaussianSampler,
};
use crate::continuous::{l2_limit_estimate, l2_trend, ode_integrate, ode_rate_check, write_l2_csv, L2Setup, OdeParams};
use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::lyapunov::{check_descent, DescentReport, DESCENT_TOL};
use crate::optimizers::{run_trajectory, Algorithm, ScheduleKind, StepSchedule, TrajectoryRecord};
use crate::problems::{NoiseModel, Objective};
use crate::rng::seed_split;
use crate::stats::{
    expectation_rate_check, log_checkpoints, run_ensemble, smoothness_comparison, subsequence_rate_check, RunEnsemble,
};

/// Run index reserved for auxiliary streams so they never coincide with
/// the per-run seeds `0..M`.
const AUX_STREAM: u64 = u64::MAX;

struct Setup {
    obj: Objective,
    noise: NoiseModel,
    x0: Vec<f64>,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    let obj = cfg.objective().map_err(|e| Error::config("problem", e.to_string()))?;
    if let Some(x0) = &cfg.run.x0 {
        if x0.len() != obj.dim() {
            return Err(Error::config(
                "run.x0",
                format!("has {} entries, the problem has dimension {}", x0.len(), obj.dim()),
            ));
        }
    }
    let noise = cfg
        .noise
        .build(obj.dim())
        .map_err(|e| Error::config("noise", e.to_string()))?;
    let x0 = cfg.run.x0.clone().unwrap_or_else(|| vec![1.0; obj.dim()]);
    Ok(Setup { obj, noise, x0 })
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn run_records(
    s: &Setup,
    cfg: &ExperimentConfig,
    noise: &NoiseModel,
    algorithm: Algorithm,
    schedule: &StepSchedule,
    steps: u64,
    runs: usize,
) -> Result<Vec<TrajectoryRecord>> {
    let opts = cfg.run_options();
    (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            run_trajectory(
                &s.obj,
                noise,
                algorithm,
                schedule,
                steps,
                seed_split(cfg.seed, i),
                &opts,
            )
        })
        .collect()
}

#[derive(Serialize)]
struct RunSummary<'a> {
    algorithm: &'a str,
    schedule: &'a str,
    runs: usize,
    steps: u64,
    lipschitz: f64,
    fstar: f64,
    final_f_gap: Vec<f64>,
}

pub fn run(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let algorithm: Algorithm = cfg.run.algorithm.into();
    let schedule = cfg
        .schedule
        .build(s.obj.lipschitz())
        .map_err(|e| Error::config("schedule", e.to_string()))?;
    let records = run_records(&s, cfg, &s.noise, algorithm, &schedule, cfg.run.steps, cfg.run.runs)?;

    for (i, rec) in records.iter().enumerate() {
        let stem = if records.len() == 1 {
            "trajectory".to_string()
        } else {
            format!("trajectory_{i:04}")
        };
        out.write_with(&format!("{stem}.csv"), |w| rec.write_csv(w))?;
        if cfg.run.dump_state {
            out.write_fallible(&format!("{stem}.bin"), |w| rec.write_state_dump(w))?;
        }
    }
    if records.len() > 1 {
        let ens = RunEnsemble {
            algorithm,
            schedule: schedule.clone(),
            noiseless: s.noise.is_noiseless(),
            seeds: records.iter().map(|r| r.seed).collect(),
            f_gap0: records.iter().map(|r| r.f_gap0).collect(),
            f_gaps: records.iter().map(TrajectoryRecord::f_gaps).collect(),
        };
        out.write_with("curve.csv", |w| ens.write_curve_csv(&log_checkpoints(cfg.run.steps), w))?;
    }
    let final_f_gap: Vec<f64> = records
        .iter()
        .map(|r| r.rows.last().map_or(r.f_gap0, |row| row.f_gap))
        .collect();
    out.write_json(
        "run.json",
        &RunSummary {
            algorithm: algorithm.as_str(),
            schedule: schedule.kind().as_str(),
            runs: records.len(),
            steps: cfg.run.steps,
            lipschitz: s.obj.lipschitz(),
            fstar: s.obj.fstar(),
            final_f_gap: final_f_gap.clone(),
        },
    )?;
    let finite = final_f_gap.iter().all(|v| v.is_finite());
    Ok(vec![Check::flag("finite_trajectories", finite)])
}

#[derive(Serialize)]
struct DescentCase {
    noise: String,
    runs: usize,
    steps: u64,
    max_residual: f64,
    argmax_seed: u64,
    argmax_k: u64,
    n_violations: usize,
    tau_violations: usize,
    lower_bound_violations: usize,
}

pub fn verify_descent(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let schedule = cfg
        .schedule
        .build(s.obj.lipschitz())
        .map_err(|e| Error::config("schedule", e.to_string()))?;
    let mut cases = vec![("noisy", s.noise)];
    if cfg.descent.include_noiseless && !s.noise.is_noiseless() {
        cases.push(("noiseless", NoiseModel::none(s.obj.dim())));
    }
    if s.noise.is_noiseless() {
        cases[0].0 = "noiseless";
    }
    let mut checks = Vec::new();
    let mut summaries = Vec::new();
    for (label, noise) in cases {
        let records = run_records(
            &s,
            cfg,
            &noise,
            Algorithm::Sgdm,
            &schedule,
            cfg.descent.steps,
            cfg.descent.runs,
        )?;
        let reports: Vec<DescentReport> = records.par_iter().map(check_descent).collect::<Result<_>>()?;
        out.write_with(&format!("descent_{label}.csv"), |w| {
            writeln!(
                w,
                "seed,max_residual,argmax_k,n_violations,tau_violations,lower_bound_violations"
            )?;
            for (rec, rep) in records.iter().zip(&reports) {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    rec.seed,
                    rep.max_residual,
                    rep.argmax_k,
                    rep.n_violations,
                    rep.tau_violations,
                    rep.lower_bound_violations
                )?;
            }
            Ok(())
        })?;
        let (worst_i, worst) = reports
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.max_residual.total_cmp(&b.1.max_residual))
            .expect("at least one run");
        let case = DescentCase {
            noise: label.to_string(),
            runs: reports.len(),
            steps: cfg.descent.steps,
            max_residual: worst.max_residual,
            argmax_seed: records[worst_i].seed,
            argmax_k: worst.argmax_k,
            n_violations: reports.iter().map(|r| r.n_violations).sum(),
            tau_violations: reports.iter().map(|r| r.tau_violations).sum(),
            lower_bound_violations: reports.iter().map(|r| r.lower_bound_violations).sum(),
        };
        checks.push(Check::at_most(
            format!("descent_{label}_max_residual"),
            case.max_residual,
            DESCENT_TOL,
        ));
        checks.push(Check::at_most(
            format!("descent_{label}_auxiliary_violations"),
            (case.tau_violations + case.lower_bound_violations) as f64,
            0.0,
        ));
        summaries.push(case);
    }
    out.write_json("descent.json", &summaries)?;
    Ok(checks)
}

#[derive(Serialize)]
struct SubsequenceSummary {
    horizon: u64,
    early_horizon: u64,
    running_min_end: f64,
    running_min_early: f64,
    ratio: f64,
}

pub fn verify_expectation(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let e = &cfg.expectation;
    let schedule = e
        .schedule
        .build(s.obj.lipschitz())
        .map_err(|err| Error::config("expectation.schedule", err.to_string()))?;
    let opts = cfg.run_options();
    let ens = run_ensemble(
        &s.obj,
        &s.noise,
        Algorithm::Sgdm,
        &schedule,
        e.steps,
        e.runs,
        cfg.seed,
        &opts,
    )?;
    let dist0_sq = dist2(&s.x0, s.obj.xstar());
    let report = expectation_rate_check(&ens, s.obj.lipschitz(), dist0_sq, s.noise.sigma2());
    out.write_with("curve.csv", |w| ens.write_curve_csv(&log_checkpoints(e.steps), w))?;
    out.write_json("expectation.json", &report)?;

    let worst = report
        .checkpoints
        .iter()
        .map(|c| (c.mean - 3.0 * c.stderr) / c.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut checks = vec![Check::at_most("expectation_bound_ratio", worst, 1.0)];

    if e.subsequence_steps > 0 {
        let rec = run_trajectory(
            &s.obj,
            &NoiseModel::none(s.obj.dim()),
            Algorithm::Sgdm,
            &schedule,
            e.subsequence_steps,
            0,
            &opts,
        )?;
        let trace = subsequence_rate_check(&rec.f_gaps())?;
        let early = e.subsequence_steps / 100;
        let summary = SubsequenceSummary {
            horizon: e.subsequence_steps,
            early_horizon: early,
            running_min_end: trace.at(e.subsequence_steps),
            running_min_early: trace.at(early),
            ratio: trace.at(e.subsequence_steps) / trace.at(early),
        };
        checks.push(Check::below("subsequence_running_min_ratio", summary.ratio, 1.0));
        out.write_json("subsequence.json", &summary)?;
    }
    Ok(checks)
}

pub fn verify_anytime(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let a = &cfg.anytime;
    let schedule = a
        .schedule
        .build(s.obj.lipschitz())
        .map_err(|err| Error::config("anytime.schedule", err.to_string()))?;
    let opts = cfg.run_options();
    let report = anytime_coverage(
        &s.obj, &s.noise, &schedule, a.steps, &a.betas, a.runs, cfg.seed, a.tail_tol, &opts,
    )?;
    out.write_json("coverage.json", &report.entries)?;

    let mut checks: Vec<Check> = report
        .entries
        .iter()
        .map(|e| Check::at_most(format!("coverage_beta_{}", fmt_num(e.beta)), e.fraction, 2.0 * e.beta))
        .collect();
    checks.push(Check::flag("coverage_monotone_in_beta", report.monotone_in_beta));
    checks.push(Check::flag(
        "schedule_condition",
        schedule_condition_holds(&schedule, 10_000),
    ));

    let m = &cfg.supermartingale;
    if m.runs > 0 {
        let constants = AnytimeConstants::new(&schedule, s.noise.hp_sigma2(), report.energy0, a.tail_tol)?;
        let mc = supermartingale_mc(
            &s.obj,
            &s.noise,
            &schedule,
            &constants,
            m.steps,
            m.runs,
            seed_split(cfg.seed, AUX_STREAM),
            &opts,
        )?;
        out.write_with("supermartingale.csv", |w| {
            writeln!(w, "k,mean,stderr")?;
            for (k, (mean, se)) in mc.mean.iter().zip(&mc.stderr).enumerate() {
                writeln!(w, "{k},{mean},{se}")?;
            }
            Ok(())
        })?;
        out.write_json("supermartingale.json", &mc)?;
        checks.push(Check::at_most("supermartingale_max_rise_z", mc.max_rise_z, 3.0));
        checks.push(Check::at_most(
            "supermartingale_increment_residual",
            mc.max_increment_residual,
            DESCENT_TOL,
        ));
        checks.push(Check::at_most(
            "supermartingale_tau_violations",
            mc.tau_violations as f64,
            0.0,
        ));
    }
    Ok(checks)
}

#[derive(Serialize)]
struct OdePairSummary {
    p: f64,
    alpha: f64,
    #[serde(flatten)]
    report: crate::continuous::OdeRateReport,
}

#[derive(Serialize)]
struct OdeSummary {
    pairs: Vec<OdePairSummary>,
    l2: Vec<crate::continuous::L2Row>,
    l2_trend: crate::continuous::L2Trend,
    /// Largest `(est_{i+1} − est_i) / (2√(se_i² + se_{i+1}²))`.
    l2_max_rise: f64,
}

pub fn ode_compare(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let o = &cfg.ode;
    let v0 = vec![0.0; s.obj.dim()];
    let mut checks = Vec::new();
    let mut pairs = Vec::new();
    for &[p, alpha] in &o.pairs {
        let params = OdeParams {
            p,
            alpha,
            t0: o.t0,
            t_end: o.t,
            dt: o.dt,
        };
        let sol = ode_integrate(&s.obj, &params, &s.x0, &v0)?;
        let report = ode_rate_check(&sol, o.energy_tol)?;
        let tag = format!("p{}_alpha{}", fmt_num(p), fmt_num(alpha));
        out.write_with(&format!("ode_{tag}.csv"), |w| sol.write_csv(w, o.csv_stride))?;
        checks.push(Check::at_most(
            format!("ode_{tag}_energy_rise"),
            report.max_energy_increase,
            o.energy_tol,
        ));
        checks.push(Check::at_most(
            format!("ode_{tag}_rate_ratio"),
            report.max_bound_ratio,
            1.0,
        ));
        pairs.push(OdePairSummary { p, alpha, report });
    }

    let setup_l2 = L2Setup {
        t0: o.l2_t0,
        t_end: o.l2_t,
        dt: o.l2_dt,
        noise_sd: cfg.noise.coord_sd(),
        x_init: s.x0.clone(),
        runs: o.l2_runs,
    };
    let rows = l2_limit_estimate(&s.obj, &o.etas, &setup_l2, cfg.seed)?;
    out.write_with("l2.csv", |w| write_l2_csv(&rows, w))?;
    let trend = l2_trend(&rows);
    let max_rise = rows
        .windows(2)
        .map(|w| (w[1].mean_sq_dist - w[0].mean_sq_dist) / (2.0 * w[0].stderr.hypot(w[1].stderr)))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::flag("l2_decreasing_within_2se", trend.decreasing_within_2se));
    out.write_json(
        "ode.json",
        &OdeSummary {
            pairs,
            l2: rows,
            l2_trend: trend,
            l2_max_rise: max_rise,
        },
    )?;
    Ok(checks)
}

#[derive(Serialize)]
struct ConcentrationSummary {
    sigma2: f64,
    mgf: crate::concentration::MgfReport,
    tail: crate::concentration::TailReport,
    exp_scan: crate::concentration::InequalityScan,
    young_scan: crate::concentration::InequalityScan,
}

pub fn concentration(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let c = &cfg.concentration;
    let sampler = GaussianSampler::new(c.dim, c.coord_sd, c.c)?;
    let sigma2 = sampler.hp_sigma2();
    let mgf = mgf_lemma_check(
        &c.lambdas,
        c.c,
        sigma2.sqrt(),
        &sampler,
        c.mgf_samples,
        seed_split(cfg.seed, 0),
    )?;
    let weights: Vec<f64> = (1..=c.tail_terms).map(|l| 1.0 / l as f64).collect();
    let tail = tail_lemma_check(
        &weights,
        sigma2,
        &c.omegas,
        &sampler,
        c.tail_samples,
        seed_split(cfg.seed, 1),
    )?;
    let exp_scan = exp_inequality_scan(-20.0, 20.0, c.scan_points);
    let per_axis = (c.scan_points as f64).sqrt().ceil() as usize;
    let young_scan = young_inequality_scan(10.0, per_axis);

    let mut checks = vec![Check::flag("mgf_preconditions", mgf.preconditions.passed)];
    for e in &mgf.entries {
        let rel = if e.estimate > 0.0 { e.stderr / e.estimate } else { 0.0 };
        checks.push(Check::at_most(
            format!("mgf_lambda_{}", fmt_num(e.lambda)),
            e.estimate,
            e.bound * (1.0 + 3.0 * rel),
        ));
    }
    for e in &tail.entries {
        checks.push(Check::at_most(
            format!("tail_omega_{}", fmt_num(e.omega)),
            e.frequency,
            e.bound + 3.0 * e.binomial_se,
        ));
    }
    checks.push(Check::at_most(
        "exp_inequality_violations",
        exp_scan.violations as f64,
        0.0,
    ));
    checks.push(Check::at_most(
        "young_inequality_violations",
        young_scan.violations as f64,
        0.0,
    ));
    out.write_json(
        "concentration.json",
        &ConcentrationSummary {
            sigma2,
            mgf,
            tail,
            exp_scan,
            young_scan,
        },
    )?;
    Ok(checks)
}

pub fn smoothness(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let m = &cfg.smoothness;
    let l = s.obj.lipschitz();
    let sgdm_schedule = m
        .schedule
        .build(l)
        .map_err(|e| Error::config("smoothness.schedule", e.to_string()))?;
    let sgd_schedule = StepSchedule::new(ScheduleKind::SqrtK, m.sgd_scale, 0.0, l)?;
    let opts = cfg.run_options();
    let sgdm = run_ensemble(
        &s.obj,
        &s.noise,
        Algorithm::Sgdm,
        &sgdm_schedule,
        m.steps,
        m.runs,
        cfg.seed,
        &opts,
    )?;
    let sgd = run_ensemble(
        &s.obj,
        &s.noise,
        Algorithm::Sgd,
        &sgd_schedule,
        m.steps,
        m.runs,
        cfg.seed,
        &opts,
    )?;
    let report = smoothness_comparison(&sgdm, &sgd, m.window)?;
    let ks = log_checkpoints(m.steps);
    out.write_with("curve_sgdm.csv", |w| sgdm.write_curve_csv(&ks, w))?;
    out.write_with("curve_sgd.csv", |w| sgd.write_curve_csv(&ks, w))?;
    out.write_json("smoothness.json", &report)?;
    let check = if report.skipped {
        Check::flag("smoothness_skipped_noiseless", true)
    } else {
        Check::below(
            "smoothness_median_increment_variance",
            report.sgdm_median,
            report.sgd_median,
        )
    };
    Ok(vec![check])
}

#[derive(Serialize)]
struct ConstantsSummary {
    schedule: &'static str,
    #[serde(flatten)]
    constants: AnytimeConstants,
    /// `Σ 1/(k log^q(k+2))`.
    series: Bracket,
    schedule_condition: bool,
}

pub fn constants(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = setup(cfg)?;
    let schedule = cfg
        .schedule
        .build(s.obj.lipschitz())
        .map_err(|e| Error::config("schedule", e.to_string()))?;
    let Some((coef, q)) = schedule.log_form() else {
        return Err(Error::config(
            "schedule.kind",
            format!(
                "{} has no summable series; use a logarithmic schedule",
                schedule.kind().as_str()
            ),
        ));
    };
    let tol = cfg.constants.tail_tol;
    let probe = run_trajectory(
        &s.obj,
        &NoiseModel::none(s.obj.dim()),
        Algorithm::Sgdm,
        &schedule,
        1,
        0,
        &cfg.run_options(),
    )?;
    let constants = AnytimeConstants::new(&schedule, s.noise.hp_sigma2(), probe.energy0, tol)?;
    let g1 = constants.gammas.gamma1;
    let g2 = constants.gammas.gamma2;
    let series = Bracket {
        lo: g1.lo / (16.0 * coef),
        hi: g1.hi / (16.0 * coef),
    };
    let mut checks = vec![
        Check::at_most("gamma1_width", g1.width(), tol),
        Check::at_most("gamma2_relative_width", g2.width() / g2.hi, tol),
        Check::flag("schedule_condition", schedule_condition_holds(&schedule, 10_000)),
    ];
    if q == 2.0 {
        checks.push(Check::at_most("series_upper", series.hi, 4.0));
    }
    out.write_json(
        "constants.json",
        &ConstantsSummary {
            schedule: schedule.kind().as_str(),
            constants,
            series,
            schedule_condition: schedule_condition_holds(&schedule, 10_000),
        },
    )?;
    Ok(checks)
}
