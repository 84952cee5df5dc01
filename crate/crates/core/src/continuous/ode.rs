use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::all_finite;
use crate::lyapunov::continuous_energy;
use crate::problems::Objective;

/// `Ẍ + (p+1)/t·Ẋ + (p+1)/t^α·∇f(X) = 0` integrated on `[t0, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeParams {
    pub p: f64,
    pub alpha: f64,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl OdeParams {
    /// The SGDM limit `Ẍ + (2/t)Ẋ + (2/t^{3/2})∇f = 0`.
    pub fn sgdm(t0: f64, t_end: f64, dt: f64) -> Self {
        OdeParams {
            p: 1.0,
            alpha: 1.5,
            t0,
            t_end,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "t0 = {} must be positive; the system is singular at t = 0",
                self.t0
            )));
        }
        if !(self.t_end >= self.t0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "end time {} precedes t0 = {}",
                self.t_end, self.t0
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.p.is_finite() && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument("p and alpha must be finite".into()));
        }
        Ok(())
    }

    /// Hypotheses of the energy-decay rate: `α ≤ 2` and `p + α ≥ 2`.
    pub fn rate_hypotheses_hold(&self) -> bool {
        self.alpha <= 2.0 && self.p + self.alpha >= 2.0
    }

    /// Number of fixed steps; the step is adjusted so the grid ends at `t_end`.
    pub fn n_steps(&self) -> usize {
        let span = self.t_end - self.t0;
        if span == 0.0 {
            0
        } else {
            ((span / self.dt).round() as usize).max(1)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeSolution {
    pub params: OdeParams,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub f_gap: Vec<f64>,
    pub energy: Vec<f64>,
}

impl OdeSolution {
    pub fn final_x(&self) -> &[f64] {
        self.x.last().expect("solution has at least the initial point")
    }

    pub fn final_v(&self) -> &[f64] {
        self.v.last().expect("solution has at least the initial point")
    }

    /// CSV `t,f_gap,energy`, keeping every `stride`-th grid point plus the last.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        writeln!(w, "t,f_gap,energy")?;
        let n = self.t.len();
        for i in (0..n).filter(|i| i % stride == 0 || *i == n - 1) {
            writeln!(w, "{},{},{}", self.t[i], self.f_gap[i], self.energy[i])?;
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn rhs(obj: &Objective, p: f64, alpha: f64, t: f64, x: &[f64], v: &[f64], dx: &mut [f64], dv: &mut [f64]) {
    obj.grad_into(x, dv);
    let damp = (p + 1.0) / t;
    let force = (p + 1.0) / t.powf(alpha);
    for i in 0..x.len() {
        dx[i] = v[i];
        dv[i] = -damp * v[i] - force * dv[i];
    }
}

/// Classical fixed-step RK4 on `Ẋ = V`, `V̇ = −(p+1)/t·V − (p+1)/t^α·∇f(X)`.
pub fn ode_integrate(obj: &Objective, params: &OdeParams, x0: &[f64], v0: &[f64]) -> Result<OdeSolution> {
    params.validate()?;
    let n = obj.dim();
    check_dim(n, x0.len())?;
    check_dim(n, v0.len())?;
    let steps = params.n_steps();
    let h = if steps == 0 {
        0.0
    } else {
        (params.t_end - params.t0) / steps as f64
    };
    let (p, alpha) = (params.p, params.alpha);
    let xstar = obj.xstar();

    let mut sol = OdeSolution {
        params: *params,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        f_gap: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
    };
    let record = |sol: &mut OdeSolution, t: f64, x: &[f64], v: &[f64]| {
        let gap = obj.gap(x);
        sol.t.push(t);
        sol.x.push(x.to_vec());
        sol.v.push(v.to_vec());
        sol.f_gap.push(gap);
        sol.energy.push(continuous_energy(x, v, t, p, alpha, gap, xstar));
    };

    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    record(&mut sol, params.t0, &x, &v);

    let zeros = || vec![0.0; n];
    let (mut k1x, mut k2x, mut k3x, mut k4x) = (zeros(), zeros(), zeros(), zeros());
    let (mut k1v, mut k2v, mut k3v, mut k4v) = (zeros(), zeros(), zeros(), zeros());
    let mut xs = zeros();
    let mut vs = zeros();
    let stage = |x: &[f64], v: &[f64], kx: &[f64], kv: &[f64], frac: f64, xs: &mut [f64], vs: &mut [f64]| {
        for i in 0..n {
            xs[i] = x[i] + frac * h * kx[i];
            vs[i] = v[i] + frac * h * kv[i];
        }
    };
    for step in 0..steps {
        let t = params.t0 + step as f64 * h;
        rhs(obj, p, alpha, t, &x, &v, &mut k1x, &mut k1v);
        stage(&x, &v, &k1x, &k1v, 0.5, &mut xs, &mut vs);
        rhs(obj, p, alpha, t + 0.5 * h, &xs, &vs, &mut k2x, &mut k2v);
        stage(&x, &v, &k2x, &k2v, 0.5, &mut xs, &mut vs);
        rhs(obj, p, alpha, t + 0.5 * h, &xs, &vs, &mut k3x, &mut k3v);
        stage(&x, &v, &k3x, &k3v, 1.0, &mut xs, &mut vs);
        rhs(obj, p, alpha, t + h, &xs, &vs, &mut k4x, &mut k4v);
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let t_next = if step + 1 == steps {
            params.t_end
        } else {
            params.t0 + (step + 1) as f64 * h
        };
        if !all_finite(&x) || !all_finite(&v) {
            return Err(Error::NonFinite {
                at: format!("ODE state at t = {t_next}"),
            });
        }
        record(&mut sol, t_next, &x, &v);
    }
    Ok(sol)
}

#[derive(Clone, Debug, Serialize)]
pub struct OdeRateReport {
    pub energy_t0: f64,
    /// Largest single-step increase `E(t_{i+1}) − E(t_i)`, relative to `E(T0)`.
    pub max_energy_increase: f64,
    pub energy_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_energy_violation_t: Option<f64>,
    /// Largest `(f(X(t)) − f*) / bound(t)` over the grid.
    pub max_bound_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_bound_violation_t: Option<f64>,
}

impl OdeRateReport {
    pub fn passed(&self) -> bool {
        self.first_energy_violation_t.is_none() && self.first_bound_violation_t.is_none()
    }
}

/// `E(T0) / (2(p+1) t^{2−α})`
pub fn ode_rate_bound(energy_t0: f64, p: f64, alpha: f64, t: f64) -> f64 {
    energy_t0 / (2.0 * (p + 1.0) * t.powf(2.0 - alpha))
}

/// Checks non-increase of `E(t)` along the grid (each step may rise by at
/// most `rel_tol·E(T0)`) and `f(X(t)) − f* ≤ E(T0)/(2(p+1)t^{2−α})` at every
/// grid point.
pub fn ode_rate_check(sol: &OdeSolution, rel_tol: f64) -> Result<OdeRateReport> {
    let params = &sol.params;
    if !params.rate_hypotheses_hold() {
        return Err(Error::InvalidArgument(format!(
            "(p, alpha) = ({}, {}) violates alpha <= 2, p + alpha >= 2",
            params.p, params.alpha
        )));
    }
    let e0 = sol.energy[0];
    let tol = rel_tol * e0;
    let mut report = OdeRateReport {
        energy_t0: e0,
        max_energy_increase: 0.0,
        energy_tolerance: rel_tol,
        first_energy_violation_t: None,
        max_bound_ratio: 0.0,
        first_bound_violation_t: None,
    };
    for i in 0..sol.t.len() {
        if i > 0 {
            let rise = sol.energy[i] - sol.energy[i - 1];
            if e0 > 0.0 {
                report.max_energy_increase = report.max_energy_increase.max(rise / e0);
            }
            if rise > tol && report.first_energy_violation_t.is_none() {
                report.first_energy_violation_t = Some(sol.t[i]);
            }
        }
        let bound = ode_rate_bound(e0, params.p, params.alpha, sol.t[i]);
        let gap = sol.f_gap[i];
        if bound > 0.0 {
            report.max_bound_ratio = report.max_bound_ratio.max(gap / bound);
        }
        if gap > bound && report.first_bound_violation_t.is_none() {
            report.first_bound_violation_t = Some(sol.t[i]);
        }
    }
    Ok(report)
}
