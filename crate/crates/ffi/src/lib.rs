//! C interface to `sgdm-lab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_run`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`SgdmStatus`]; on failure a thread-local message is available
//! through [`sgdm_last_error`]. Panics never unwind into the caller.
//!
//! Vectors are passed as `(pointer, length)` pairs of `double`. Output
//! buffers must hold at least the documented number of elements.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sgdm_lab::concentration::anytime_bound;
use sgdm_lab::lyapunov::{check_descent, continuous_energy, discrete_energy};
use sgdm_lab::optimizers::{
    run_trajectory, Algorithm, RunOptions, ScheduleKind, SgdmState, StepSchedule, TrajectoryRecord,
};
use sgdm_lab::problems::{NoiseModel, Objective, DEFAULT_REFINE_TOL};
use sgdm_lab::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgdmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Non-finite values, a non-PSD matrix or a failed optimum refinement.
    Numerical = 4,
    NonMonotoneSchedule = 5,
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgdmScheduleKind {
    AnytimeLog2 = 0,
    ExpectationLog2 = 1,
    EpsilonLog = 2,
    SqrtK = 3,
    Constant = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgdmAlgorithm {
    Sgdm = 0,
    Sgd = 1,
    Acsa = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SgdmNoiseKind {
    None = 0,
    /// `scale` is the per-coordinate variance.
    Gaussian = 1,
    /// `scale` is the per-coordinate half-width.
    Uniform = 2,
}

/// Opaque objective handle.
pub struct SgdmObjective(Objective);

/// Opaque step-size schedule handle.
pub struct SgdmSchedule(StepSchedule);

/// Opaque SGDM iterate handle.
pub struct SgdmOptimizer(SgdmState);

/// Opaque logged trajectory handle.
pub struct SgdmTrajectory(TrajectoryRecord);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> SgdmStatus {
    match err {
        Error::DimensionMismatch { .. } => SgdmStatus::DimensionMismatch,
        Error::NotPositiveSemidefinite { .. }
        | Error::RefineFailed { .. }
        | Error::NonFinite { .. }
        | Error::OptimumReference { .. } => SgdmStatus::Numerical,
        Error::NonMonotoneSchedule => SgdmStatus::NonMonotoneSchedule,
        _ => SgdmStatus::InvalidArgument,
    }
}

struct Fail(SgdmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn fail<T>(status: SgdmStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `f`, records any error message and converts panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> SgdmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SgdmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SgdmStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(SgdmStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return fail(SgdmStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .map_or_else(|| fail(SgdmStatus::NullPointer, format!("{what} handle is null")), Ok)
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .map_or_else(|| fail(SgdmStatus::NullPointer, format!("{what} handle is null")), Ok)
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return fail(SgdmStatus::NullPointer, format!("{what} output pointer is null"));
    }
    out.write(value);
    Ok(())
}

fn check_len(expected: usize, got: usize) -> Result<(), Fail> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got }.into());
    }
    Ok(())
}

fn product(a: usize, b: usize) -> Result<usize, Fail> {
    a.checked_mul(b)
        .map_or_else(|| fail(SgdmStatus::InvalidArgument, format!("{a} x {b} overflows")), Ok)
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sgdm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sgdm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Per-run seed derived from a master seed.
#[no_mangle]
pub extern "C" fn sgdm_seed_split(master_seed: u64, run_index: u64) -> u64 {
    sgdm_lab::rng::seed_split(master_seed, run_index)
}

/// `f(x) = ½ xᵀAx` from a row-major `dim × dim` matrix.
#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_quadratic(
    a: *const f64,
    dim: usize,
    out: *mut *mut SgdmObjective,
) -> SgdmStatus {
    guard(|| {
        let data = slice(a, product(dim, dim)?, "matrix")?;
        let m = nalgebra::DMatrix::from_row_slice(dim, dim, data);
        let obj = Objective::quadratic(m)?;
        store(out, boxed(SgdmObjective(obj)), "objective")
    })
}

/// Random quadratic with eigenvalues spread over `[eig_min, eig_max]`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_random_quadratic(
    dim: usize,
    seed: u64,
    eig_min: f64,
    eig_max: f64,
    out: *mut *mut SgdmObjective,
) -> SgdmStatus {
    guard(|| {
        let obj = Objective::random_quadratic(dim, seed, eig_min, eig_max)?;
        store(out, boxed(SgdmObjective(obj)), "objective")
    })
}

/// Logistic loss on `samples` rows of `dim` features (row-major) with
/// labels in `{0, 1}`, refined to its optimum. `refine_tol <= 0` selects the
/// default tolerance.
#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_logistic(
    features: *const f64,
    labels: *const f64,
    samples: usize,
    dim: usize,
    refine_tol: f64,
    out: *mut *mut SgdmObjective,
) -> SgdmStatus {
    guard(|| {
        let flat = slice(features, product(samples, dim)?, "features")?;
        let y = slice(labels, samples, "labels")?.to_vec();
        let rows = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let tol = if refine_tol > 0.0 {
            refine_tol
        } else {
            DEFAULT_REFINE_TOL
        };
        let obj = Objective::logistic(rows, y)?.refined(tol)?;
        store(out, boxed(SgdmObjective(obj)), "objective")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_free(obj: *mut SgdmObjective) {
    release(obj);
}

/// Dimension, smoothness constant `L` and optimal value `f*`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_info(
    obj: *const SgdmObjective,
    dim: *mut usize,
    lipschitz: *mut f64,
    fstar: *mut f64,
) -> SgdmStatus {
    guard(|| {
        let o = &handle(obj, "objective")?.0;
        store(dim, o.dim(), "dim")?;
        store(lipschitz, o.lipschitz(), "lipschitz")?;
        store(fstar, o.fstar(), "fstar")
    })
}

/// Copies the minimiser into `xstar[0..len]`; `len` must equal the dimension.
#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_xstar(obj: *const SgdmObjective, xstar: *mut f64, len: usize) -> SgdmStatus {
    guard(|| {
        let o = &handle(obj, "objective")?.0;
        check_len(o.dim(), len)?;
        slice_mut(xstar, len, "xstar")?.copy_from_slice(o.xstar());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_eval(
    obj: *const SgdmObjective,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> SgdmStatus {
    guard(|| {
        let o = &handle(obj, "objective")?.0;
        check_len(o.dim(), len)?;
        store(value, o.eval(slice(x, len, "x")?), "value")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_objective_grad(
    obj: *const SgdmObjective,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> SgdmStatus {
    guard(|| {
        let o = &handle(obj, "objective")?.0;
        check_len(o.dim(), len)?;
        o.grad_into(slice(x, len, "x")?, slice_mut(grad, len, "grad")?);
        Ok(())
    })
}

/// Built-in schedule. `epsilon` is read only by `EpsilonLog`; `lipschitz`
/// only by the logarithmic kinds.
#[no_mangle]
pub unsafe extern "C" fn sgdm_schedule_new(
    kind: SgdmScheduleKind,
    scale: f64,
    epsilon: f64,
    lipschitz: f64,
    out: *mut *mut SgdmSchedule,
) -> SgdmStatus {
    guard(|| {
        let kind = match kind {
            SgdmScheduleKind::AnytimeLog2 => ScheduleKind::AnytimeLog2,
            SgdmScheduleKind::ExpectationLog2 => ScheduleKind::ExpectationLog2,
            SgdmScheduleKind::EpsilonLog => ScheduleKind::EpsilonLog,
            SgdmScheduleKind::SqrtK => ScheduleKind::SqrtK,
            SgdmScheduleKind::Constant => ScheduleKind::Constant,
        };
        let s = StepSchedule::new(kind, scale, epsilon, lipschitz)?;
        store(out, boxed(SgdmSchedule(s)), "schedule")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_schedule_free(s: *mut SgdmSchedule) {
    release(s);
}

/// `η_k`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_schedule_eval(s: *const SgdmSchedule, k: u64, eta: *mut f64) -> SgdmStatus {
    guard(|| store(eta, handle(s, "schedule")?.0.eval(k), "eta"))
}

/// SGDM iterate starting at `x_0 = x_1 = x1`, step counter `k = 1`.
/// The schedule is copied; the handle may be freed afterwards.
#[no_mangle]
pub unsafe extern "C" fn sgdm_optimizer_new(
    x1: *const f64,
    len: usize,
    schedule: *const SgdmSchedule,
    out: *mut *mut SgdmOptimizer,
) -> SgdmStatus {
    guard(|| {
        if len == 0 {
            return fail(SgdmStatus::InvalidArgument, "dimension must be positive");
        }
        let x = slice(x1, len, "x1")?.to_vec();
        let s = handle(schedule, "schedule")?.0.clone();
        store(out, boxed(SgdmOptimizer(SgdmState::new(x, s))), "optimizer")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_optimizer_free(opt: *mut SgdmOptimizer) {
    release(opt);
}

/// One SGDM step with the (stochastic) gradient `g` taken at the current iterate.
#[no_mangle]
pub unsafe extern "C" fn sgdm_optimizer_step(opt: *mut SgdmOptimizer, g: *const f64, len: usize) -> SgdmStatus {
    guard(|| {
        let state = &mut handle_mut(opt, "optimizer")?.0;
        check_len(state.x().len(), len)?;
        state.step(slice(g, len, "g")?)?;
        Ok(())
    })
}

/// Current step counter `k` and iterate `x_k` (written to `x[0..len]`).
#[no_mangle]
pub unsafe extern "C" fn sgdm_optimizer_state(
    opt: *const SgdmOptimizer,
    k: *mut u64,
    x: *mut f64,
    len: usize,
) -> SgdmStatus {
    guard(|| {
        let state = &handle(opt, "optimizer")?.0;
        check_len(state.x().len(), len)?;
        store(k, state.k(), "k")?;
        slice_mut(x, len, "x")?.copy_from_slice(state.x());
        Ok(())
    })
}

/// Runs `steps` iterations from the all-ones point and logs every step.
#[no_mangle]
pub unsafe extern "C" fn sgdm_trajectory_run(
    obj: *const SgdmObjective,
    noise: SgdmNoiseKind,
    noise_scale: f64,
    algorithm: SgdmAlgorithm,
    schedule: *const SgdmSchedule,
    steps: u64,
    seed: u64,
    out: *mut *mut SgdmTrajectory,
) -> SgdmStatus {
    guard(|| {
        let o = &handle(obj, "objective")?.0;
        let s = &handle(schedule, "schedule")?.0;
        let noise = match noise {
            SgdmNoiseKind::None => NoiseModel::none(o.dim()),
            SgdmNoiseKind::Gaussian => NoiseModel::gaussian(o.dim(), noise_scale)?,
            SgdmNoiseKind::Uniform => NoiseModel::uniform(o.dim(), noise_scale)?,
        };
        let alg = match algorithm {
            SgdmAlgorithm::Sgdm => Algorithm::Sgdm,
            SgdmAlgorithm::Sgd => Algorithm::Sgd,
            SgdmAlgorithm::Acsa => Algorithm::Acsa,
        };
        let rec = run_trajectory(o, &noise, alg, s, steps, seed, &RunOptions::default())?;
        store(out, boxed(SgdmTrajectory(rec)), "trajectory")
    })
}

#[no_mangle]
pub unsafe extern "C" fn sgdm_trajectory_free(t: *mut SgdmTrajectory) {
    release(t);
}

/// Number of logged steps.
#[no_mangle]
pub unsafe extern "C" fn sgdm_trajectory_len(t: *const SgdmTrajectory, len: *mut usize) -> SgdmStatus {
    guard(|| store(len, handle(t, "trajectory")?.0.len(), "len"))
}

/// Copies `f(x_k) − f*` for `k = 1..=len` into `buf`; `cap` must be at least `len`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_trajectory_f_gaps(t: *const SgdmTrajectory, buf: *mut f64, cap: usize) -> SgdmStatus {
    guard(|| {
        let rec = &handle(t, "trajectory")?.0;
        if cap < rec.len() {
            return fail(
                SgdmStatus::BufferTooSmall,
                format!("buffer holds {cap}, need {}", rec.len()),
            );
        }
        let out = slice_mut(buf, rec.len(), "buffer")?;
        for (o, r) in out.iter_mut().zip(&rec.rows) {
            *o = r.f_gap;
        }
        Ok(())
    })
}

/// Largest relative residual of the pathwise descent inequality and the
/// number of violating steps.
#[no_mangle]
pub unsafe extern "C" fn sgdm_trajectory_check_descent(
    t: *const SgdmTrajectory,
    max_residual: *mut f64,
    violations: *mut usize,
) -> SgdmStatus {
    guard(|| {
        let rep = check_descent(&handle(t, "trajectory")?.0)?;
        store(max_residual, rep.max_residual, "max_residual")?;
        store(violations, rep.n_violations, "violations")
    })
}

/// Discrete energy of the SGDM pair `(x_{k+1}, x_k)`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_discrete_energy(
    x_next: *const f64,
    x_cur: *const f64,
    xstar: *const f64,
    len: usize,
    k: u64,
    eta: f64,
    f_gap: f64,
    energy: *mut f64,
) -> SgdmStatus {
    guard(|| {
        let e = discrete_energy(
            slice(x_next, len, "x_next")?,
            slice(x_cur, len, "x_cur")?,
            k,
            eta,
            f_gap,
            slice(xstar, len, "xstar")?,
        )?;
        store(energy, e, "energy")
    })
}

/// Energy of the continuous-time system with parameters `(p, α)` at time `t`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_continuous_energy(
    x: *const f64,
    v: *const f64,
    xstar: *const f64,
    len: usize,
    t: f64,
    p: f64,
    alpha: f64,
    f_gap: f64,
    energy: *mut f64,
) -> SgdmStatus {
    guard(|| {
        let e = continuous_energy(
            slice(x, len, "x")?,
            slice(v, len, "v")?,
            t,
            p,
            alpha,
            f_gap,
            slice(xstar, len, "xstar")?,
        );
        store(energy, e, "energy")
    })
}

/// `(C1 + C2 log(1/β))·log(k+2)/√(k+1)` for `β ∈ (0, 1]`.
#[no_mangle]
pub unsafe extern "C" fn sgdm_anytime_bound(k: u64, beta: f64, c1: f64, c2: f64, bound: *mut f64) -> SgdmStatus {
    guard(|| store(bound, anytime_bound(k, beta, c1, c2)?, "bound"))
}
