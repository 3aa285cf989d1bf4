//! C ABI over the `kdc` engine.
//!
//! Every function returns a [`KdcStatus`] and writes results through out
//! pointers. Objects are opaque heap handles released with the matching
//! `*_free`. On failure a message is stored per thread and can be fetched with
//! [`kdc_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use kdc::eval::excess_risk_exact;
use kdc::filter::FilterTag;
use kdc::harness::filter_for;
use kdc::train::{train_sa, train_sgm};
use kdc::{AveragedModel, Dataset, Error, KernelSpec, SgmConfig, SpectralProblem, StepSchedule};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdcStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    Domain = 3,
    Divergence = 4,
    Numerical = 5,
    Indivisible = 6,
    Panic = 7,
    BufferTooSmall = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdcFilter {
    Tikhonov = 0,
    Landweber = 1,
    Cutoff = 2,
    TikhonovBiasCorrected = 3,
}

impl From<KdcFilter> for FilterTag {
    fn from(f: KdcFilter) -> Self {
        match f {
            KdcFilter::Tikhonov => FilterTag::Tikhonov,
            KdcFilter::Landweber => FilterTag::Landweber,
            KdcFilter::Cutoff => FilterTag::Cutoff,
            KdcFilter::TikhonovBiasCorrected => FilterTag::TikhonovBc,
        }
    }
}

/// Synthetic problem together with its truncated spectral kernel.
pub struct KdcProblem {
    problem: Arc<SpectralProblem>,
    kernel: KernelSpec,
}

pub struct KdcDataset {
    data: Dataset,
}

/// Averaged model, bound to the problem it was trained on.
pub struct KdcModel {
    model: AveragedModel,
    problem: Arc<SpectralProblem>,
    kernel: KernelSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> KdcStatus {
    match e {
        Error::Domain { .. } => KdcStatus::Domain,
        Error::Divergence { .. } => KdcStatus::Divergence,
        Error::EigenConvergence(_) => KdcStatus::Numerical,
        Error::Indivisible { .. } => KdcStatus::Indivisible,
        _ => KdcStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KdcStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            KdcStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("buffer too small: need {need} bytes"));
            KdcStatus::BufferTooSmall
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            KdcStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn put<T>(out: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(v);
    Ok(())
}

/// Copies `s` plus a trailing NUL into `buf`. `written` always receives the
/// byte count including the NUL, so callers can size a second attempt.
unsafe fn write_str(s: &str, buf: *mut c_char, cap: usize, written: *mut usize) -> Result<(), Fail> {
    let need = s.len() + 1;
    if !written.is_null() {
        written.write(need);
    }
    if buf.is_null() {
        return Err(Fail::Null("buf"));
    }
    if cap < need {
        return Err(Fail::Small(need));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf.cast::<u8>(), s.len());
    buf.add(s.len()).write(0);
    Ok(())
}

/// Longest Landweber run the C API will build; its length is `kappa_sq / lambda`.
const MAX_LANDWEBER_STEPS: f64 = 1e7;

fn filter_spec(filter: KdcFilter, lambda: f64, kappa_sq: f64, zeta: f64) -> Result<kdc::FilterSpec, Fail> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain { value: lambda, domain: "(0, inf)" }.into());
    }
    if filter == KdcFilter::Landweber && kappa_sq / lambda > MAX_LANDWEBER_STEPS {
        return Err(Error::InvalidParameter(format!("lambda {lambda:e} needs more than 1e7 Landweber steps")).into());
    }
    Ok(filter_for(filter.into(), lambda, kappa_sq, zeta)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kdc_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Message of the last failed call on this thread.
///
/// # Safety
/// `buf` must be valid for `cap` bytes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn kdc_last_error_message(buf: *mut c_char, cap: usize, written: *mut usize) -> KdcStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    // not routed through `guard`, which would overwrite the message
    match write_str(&msg, buf, cap, written) {
        Ok(()) => KdcStatus::Ok,
        Err(Fail::Small(_)) => KdcStatus::BufferTooSmall,
        Err(_) => KdcStatus::NullPointer,
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_new(
    dim: usize,
    gamma: f64,
    zeta: f64,
    source_norm: f64,
    noise_sd: f64,
    out: *mut *mut KdcProblem,
) -> KdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let problem = Arc::new(SpectralProblem::build(dim, gamma, zeta, source_norm, noise_sd)?);
        let kernel = KernelSpec::spectral(&problem);
        put(out, Box::into_raw(Box::new(KdcProblem { problem, kernel })), "out")
    })
}

/// # Safety
/// `p` must come from `kdc_problem_new` and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_free(p: *mut KdcProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `f_rho(x)` for `x` in `[0, 1]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_regression_value(p: *const KdcProblem, x: f64, out: *mut f64) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        put(out, p.problem.regression_value(x)?, "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_effective_dimension(
    p: *const KdcProblem,
    lambda: f64,
    out: *mut f64,
) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        put(out, p.problem.effective_dimension(lambda)?, "out")
    })
}

/// Sup of `K(x, x)` over the evaluation grid.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_kappa_sq(p: *const KdcProblem, out: *mut f64) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        put(out, p.problem.kappa_sq, "out")
    })
}

/// # Safety
/// `buf` must be valid for `cap` bytes; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn kdc_problem_to_json(
    p: *const KdcProblem,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        let json = p.problem.to_json()?;
        write_str(&json, buf, cap, written)
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_dataset_sample(
    p: *const KdcProblem,
    n: usize,
    seed: u64,
    out: *mut *mut KdcDataset,
) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let data = p.problem.sample(n, seed)?;
        put(out, Box::into_raw(Box::new(KdcDataset { data })), "out")
    })
}

/// Number of samples; 0 for null.
///
/// # Safety
/// `d` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_dataset_len(d: *const KdcDataset) -> usize {
    d.as_ref().map_or(0, |d| d.data.len())
}

/// Copies inputs and labels into caller buffers of length `cap`.
///
/// # Safety
/// `x` and `y` must be valid for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn kdc_dataset_copy(d: *const KdcDataset, x: *mut f64, y: *mut f64, cap: usize) -> KdcStatus {
    guard(|| {
        let d = get(d, "dataset")?;
        if x.is_null() || y.is_null() {
            return Err(Fail::Null("x/y"));
        }
        let n = d.data.len();
        if cap < n {
            return Err(Fail::Small(n * std::mem::size_of::<f64>()));
        }
        ptr::copy_nonoverlapping(d.data.inputs.as_ptr(), x, n);
        ptr::copy_nonoverlapping(d.data.labels.as_ptr(), y, n);
        Ok(())
    })
}

/// # Safety
/// `d` must come from `kdc_dataset_sample`. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kdc_dataset_free(d: *mut KdcDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Distributed mini-batch SGM with a constant step.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kdc_train_sgm(
    p: *const KdcProblem,
    d: *const KdcDataset,
    partitions: usize,
    batch_size: usize,
    iterations: usize,
    step_size: f64,
    base_seed: u64,
    partition_seed: u64,
    out: *mut *mut KdcModel,
) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        let d = get(d, "dataset")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = SgmConfig {
            partitions,
            batch_size,
            iterations,
            step_schedule: StepSchedule::Constant(step_size),
            base_seed,
        };
        cfg.validate(d.data.len(), p.kernel.kappa_sq(), false)?;
        let model = train_sgm(&d.data, &cfg, &p.kernel, partition_seed)?;
        let m = KdcModel { model, problem: p.problem.clone(), kernel: p.kernel.clone() };
        put(out, Box::into_raw(Box::new(m)), "out")
    })
}

/// Distributed spectral algorithm with one of the built-in filters.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_train_sa(
    p: *const KdcProblem,
    d: *const KdcDataset,
    partitions: usize,
    filter: KdcFilter,
    lambda: f64,
    partition_seed: u64,
    out: *mut *mut KdcModel,
) -> KdcStatus {
    guard(|| {
        let p = get(p, "problem")?;
        let d = get(d, "dataset")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let spec = filter_spec(filter, lambda, p.problem.kappa_sq_safe(), p.problem.zeta)?;
        let model = train_sa(&d.data, partitions, &spec, lambda, &p.kernel, partition_seed)?;
        let m = KdcModel { model, problem: p.problem.clone(), kernel: p.kernel.clone() };
        put(out, Box::into_raw(Box::new(m)), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_model_predict(m: *const KdcModel, x: f64, out: *mut f64) -> KdcStatus {
    guard(|| {
        let m = get(m, "model")?;
        put(out, m.model.predict(&m.kernel, x)?, "out")
    })
}

/// Exact excess risk against the problem the model was trained on.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_model_excess_risk(m: *const KdcModel, out: *mut f64) -> KdcStatus {
    guard(|| {
        let m = get(m, "model")?;
        put(out, excess_risk_exact(&m.model, &m.kernel, &m.problem)?.excess_risk, "out")
    })
}

/// Number of averaged local models; 0 for null.
///
/// # Safety
/// `m` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_model_partitions(m: *const KdcModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.partitions())
}

/// # Safety
/// `m` must come from a `kdc_train_*` call. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn kdc_model_free(m: *mut KdcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `G_lambda(u)` for a built-in filter on `[0, kappa_sq]`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kdc_filter_value(
    filter: KdcFilter,
    lambda: f64,
    u: f64,
    kappa_sq: f64,
    out: *mut f64,
) -> KdcStatus {
    guard(|| {
        if !(kappa_sq.is_finite() && kappa_sq > 0.0) {
            return Err(Error::Domain { value: kappa_sq, domain: "(0, inf)" }.into());
        }
        let spec = filter_spec(filter, lambda, kappa_sq, 1.0)?;
        put(out, spec.value(lambda, u)?, "out")
    })
}
