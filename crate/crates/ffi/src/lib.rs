//! C ABI over `bpea-core`.
//!
//! Every function returns a [`BpeaStatus`] and writes results through out
//! pointers, which are left untouched on failure. After a failure,
//! [`bpea_last_error_message`] describes it on the calling thread. Panics
//! never cross the boundary; they surface as [`BpeaStatus::Panic`].
//!
//! Handles ([`BpeaMechanism`], [`BpeaExperiment`]) are opaque and owned by
//! the caller, who releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use bpea_core::baselines::pspr;
use bpea_core::bpea::{conditional_leakage_noisy, Mechanism, PrivacyRequirement, SolverMargin};
use bpea_core::harness::{run_tradeoff_experiment, write_results, ExperimentConfig, ExperimentReport, PolicyKind};
use bpea_core::leakage::{conditional_leakage, Precision};
use bpea_core::oracle::{empirical_conditional_leakage, OracleConfig};
use bpea_core::sphere::{spherical_distance, SpherePoint};
use bpea_core::streaming::{zone_from_error, SessionConfig};
use bpea_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpeaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NoiseOutOfRange = 3,
    MalformedInput = 4,
    Io = 5,
    Panic = 6,
}

impl From<&Error> for BpeaStatus {
    fn from(err: &Error) -> Self {
        match err.root() {
            Error::NoiseOutOfRange { .. } => BpeaStatus::NoiseOutOfRange,
            Error::MalformedTrace { .. } | Error::Schema { .. } => BpeaStatus::MalformedInput,
            Error::Io(_) => BpeaStatus::Io,
            _ => BpeaStatus::InvalidParameter,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    // Interior NULs cannot be represented; drop them rather than lose the text.
    let message = CString::new(message.replace('\0', "")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

struct Failure(BpeaStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(BpeaStatus::from(&err), err.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(BpeaStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `body`, turning errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> BpeaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BpeaStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("internal panic: {what}"));
            BpeaStatus::Panic
        }
    }
}

/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn write_out<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or null if none occurred.
/// The string stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bpea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Probability that the attacker locates the viewpoint when the error `e`
/// is uploaded unchanged.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_conditional_leakage(e: f64, eps: f64, out: *mut f64) -> BpeaStatus {
    guard(|| {
        let p = conditional_leakage(e, Precision::new(eps)?)?;
        write_out(out, "out", p)
    })
}

/// Leakage probability when `e + n` is uploaded instead of `e`.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_conditional_leakage_noisy(e: f64, n: f64, eps: f64, out: *mut f64) -> BpeaStatus {
    guard(|| {
        let p = conditional_leakage_noisy(e, n, Precision::new(eps)?)?;
        write_out(out, "out", p)
    })
}

/// Monte-Carlo estimate of the same probability from a simulated attacker.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_empirical_leakage(
    e: f64,
    n: f64,
    eps: f64,
    trials: u64,
    seed: u64,
    out: *mut f64,
) -> BpeaStatus {
    guard(|| {
        let cfg = OracleConfig::new(trials, OracleConfig::default().grid_resolution(), seed)?;
        let est = empirical_conditional_leakage(e, n, Precision::new(eps)?, &cfg)?;
        write_out(out, "out", est.value())
    })
}

/// Great-circle distance between two points given as longitude/latitude.
///
/// # Safety
/// `out` must be valid for writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_spherical_distance(
    lon_a: f64,
    lat_a: f64,
    lon_b: f64,
    lat_b: f64,
    out: *mut f64,
) -> BpeaStatus {
    guard(|| {
        let a = SpherePoint::from_lon_lat(lon_a, lat_a)?;
        let b = SpherePoint::from_lon_lat(lon_b, lat_b)?;
        write_out(out, "out", spherical_distance(&a, &b))
    })
}

/// Index of the streamed zone shape for an uploaded error: 0 = 3x3,
/// 1 = 3x5, 2 = 3x7, 3 = 4x7, 4 = 4x8.
///
/// # Safety
/// `out` must be valid for writing one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn bpea_zone_index(e_uploaded: f64, out: *mut usize) -> BpeaStatus {
    guard(|| {
        let shape = zone_from_error(e_uploaded)?;
        write_out(out, "out", shape.index())
    })
}

/// Fraction of the `len` per-trace leakage values that are at most `q`.
///
/// # Safety
/// `leakage` must point to `len` readable doubles; `out` must be valid for
/// writing one `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_pspr(leakage: *const f64, len: usize, q: f64, out: *mut f64) -> BpeaStatus {
    guard(|| {
        if leakage.is_null() {
            return Err(null("leakage"));
        }
        let values = std::slice::from_raw_parts(leakage, len);
        let ratio = pspr(values, PrivacyRequirement::new(q)?)?;
        write_out(out, "out", ratio)
    })
}

/// A configured B-PEA mechanism.
pub struct BpeaMechanism {
    inner: Mechanism,
}

/// What the mechanism did to one measured error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpeaObfuscated {
    pub error: f64,
    pub noise: f64,
    pub uploaded: f64,
    pub leakage: f64,
}

/// Creates a mechanism for precision `eps`, requirement `q` and solver
/// margin `tau`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bpea_mechanism_new(
    eps: f64,
    q: f64,
    tau: f64,
    out: *mut *mut BpeaMechanism,
) -> BpeaStatus {
    guard(|| {
        let inner = Mechanism::new(Precision::new(eps)?, PrivacyRequirement::new(q)?, SolverMargin::new(tau)?);
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(Box::into_raw(Box::new(BpeaMechanism { inner })));
        Ok(())
    })
}

/// # Safety
/// `mechanism` must be null or a handle from [`bpea_mechanism_new`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn bpea_mechanism_free(mechanism: *mut BpeaMechanism) {
    if !mechanism.is_null() {
        drop(Box::from_raw(mechanism));
    }
}

/// Optimal noise for the measured error `e`.
///
/// # Safety
/// `mechanism` must be a live handle; `out` must be valid for writing one
/// `double`.
#[no_mangle]
pub unsafe extern "C" fn bpea_mechanism_noise(mechanism: *const BpeaMechanism, e: f64, out: *mut f64) -> BpeaStatus {
    guard(|| {
        let m = mechanism.as_ref().ok_or_else(|| null("mechanism"))?;
        let n = m.inner.noise(e)?;
        write_out(out, "out", n)
    })
}

/// Applies the mechanism to the measured error `e`.
///
/// # Safety
/// `mechanism` must be a live handle; `out` must be valid for writing one
/// `BpeaObfuscated`.
#[no_mangle]
pub unsafe extern "C" fn bpea_mechanism_apply(
    mechanism: *const BpeaMechanism,
    e: f64,
    out: *mut BpeaObfuscated,
) -> BpeaStatus {
    guard(|| {
        let m = mechanism.as_ref().ok_or_else(|| null("mechanism"))?;
        let o = m.inner.apply(e)?;
        write_out(
            out,
            "out",
            BpeaObfuscated {
                error: o.error,
                noise: o.noise,
                uploaded: o.uploaded,
                leakage: o.leakage,
            },
        )
    })
}

/// Size and seed of a synthetic tradeoff experiment. Obtain defaults from
/// [`bpea_experiment_options_default`] and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpeaExperimentOptions {
    pub eps: f64,
    pub tau: f64,
    pub budget_mbit: f64,
    pub seed: u64,
    pub num_users: u32,
    pub train_videos: u32,
    pub eval_videos: u32,
    pub gops_per_video: usize,
}

#[no_mangle]
pub extern "C" fn bpea_experiment_options_default() -> BpeaExperimentOptions {
    let cfg = ExperimentConfig::default();
    BpeaExperimentOptions {
        eps: cfg.eps.value(),
        tau: cfg.tau.value(),
        budget_mbit: cfg.session.budget_mbit,
        seed: cfg.seed,
        num_users: cfg.num_users,
        train_videos: cfg.train_videos,
        eval_videos: cfg.eval_videos,
        gops_per_video: cfg.gops_per_video,
    }
}

impl BpeaExperimentOptions {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let cfg = ExperimentConfig {
            eps: Precision::new(self.eps)?,
            tau: SolverMargin::new(self.tau)?,
            session: SessionConfig::with_budget(self.budget_mbit)?,
            seed: self.seed,
            num_users: self.num_users,
            train_videos: self.train_videos,
            eval_videos: self.eval_videos,
            gops_per_video: self.gops_per_video,
            ..ExperimentConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpeaPolicy {
    None = 0,
    Bpea = 1,
    Gaussian = 2,
    Laplace = 3,
}

/// One aggregate row of the experiment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpeaResultRow {
    pub q: f64,
    pub policy: BpeaPolicy,
    pub pr_leak: f64,
    pub mean_error_rad: f64,
    pub mean_abs_noise_rad: f64,
    pub qoe: f64,
    pub pspr: f64,
}

/// Results of a completed tradeoff experiment.
pub struct BpeaExperiment {
    report: ExperimentReport,
}

/// Synthesises traces and runs the full experiment over the default
/// requirement grid and all policies.
///
/// # Safety
/// `options` must point to a readable `BpeaExperimentOptions`; `out` must
/// be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_run(
    options: *const BpeaExperimentOptions,
    out: *mut *mut BpeaExperiment,
) -> BpeaStatus {
    guard(|| {
        let opts = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = run_tradeoff_experiment(&opts.config()?)?;
        out.write(Box::into_raw(Box::new(BpeaExperiment { report })));
        Ok(())
    })
}

/// # Safety
/// `experiment` must be null or a handle from [`bpea_experiment_run`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_free(experiment: *mut BpeaExperiment) {
    if !experiment.is_null() {
        drop(Box::from_raw(experiment));
    }
}

/// Number of aggregate rows, or 0 for a null handle.
///
/// # Safety
/// `experiment` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_row_count(experiment: *const BpeaExperiment) -> usize {
    experiment.as_ref().map_or(0, |x| x.report.rows.len())
}

/// Non-zero when some baseline could not meet some requirement and was
/// evaluated at its largest scale instead.
///
/// # Safety
/// `experiment` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_any_infeasible(experiment: *const BpeaExperiment) -> bool {
    experiment.as_ref().is_some_and(|x| x.report.any_infeasible())
}

/// # Safety
/// `experiment` must be a live handle; `out` must be valid for writing one
/// `BpeaResultRow`.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_row(
    experiment: *const BpeaExperiment,
    index: usize,
    out: *mut BpeaResultRow,
) -> BpeaStatus {
    guard(|| {
        let x = experiment.as_ref().ok_or_else(|| null("experiment"))?;
        let row = x.report.rows.get(index).ok_or_else(|| {
            Failure(
                BpeaStatus::InvalidParameter,
                format!("row {index} out of range ({} rows)", x.report.rows.len()),
            )
        })?;
        let policy = match row.policy.parse::<PolicyKind>()? {
            PolicyKind::None => BpeaPolicy::None,
            PolicyKind::Bpea => BpeaPolicy::Bpea,
            PolicyKind::Gaussian => BpeaPolicy::Gaussian,
            PolicyKind::Laplace => BpeaPolicy::Laplace,
        };
        write_out(
            out,
            "out",
            BpeaResultRow {
                q: row.q,
                policy,
                pr_leak: row.pr_leak,
                mean_error_rad: row.mean_error_rad,
                mean_abs_noise_rad: row.mean_abs_noise_rad,
                qoe: row.qoe,
                pspr: row.pspr,
            },
        )
    })
}

/// Writes the aggregate rows as CSV to the UTF-8 path `path`.
///
/// # Safety
/// `experiment` must be a live handle; `path` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn bpea_experiment_write_csv(experiment: *const BpeaExperiment, path: *const c_char) -> BpeaStatus {
    guard(|| {
        let x = experiment.as_ref().ok_or_else(|| null("experiment"))?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Failure(BpeaStatus::MalformedInput, format!("path is not UTF-8: {e}")))?;
        write_results(&x.report.rows, &PathBuf::from(path))?;
        Ok(())
    })
}
