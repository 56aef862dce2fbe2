//! C ABI for the branching-selection front lab.
//!
//! Conventions, uniform across the surface:
//!
//! - Every fallible function returns a [`BselStatus`]; `BSEL_STATUS_OK` is 0.
//! - Out parameters are written only when the call returns OK.
//! - On any failure the function stores a message retrievable with
//!   [`bsel_last_error_message`] (per thread).
//! - Simulations live behind the opaque handle [`BselSim`]; callers own the
//!   handle and must release it with [`bsel_sim_free`] exactly once.
//! - No function unwinds across the boundary: internal panics are caught and
//!   reported as `BSEL_STATUS_INTERNAL`.
//!
//! The header `include/bsel.h` is regenerated by the build script on every
//! compile, so it is always in sync with this file.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bsel::cli::CliError;
use bsel::dynamics::ChainRunner;
use bsel::estimator::{default_burnin, estimate_speed};
use bsel::exact_chain::exact_speed;
use bsel::population::ModelParams;
use bsel::theory::{critical_speed, derived_constants, rate_function};

/// Result class of an FFI call. Nonzero means the call failed and no out
/// parameter was written.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BselStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A parameter was outside its documented domain.
    InvalidArgument = 2,
    /// A configured capacity or enumeration budget was exceeded.
    Capacity = 3,
    /// A numeric procedure failed (singular solve, inadmissible sequence, ...).
    Numeric = 4,
    /// An internal invariant was violated; the handle involved (if any) is
    /// only safe to free.
    Internal = 5,
}

/// Pass as `burnin` to let the library pick its default burn-in.
pub const BSEL_BURNIN_AUTO: u64 = u64::MAX;

/// Limiting-speed constants at a subcritical step probability.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BselTheoryConstants {
    /// Step-up probability the constants were derived at.
    pub p: f64,
    /// Limiting front speed: root of the rate-function equation in (p, 1).
    pub v: f64,
    /// Tilt ratio (p/(1-p))/(v/(1-v)), strictly inside (0, 1).
    pub gamma: f64,
    /// Branching entropy ln 2 that the root is matched against.
    pub log2: f64,
    /// Smallest integer at least v/(1-v).
    pub q: u64,
}

/// Front statistics of a running simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BselFront {
    /// Leftmost occupied site.
    pub min: i64,
    /// Rightmost occupied site.
    pub max: i64,
    /// max - min.
    pub diameter: u64,
    /// Particle count (constant over the run).
    pub mass: u64,
    /// Selection steps taken so far.
    pub steps: u64,
    /// Largest diameter observed since the start.
    pub max_diameter_seen: u64,
}

/// Batch-means speed estimate for one (p, N).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BselSpeedEstimate {
    /// Mean per-step displacement of the maximum after burn-in.
    pub v_hat: f64,
    /// Standard error of `v_hat` from the batch means.
    pub stderr: f64,
    /// Total steps after burn-in.
    pub steps: u64,
    /// Burn-in steps actually used (resolved if auto was requested).
    pub burnin: u64,
    /// Seed the run used.
    pub seed: u64,
    /// Largest diameter observed.
    pub max_diameter: u64,
    /// Number of batches behind the error bar.
    pub batches: u32,
}

/// A certified lower bound on the finite-N speed from the barrier
/// construction, together with the tail-bound ingredients behind it.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BselCertificate {
    /// The certified lower bound on the speed; meaningful when not vacuous.
    pub value: f64,
    /// Speed discount of the barrier construction.
    pub alpha: f64,
    /// Smallest positive cell mass across the measure sequence.
    pub epsilon: f64,
    /// Tail probability bound at the requested population size.
    pub bound: f64,
    /// Per-particle exponential rate of the tail bound.
    pub rate: f64,
    /// Population size at which the tail bound first drops below 1.
    pub n_star: f64,
    /// Positive cells in the measure sequence (the union-bound factor).
    pub support_cells: u64,
    /// True when the bound is nonpositive at this population size.
    pub vacuous: bool,
}

/// A running N-particle simulation. Opaque: create with [`bsel_sim_new`],
/// advance with [`bsel_sim_step`], inspect with [`bsel_sim_front`], release
/// with [`bsel_sim_free`].
pub struct BselSim {
    runner: ChainRunner,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    // Interior NULs cannot occur in our error strings, but never panic here.
    let sanitized = message.replace('\0', " ");
    let c = CString::new(sanitized).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

/// Classifies any library error through the same mapping the CLI uses for
/// exit codes, so one failure taxonomy serves both surfaces.
fn fail<E: Into<CliError>>(err: E) -> BselStatus {
    let cli_err: CliError = err.into();
    set_last_error(&cli_err.to_string());
    match cli_err.exit_code() {
        2 => BselStatus::InvalidArgument,
        3 => BselStatus::Capacity,
        4 => BselStatus::Numeric,
        _ => BselStatus::Internal,
    }
}

fn null_pointer(name: &str) -> BselStatus {
    set_last_error(&format!("{name} must not be null"));
    BselStatus::NullPointer
}

/// Runs `body`, converting a panic into `Internal` instead of unwinding into
/// the caller.
fn guarded(body: impl FnOnce() -> BselStatus) -> BselStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| String::from("panic with non-string payload"));
            set_last_error(&format!("internal panic: {msg}"));
            BselStatus::Internal
        }
    }
}

/// Returns the library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bsel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns a static name for a status code ("ok", "null-pointer", ...).
#[no_mangle]
pub extern "C" fn bsel_status_name(status: BselStatus) -> *const c_char {
    let name: &'static str = match status {
        BselStatus::Ok => "ok\0",
        BselStatus::NullPointer => "null-pointer\0",
        BselStatus::InvalidArgument => "invalid-argument\0",
        BselStatus::Capacity => "capacity\0",
        BselStatus::Numeric => "numeric\0",
        BselStatus::Internal => "internal\0",
    };
    name.as_ptr() as *const c_char
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap` bytes) and returns the full length in bytes including
/// the NUL. With a null `buf` or zero `cap`, only the required length is
/// returned. A return of 1 means "no error recorded" (empty message).
///
/// # Safety
///
/// `buf`, when non-null, must point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bsel_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            // SAFETY: caller guarantees `cap` writable bytes at `buf`.
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                // Always NUL-terminate, even when truncating.
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Computes the limiting front speed at step probability `p` (any regime).
///
/// # Safety
///
/// `out` must be null or point to a writable f64; null is reported as an
/// error rather than dereferenced.
#[no_mangle]
pub unsafe extern "C" fn bsel_critical_speed(p: f64, out: *mut f64) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match critical_speed(p) {
            Ok(v) => {
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = v };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Evaluates the large-deviations rate function at displacement fraction `x`.
///
/// # Safety
///
/// `out` must be null or point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn bsel_rate_function(x: f64, p: f64, out: *mut f64) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match rate_function(x, p) {
            Ok(v) => {
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = v };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Fills `out` with the derived constants at a subcritical `p` (p < 1/2).
///
/// # Safety
///
/// `out` must be null or point to a writable [`BselTheoryConstants`].
#[no_mangle]
pub unsafe extern "C" fn bsel_theory_constants(
    p: f64,
    out: *mut BselTheoryConstants,
) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match derived_constants(p) {
            Ok(c) => {
                let ffi = BselTheoryConstants {
                    p: c.p,
                    v: c.v,
                    gamma: c.gamma,
                    log2: c.log2,
                    q: c.q,
                };
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = ffi };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Computes the exact stationary speed of the N-particle system by building
/// its translation-quotient chain. Feasible for small N only; larger N fail
/// with `BSEL_STATUS_CAPACITY` instead of exhausting memory.
///
/// # Safety
///
/// `out` must be null or point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn bsel_exact_speed(p: f64, n: u64, out: *mut f64) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let params = match ModelParams::new(p, n) {
            Ok(params) => params,
            Err(e) => return fail(e),
        };
        match exact_speed(params) {
            Ok(v) => {
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = v };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Creates a simulation of N particles at step probability `p`, all at the
/// origin, with a deterministic stream seeded by `seed`. On success `*out`
/// owns the handle.
///
/// # Safety
///
/// `out` must be null or point to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn bsel_sim_new(
    p: f64,
    n: u64,
    seed: u64,
    out: *mut *mut BselSim,
) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let params = match ModelParams::new(p, n) {
            Ok(params) => params,
            Err(e) => return fail(e),
        };
        let sim = Box::new(BselSim {
            runner: ChainRunner::new(params, seed),
        });
        // SAFETY: null-checked above; caller guarantees writability.
        unsafe { *out = Box::into_raw(sim) };
        BselStatus::Ok
    })
}

/// Advances the simulation by `steps` selection steps.
///
/// # Safety
///
/// `sim` must be null or a live handle from [`bsel_sim_new`] not used
/// concurrently from another thread.
#[no_mangle]
pub unsafe extern "C" fn bsel_sim_step(sim: *mut BselSim, steps: u64) -> BselStatus {
    guarded(|| {
        if sim.is_null() {
            return null_pointer("sim");
        }
        // SAFETY: caller guarantees a live, non-aliased handle.
        let sim = unsafe { &mut *sim };
        for _ in 0..steps {
            if let Err(e) = sim.runner.step() {
                return fail(e);
            }
        }
        BselStatus::Ok
    })
}

/// Fills `out` with the simulation's current front statistics.
///
/// # Safety
///
/// `sim` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bsel_sim_front(sim: *const BselSim, out: *mut BselFront) -> BselStatus {
    guarded(|| {
        if sim.is_null() {
            return null_pointer("sim");
        }
        if out.is_null() {
            return null_pointer("out");
        }
        // SAFETY: caller guarantees a live handle.
        let sim = unsafe { &*sim };
        let pop = sim.runner.pop();
        let front = BselFront {
            min: pop.min(),
            max: pop.max(),
            diameter: pop.diameter(),
            mass: pop.mass(),
            steps: sim.runner.step_count(),
            max_diameter_seen: sim.runner.max_diameter_seen(),
        };
        // SAFETY: null-checked above; caller guarantees writability.
        unsafe { *out = front };
        BselStatus::Ok
    })
}

/// Releases a simulation handle. Null is a no-op. The handle must not be
/// used afterwards.
///
/// # Safety
///
/// `sim` must be null or a handle from [`bsel_sim_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bsel_sim_free(sim: *mut BselSim) {
    if !sim.is_null() {
        // SAFETY: caller guarantees ownership and single free.
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Runs one simulation and estimates the speed by batch means. Pass
/// [`BSEL_BURNIN_AUTO`] as `burnin` to use the library default; `batches`
/// must be at least 8 and divide the post-burn-in span.
///
/// # Safety
///
/// `out` must be null or point to a writable [`BselSpeedEstimate`].
#[no_mangle]
pub unsafe extern "C" fn bsel_estimate_speed(
    p: f64,
    n: u64,
    steps: u64,
    burnin: u64,
    batches: u32,
    seed: u64,
    out: *mut BselSpeedEstimate,
) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        let params = match ModelParams::new(p, n) {
            Ok(params) => params,
            Err(e) => return fail(e),
        };
        let burnin = if burnin == BSEL_BURNIN_AUTO {
            default_burnin(n, steps, batches)
        } else {
            burnin
        };
        match estimate_speed(params, steps, burnin, batches, seed) {
            Ok(est) => {
                let ffi = BselSpeedEstimate {
                    v_hat: est.v_hat,
                    stderr: est.stderr,
                    steps: est.steps,
                    burnin: est.burnin,
                    seed: est.seed,
                    max_diameter: est.max_diameter_seen,
                    batches: est.batches,
                };
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = ffi };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Builds the barrier measure sequence at horizon `m`, verifies its
/// admissibility with margin `beta`, and evaluates the certified lower bound
/// on the N-particle speed. Fails with `BSEL_STATUS_NUMERIC` when the
/// sequence is not admissible for this margin.
///
/// # Safety
///
/// `out` must be null or point to a writable [`BselCertificate`].
#[no_mangle]
pub unsafe extern "C" fn bsel_certificate(
    p: f64,
    n: u64,
    m: u64,
    tail_factor: u64,
    beta: f64,
    out: *mut BselCertificate,
) -> BselStatus {
    guarded(|| {
        if out.is_null() {
            return null_pointer("out");
        }
        match bsel::admissible::certificate_lower_bound(p, n, m, tail_factor, beta) {
            Ok(cert) => {
                let ffi = BselCertificate {
                    value: cert.value,
                    alpha: cert.alpha,
                    epsilon: cert.tail.epsilon,
                    bound: cert.tail.bound,
                    rate: cert.tail.rate,
                    n_star: cert.tail.n_star,
                    support_cells: cert.tail.support_cells,
                    vacuous: cert.vacuous,
                };
                // SAFETY: null-checked above; caller guarantees writability.
                unsafe { *out = ffi };
                BselStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
