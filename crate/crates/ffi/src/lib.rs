//! C ABI over the `ris-secrecy` library.
//!
//! Objects are opaque handles created by `rs_*_new`/`rs_*_generate`/`rs_optimize`
//! and released with the matching `rs_*_free`. Every fallible call returns an
//! [`RsStatus`]; on failure a message is available from [`rs_last_error`] on the
//! calling thread. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ris_secrecy::harness::config::ConfigFile;
use ris_secrecy::harness::{initialize_state, run_baseline, Algorithm, ExperimentSpec};
use ris_secrecy::linalg::{CVec, C64};
use ris_secrecy::rate::{wmsr, BeamState};
use ris_secrecy::scenario::{dbm_to_watts, generate_channels, ChannelSet, SystemConfig};
use ris_secrecy::trace::{RunStatus, RunTrace};
use ris_secrecy::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Optimizer or baseline to run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsAlgorithm {
    BcdMm = 0,
    BcdSocp = 1,
    NonRobust = 2,
    BcdMmRand = 3,
    BcdMmNoRis = 4,
    BcdMmTwoBit = 5,
}

impl From<RsAlgorithm> for Algorithm {
    fn from(a: RsAlgorithm) -> Self {
        match a {
            RsAlgorithm::BcdMm => Algorithm::BcdMm,
            RsAlgorithm::BcdSocp => Algorithm::BcdSocp,
            RsAlgorithm::NonRobust => Algorithm::NonRobust,
            RsAlgorithm::BcdMmRand => Algorithm::BcdMmRand,
            RsAlgorithm::BcdMmNoRis => Algorithm::BcdMmNoRis,
            RsAlgorithm::BcdMmTwoBit => Algorithm::BcdMm2Bit,
        }
    }
}

/// One row of a convergence trace. `zeta` is NaN for the SOCP loop.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsTraceRow {
    pub iteration: usize,
    pub bound_objective: f64,
    pub true_wmsr: f64,
    pub zeta: f64,
    pub wall_ms: f64,
}

/// System and algorithm configuration.
pub struct RsConfig {
    inner: SystemConfig,
}

/// One channel realization.
pub struct RsChannels {
    inner: ChannelSet,
}

/// Outcome of one optimization run.
pub struct RsResult {
    state: BeamState,
    trace: RunTrace,
    wmsr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: RsStatus, msg: impl Into<String>) -> RsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> RsStatus {
    let status = match &e {
        Error::Geometry(_) | Error::Domain(_) => RsStatus::Geometry,
        Error::Numerical { .. } => RsStatus::Numerical,
        Error::Precondition(_) | Error::Parameter(_) => RsStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> RsStatus) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(RsStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(RsStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(RsStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

/// Message of the last failed call on this thread (empty if none). The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration with the default scenario (N=4, M=16, K=3, 30 dBm).
#[no_mangle]
pub extern "C" fn rs_config_new() -> *mut RsConfig {
    Box::into_raw(Box::new(RsConfig {
        inner: SystemConfig::default(),
    }))
}

/// Parse a TOML configuration (same format as the command-line tool).
#[no_mangle]
pub unsafe extern "C" fn rs_config_from_toml(text: *const c_char, out: *mut *mut RsConfig) -> RsStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        if text.is_null() {
            return fail(RsStatus::NullPointer, "text is null");
        }
        let text = match unsafe { CStr::from_ptr(text) }.to_str() {
            Ok(t) => t,
            Err(_) => return fail(RsStatus::InvalidArgument, "config text is not UTF-8"),
        };
        match ConfigFile::parse(text).and_then(|f| f.system_config()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RsConfig { inner }));
                RsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rs_config_free(config: *mut RsConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Set antenna, RIS and user counts. User weights are reset to 1.
#[no_mangle]
pub unsafe extern "C" fn rs_config_set_dims(config: *mut RsConfig, n_tx: usize, m_ris: usize, k_users: usize) -> RsStatus {
    guard(|| {
        let c = deref_mut!(config, "config");
        let next = SystemConfig {
            n_tx,
            m_ris,
            k_users,
            weights: vec![1.0; k_users],
            ..c.inner.clone()
        };
        apply(c, next)
    })
}

/// Set the transmit power budget in dBm.
#[no_mangle]
pub unsafe extern "C" fn rs_config_set_power_dbm(config: *mut RsConfig, p_dbm: f64) -> RsStatus {
    guard(|| {
        let c = deref_mut!(config, "config");
        let next = SystemConfig {
            p_max: dbm_to_watts(p_dbm),
            ..c.inner.clone()
        };
        apply(c, next)
    })
}

/// Set transmit and receive distortion ratios.
#[no_mangle]
pub unsafe extern "C" fn rs_config_set_distortion(config: *mut RsConfig, kappa_t: f64, kappa_r: f64) -> RsStatus {
    guard(|| {
        let c = deref_mut!(config, "config");
        let next = SystemConfig {
            kappa_t,
            kappa_r,
            ..c.inner.clone()
        };
        apply(c, next)
    })
}

/// Set the outer-iteration cap and relative-change tolerance.
#[no_mangle]
pub unsafe extern "C" fn rs_config_set_stopping(config: *mut RsConfig, max_iter: usize, tolerance: f64) -> RsStatus {
    guard(|| {
        let c = deref_mut!(config, "config");
        let mut next = c.inner.clone();
        next.mm.max_iter = max_iter;
        next.mm.tolerance = tolerance;
        apply(c, next)
    })
}

fn apply(c: &mut RsConfig, next: SystemConfig) -> RsStatus {
    match next.validate() {
        Ok(()) => {
            c.inner = next;
            RsStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Read back `(N, M, K)`; any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn rs_config_dims(
    config: *const RsConfig,
    n_tx: *mut usize,
    m_ris: *mut usize,
    k_users: *mut usize,
) -> RsStatus {
    guard(|| {
        let c = &deref!(config, "config").inner;
        for (p, v) in [(n_tx, c.n_tx), (m_ris, c.m_ris), (k_users, c.k_users)] {
            if let Some(p) = unsafe { p.as_mut() } {
                *p = v;
            }
        }
        RsStatus::Ok
    })
}

/// Draw one channel realization for `seed`.
#[no_mangle]
pub unsafe extern "C" fn rs_channels_generate(config: *const RsConfig, seed: u64, out: *mut *mut RsChannels) -> RsStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let c = deref!(config, "config");
        match generate_channels(&c.inner, seed) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RsChannels { inner }));
                RsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rs_channels_free(channels: *mut RsChannels) {
    if !channels.is_null() {
        drop(unsafe { Box::from_raw(channels) });
    }
}

/// Run `algorithm` from the seeded starting point. The reported WMSR is
/// evaluated under the configured hardware model.
#[no_mangle]
pub unsafe extern "C" fn rs_optimize(
    config: *const RsConfig,
    channels: *const RsChannels,
    algorithm: RsAlgorithm,
    seed: u64,
    out: *mut *mut RsResult,
) -> RsStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        *out = ptr::null_mut();
        let c = &deref!(config, "config").inner;
        let ch = &deref!(channels, "channels").inner;
        if ch.n_tx() != c.n_tx || ch.m_ris() != c.m_ris || ch.k_users() != c.k_users {
            return fail(RsStatus::InvalidArgument, "channels do not match the configuration dimensions");
        }
        let spec = ExperimentSpec::new(algorithm.into(), c, 1, seed);
        let run = run_baseline(&spec, c, ch, seed).and_then(|(state, trace)| {
            let v = if algorithm == RsAlgorithm::BcdMmNoRis {
                wmsr(&state, &ch.without_ris(), &c.without_ris())?
            } else {
                wmsr(&state, ch, c)?
            };
            Ok(RsResult { state, trace, wmsr: v })
        });
        match run {
            Ok(r) => {
                *out = Box::into_raw(Box::new(r));
                RsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn rs_result_free(result: *mut RsResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Final weighted minimum secrecy rate in nats (NaN if `result` is null).
#[no_mangle]
pub unsafe extern "C" fn rs_result_wmsr(result: *const RsResult) -> f64 {
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.wmsr)
}

/// Outer iterations performed (0 if `result` is null).
#[no_mangle]
pub unsafe extern "C" fn rs_result_iterations(result: *const RsResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.trace.iterations)
}

/// 1 if the stopping rule was met before the iteration cap.
#[no_mangle]
pub unsafe extern "C" fn rs_result_converged(result: *const RsResult) -> i32 {
    unsafe { result.as_ref() }.map_or(0, |r| (r.trace.status == RunStatus::Converged) as i32)
}

fn copy_complex(src: &CVec, re: *mut f64, im: *mut f64, len: usize) -> RsStatus {
    if len < src.len() {
        return fail(
            RsStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {} needed", src.len()),
        );
    }
    if src.is_empty() {
        return RsStatus::Ok;
    }
    if re.is_null() || im.is_null() {
        return fail(RsStatus::NullPointer, "output buffer is null");
    }
    for (i, z) in src.iter().enumerate() {
        unsafe {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
    }
    RsStatus::Ok
}

/// Copy the column-stacked precoder (N*K entries) into `re`/`im`.
#[no_mangle]
pub unsafe extern "C" fn rs_result_precoder(result: *const RsResult, re: *mut f64, im: *mut f64, len: usize) -> RsStatus {
    guard(|| copy_complex(deref!(result, "result").state.w_vec(), re, im, len))
}

/// Copy the reflection vector (M entries; 0 for the no-RIS baseline).
#[no_mangle]
pub unsafe extern "C" fn rs_result_phases(result: *const RsResult, re: *mut f64, im: *mut f64, len: usize) -> RsStatus {
    guard(|| copy_complex(deref!(result, "result").state.phi(), re, im, len))
}

/// Number of trace rows (0 if `result` is null).
#[no_mangle]
pub unsafe extern "C" fn rs_result_trace_len(result: *const RsResult) -> usize {
    unsafe { result.as_ref() }.map_or(0, |r| r.trace.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn rs_result_trace_row(result: *const RsResult, index: usize, out: *mut RsTraceRow) -> RsStatus {
    guard(|| {
        let r = deref!(result, "result");
        let out = deref_mut!(out, "out");
        match r.trace.rows.get(index) {
            Some(row) => {
                *out = RsTraceRow {
                    iteration: row.iteration,
                    bound_objective: row.bound_objective,
                    true_wmsr: row.true_wmsr,
                    zeta: row.zeta.unwrap_or(f64::NAN),
                    wall_ms: row.wall_ms,
                };
                RsStatus::Ok
            }
            None => fail(
                RsStatus::InvalidArgument,
                format!("trace row {index} out of range ({} rows)", r.trace.rows.len()),
            ),
        }
    })
}

fn read_complex(re: *const f64, im: *const f64, len: usize) -> Option<CVec> {
    if len == 0 {
        return Some(CVec::zeros(0));
    }
    if re.is_null() || im.is_null() {
        return None;
    }
    Some(CVec::from_fn(len, |i, _| unsafe { C64::new(*re.add(i), *im.add(i)) }))
}

/// WMSR in nats of a caller-supplied state: column-stacked precoder of N*K
/// entries and M unit-modulus reflection coefficients.
#[no_mangle]
pub unsafe extern "C" fn rs_evaluate_wmsr(
    config: *const RsConfig,
    channels: *const RsChannels,
    w_re: *const f64,
    w_im: *const f64,
    w_len: usize,
    phi_re: *const f64,
    phi_im: *const f64,
    phi_len: usize,
    out: *mut f64,
) -> RsStatus {
    guard(|| {
        let c = &deref!(config, "config").inner;
        let ch = &deref!(channels, "channels").inner;
        let out = deref_mut!(out, "out");
        let (Some(w), Some(phi)) = (read_complex(w_re, w_im, w_len), read_complex(phi_re, phi_im, phi_len)) else {
            return fail(RsStatus::NullPointer, "input buffer is null");
        };
        if phi_len != ch.m_ris() {
            return fail(RsStatus::InvalidArgument, format!("expected {} reflection coefficients", ch.m_ris()));
        }
        let state = match BeamState::from_vec(w, ch.n_tx(), ch.k_users(), phi) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match wmsr(&state, ch, c) {
            Ok(v) => {
                *out = v;
                RsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Seeded feasible starting point, copied into caller buffers (N*K and M entries).
#[no_mangle]
pub unsafe extern "C" fn rs_initial_state(
    config: *const RsConfig,
    channels: *const RsChannels,
    seed: u64,
    w_re: *mut f64,
    w_im: *mut f64,
    w_len: usize,
    phi_re: *mut f64,
    phi_im: *mut f64,
    phi_len: usize,
) -> RsStatus {
    guard(|| {
        let c = &deref!(config, "config").inner;
        let ch = &deref!(channels, "channels").inner;
        let state = match initialize_state(c, ch, seed) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        match copy_complex(state.w_vec(), w_re, w_im, w_len) {
            RsStatus::Ok => copy_complex(state.phi(), phi_re, phi_im, phi_len),
            s => s,
        }
    })
}
