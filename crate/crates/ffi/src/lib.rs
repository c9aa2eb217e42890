//! C ABI over the verification toolkit.
//!
//! Conventions: handles are opaque pointers created and destroyed by this
//! library, verdict-style calls return an [`LeStatus`] that folds the result
//! and the error channel into one code, and any `char *` handed out by a
//! `*_json` call must be released with [`le_string_free`]. Details for the
//! most recent failure on the calling thread are available through
//! [`le_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::fs::File;
use std::io::BufWriter;

use libc::c_char;

use leadelect::abstraction::{prove_guarantee, Assumption, Guarantee};
use leadelect::drift::{verify_read_window, verify_p3, DriftSpec, DriftVerdict};
use leadelect::simplex::SolverError;
use leadelect::rat::Rat;
use leadelect::sim::{simulate, SimConfig};
use leadelect::timing::{StartConvention, TimingConstants};

/// Result of every fallible call. Mirrors the CLI exit codes for the
/// verdict-carrying values.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeStatus {
    /// The call succeeded; for verifiers, the property is proved.
    LeOk = 0,
    /// The property is refuted; a witness exists.
    LeRefuted = 1,
    /// Bad argument, unparsable input, or invalid constants.
    LeInvalidArgument = 2,
    /// A resource limit was hit before a verdict was reached.
    LeInconclusive = 3,
    /// A required pointer argument was null.
    LeNullPointer = 4,
    /// A file could not be written.
    LeIoError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into()).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LeStatus, msg: impl Into<String>) -> LeStatus {
    set_error(msg);
    status
}

/// Message for the most recent failure on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next failing call on
/// the same thread; do not free it.
#[no_mangle]
pub extern "C" fn le_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

#[no_mangle]
pub extern "C" fn le_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Timing constants handle: period and jitter interval bounds as exact
/// rationals (numerator/denominator pairs, in milliseconds).
pub struct LeConstants(TimingConstants);

fn rat(num: i64, den: i64) -> Option<Rat> {
    (den != 0).then(|| Rat::new(num, den))
}

/// Builds a constants handle; returns null if a denominator is zero or the
/// intervals are degenerate. Free with [`le_constants_free`].
#[no_mangle]
pub extern "C" fn le_constants_new(
    period_min_num: i64,
    period_min_den: i64,
    period_max_num: i64,
    period_max_den: i64,
    jitter_min_num: i64,
    jitter_min_den: i64,
    jitter_max_num: i64,
    jitter_max_den: i64,
) -> *mut LeConstants {
    let build = || -> Option<TimingConstants> {
        let tc = TimingConstants {
            period_min: rat(period_min_num, period_min_den)?,
            period_max: rat(period_max_num, period_max_den)?,
            jitter_min: rat(jitter_min_num, jitter_min_den)?,
            jitter_max: rat(jitter_max_num, jitter_max_den)?,
        };
        tc.validate().ok()?;
        Some(tc)
    };
    match build() {
        Some(tc) => Box::into_raw(Box::new(LeConstants(tc))),
        None => {
            set_error("invalid timing constants");
            std::ptr::null_mut()
        }
    }
}

/// Periods in [49, 51] ms, jitter in [-0.5, 0.5] ms.
#[no_mangle]
pub extern "C" fn le_constants_default() -> *mut LeConstants {
    Box::into_raw(Box::new(LeConstants(TimingConstants::defaults())))
}

/// # Safety
///
/// `handle` must be null or a pointer returned by a `le_constants_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn le_constants_free(handle: *mut LeConstants) {
    if !handle.is_null() {
        drop(unsafe { Box::from_raw(handle) });
    }
}

fn constants_ref<'a>(handle: *const LeConstants) -> Option<&'a TimingConstants> {
    unsafe { handle.as_ref() }.map(|h| &h.0)
}

fn solver_status(e: &SolverError) -> LeStatus {
    match e {
        SolverError::ResourceLimit(_) => LeStatus::LeInconclusive,
        SolverError::Internal(_) => LeStatus::LeInvalidArgument,
    }
}

/// Checks that the activation-count difference between any two nodes stays
/// within `[lower, upper]` for the first `max_activations` activations.
///
/// Returns `LeOk` if proved and `LeRefuted` if a violating schedule exists;
/// on refutation, if `witness_json` is non-null it receives the violating
/// count pair and violation time as a JSON string (free with
/// [`le_string_free`]).
///
/// # Safety
///
/// `constants` must be null or a live handle from a `le_constants_*`
/// constructor; `witness_json` must be null or point to writable storage
/// for one `char *`.
#[no_mangle]
pub unsafe extern "C" fn le_verify_drift(
    constants: *const LeConstants,
    max_activations: u32,
    lower: i64,
    upper: i64,
    witness_json: *mut *mut c_char,
) -> LeStatus {
    let Some(tc) = constants_ref(constants) else {
        return fail(LeStatus::LeNullPointer, "constants handle is null");
    };
    let spec = DriftSpec {
        constants: tc.clone(),
        max_activations,
        lower,
        upper,
        start_convention: StartConvention::ModelT,
    };
    match verify_p3(&spec) {
        Ok(DriftVerdict::Proved) => LeStatus::LeOk,
        Ok(DriftVerdict::Refuted(w)) => {
            if !witness_json.is_null() {
                let json = serde_json::json!({
                    "count_i": w.k_i,
                    "count_j": w.k_j,
                    "violation_time_ms": w.violation_time.to_string(),
                })
                .to_string();
                let c = CString::new(json).expect("no interior nul in JSON");
                unsafe { *witness_json = c.into_raw() };
            }
            LeStatus::LeRefuted
        }
        Err(e) => fail(solver_status(&e), e.to_string()),
    }
}

/// Checks the read-window property: between activations `k` and
/// `k + reads_every` of any node, every other node fires at least once.
///
/// # Safety
///
/// `constants` must be null or a live handle from a `le_constants_*`
/// constructor.
#[no_mangle]
pub unsafe extern "C" fn le_verify_read_window(
    constants: *const LeConstants,
    reads_every: u32,
    probe_depth: u32,
) -> LeStatus {
    let Some(tc) = constants_ref(constants) else {
        return fail(LeStatus::LeNullPointer, "constants handle is null");
    };
    match verify_read_window(tc, reads_every, probe_depth) {
        Ok(DriftVerdict::Proved) => LeStatus::LeOk,
        Ok(DriftVerdict::Refuted(_)) => LeStatus::LeRefuted,
        Err(e) => fail(solver_status(&e), e.to_string()),
    }
}

/// Guarantee selector for [`le_prove_guarantee`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeGuarantee {
    /// The maximum-ID node reaches and keeps the leader state.
    LeGuaranteeMaxBecomesLeader = 0,
    /// Non-maximum nodes end up followers.
    LeGuaranteeOthersFollow = 1,
    /// The maximum-ID node never leaves the promotion chain.
    LeGuaranteeMaxNeverDemoted = 2,
}

/// Assumption bitmask for [`le_prove_guarantee`].
pub const LE_ASSUME_CLEAN_ROUND: u32 = 1;
pub const LE_ASSUME_OTHERS_FOLLOW: u32 = 2;
pub const LE_ASSUME_MAX_LEADS: u32 = 4;
pub const LE_ASSUME_DRIFT_WINDOW: u32 = 8;

/// Proves one guarantee of the node-class abstraction under the assumption
/// set encoded in `assumption_mask` (`LE_ASSUME_*` bits), for networks of
/// `nodes` nodes explored `depth` activations deep. Writes the number of
/// abstract states explored through `states_explored` when proved.
///
/// # Safety
///
/// `states_explored` must be null or point to writable storage for one
/// `uint64_t`.
#[no_mangle]
pub unsafe extern "C" fn le_prove_guarantee(
    guarantee: LeGuarantee,
    assumption_mask: u32,
    nodes: u32,
    depth: u32,
    states_explored: *mut u64,
) -> LeStatus {
    if assumption_mask > 15 {
        return fail(LeStatus::LeInvalidArgument, "unknown assumption bit");
    }
    let g = match guarantee {
        LeGuarantee::LeGuaranteeMaxBecomesLeader => Guarantee::P1,
        LeGuarantee::LeGuaranteeOthersFollow => Guarantee::P2,
        LeGuarantee::LeGuaranteeMaxNeverDemoted => Guarantee::P4,
    };
    let mut assumptions = Vec::new();
    for (bit, a) in [
        (LE_ASSUME_CLEAN_ROUND, Assumption::CleanRoundMailbox),
        (LE_ASSUME_OTHERS_FOLLOW, Assumption::P2),
        (LE_ASSUME_MAX_LEADS, Assumption::P1),
        (LE_ASSUME_DRIFT_WINDOW, Assumption::P3),
    ] {
        if assumption_mask & bit != 0 {
            assumptions.push(a);
        }
    }
    let verdict = prove_guarantee(g, &assumptions, nodes, depth);
    match verdict {
        leadelect::abstraction::AbstractVerdict::Proved { states_explored: n } => {
            if !states_explored.is_null() {
                unsafe { *states_explored = n as u64 };
            }
            LeStatus::LeOk
        }
        leadelect::abstraction::AbstractVerdict::Refuted { .. } => LeStatus::LeRefuted,
    }
}

/// Runs the simulator on a JSON network configuration and writes the event
/// trace as TSV to `trace_path`. The configuration schema matches the CLI's
/// `simulate --config` input.
///
/// # Safety
///
/// `config_json` and `trace_path` must be null or NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn le_simulate_to_file(
    config_json: *const c_char,
    trace_path: *const c_char,
) -> LeStatus {
    if config_json.is_null() || trace_path.is_null() {
        return fail(LeStatus::LeNullPointer, "config or path is null");
    }
    let parse = |p: *const c_char| unsafe { CStr::from_ptr(p) }.to_str();
    let (Ok(config), Ok(path)) = (parse(config_json), parse(trace_path)) else {
        return fail(LeStatus::LeInvalidArgument, "arguments must be UTF-8");
    };
    let cfg: SimConfig = match serde_json::from_str(config) {
        Ok(c) => c,
        Err(e) => return fail(LeStatus::LeInvalidArgument, format!("bad config: {e}")),
    };
    let trace = match simulate(&cfg) {
        Ok(t) => t,
        Err(e) => return fail(LeStatus::LeInvalidArgument, e.to_string()),
    };
    let file = match File::create(path) {
        Ok(f) => f,
        Err(e) => return fail(LeStatus::LeIoError, e.to_string()),
    };
    match trace.write_tsv(BufWriter::new(file)) {
        Ok(()) => LeStatus::LeOk,
        Err(e) => fail(LeStatus::LeIoError, e.to_string()),
    }
}

/// Frees a string returned through an out-parameter of this library.
///
/// # Safety
///
/// `s` must be null or a string handed out by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn le_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(le_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_handles_are_rejected() {
        assert_eq!(
            unsafe { le_verify_read_window(std::ptr::null(), 2, 13) },
            LeStatus::LeNullPointer
        );
        assert!(!le_last_error().is_null());
    }
}
