//! C ABI over `twotime-core`.
//!
//! Models live behind an opaque `TwotimeModel` handle created from a JSON
//! configuration and released with `twotime_model_free`. Every function
//! returns a `TwotimeStatus`; on failure a description is available from
//! `twotime_last_error_message` on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use twotime_core::{sample_trajectory, Direction, Error, ModelConfig, TwoTimeEngine, TwoTimeModel};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwotimeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    InvalidInput = 5,
    ZeroWeight = 6,
    Capacity = 7,
    Numerical = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Analysis direction for `twotime_born_analysis`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwotimeDirection {
    Forward = 0,
    Backward = 1,
}

/// Scalar part of a Born analysis; the distributions are written to
/// caller-provided arrays.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TwotimeBornSummary {
    pub deviation: f64,
    pub shielding_residual: f64,
    pub reachable_shielding_residual: f64,
    pub denominator: f64,
}

/// Opaque model handle.
pub struct TwotimeModel {
    model: TwoTimeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> TwotimeStatus {
    match e {
        Error::Parse { .. } | Error::Io(_) => TwotimeStatus::Parse,
        Error::Validation { .. } | Error::ModelValidity(_) => TwotimeStatus::Validation,
        Error::Shape(_) | Error::InvalidInput(_) => TwotimeStatus::InvalidInput,
        Error::ZeroWeight { .. } | Error::IncompatibleBoundary { .. } => TwotimeStatus::ZeroWeight,
        Error::Capacity { .. } => TwotimeStatus::Capacity,
        Error::Numerical(_) => TwotimeStatus::Numerical,
    }
}

struct Failure(TwotimeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TwotimeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwotimeStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TwotimeStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TwotimeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn model_ref<'a>(model: *const TwotimeModel) -> Result<&'a TwoTimeModel, Failure> {
    model.as_ref().map(|m| &m.model).ok_or_else(|| null("model"))
}

unsafe fn outcomes<'a>(ptr: *const usize, len: usize) -> Result<&'a [usize], Failure> {
    if len == 0 {
        Ok(&[])
    } else if ptr.is_null() {
        Err(null("outcome array"))
    } else {
        Ok(slice::from_raw_parts(ptr, len))
    }
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn twotime_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds and validates a model from a NUL-terminated JSON configuration.
///
/// # Safety
/// `json` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn twotime_model_from_json(json: *const c_char, out: *mut *mut TwotimeModel) -> TwotimeStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("output handle"));
        }
        out.write(ptr::null_mut());
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(TwotimeStatus::InvalidUtf8, e.to_string()))?;
        let model = ModelConfig::from_json(text)?.build()?;
        out.write(Box::into_raw(Box::new(TwotimeModel { model })));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from `twotime_model_from_json` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn twotime_model_free(model: *mut TwotimeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hilbert-space dimension, number of outcomes per event and number of
/// interior events.
///
/// # Safety
/// `model` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn twotime_model_shape(
    model: *const TwotimeModel,
    dim: *mut usize,
    outcome_count: *mut usize,
    event_count: *mut usize,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        write(dim, m.dim())?;
        write(outcome_count, m.outcome_count())?;
        write(event_count, m.interior_count())
    })
}

/// Unnormalized weight `tr[rho_F pi_n]` of a record.
///
/// # Safety
/// `outcomes` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn twotime_joint_record_weight(
    model: *const TwotimeModel,
    outcomes_ptr: *const usize,
    len: usize,
    out: *mut f64,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let rec = m.record(outcomes(outcomes_ptr, len)?.to_vec())?;
        write(out, twotime_core::joint_record_weight(m, &rec)?)
    })
}

/// Probability of a record conditioned on both boundaries.
///
/// # Safety
/// As for `twotime_joint_record_weight`.
#[no_mangle]
pub unsafe extern "C" fn twotime_record_probability(
    model: *const TwotimeModel,
    outcomes_ptr: *const usize,
    len: usize,
    out: *mut f64,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let rec = m.record(outcomes(outcomes_ptr, len)?.to_vec())?;
        write(out, TwoTimeEngine::new(m).record_probability(&rec)?)
    })
}

/// Difference between the forward and time-reversed weights of a record.
///
/// # Safety
/// As for `twotime_joint_record_weight`.
#[no_mangle]
pub unsafe extern "C" fn twotime_time_symmetry_residual(
    model: *const TwotimeModel,
    outcomes_ptr: *const usize,
    len: usize,
    out: *mut f64,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let rec = m.record(outcomes(outcomes_ptr, len)?.to_vec())?;
        write(out, TwoTimeEngine::new(m).time_symmetry_residual(&rec)?)
    })
}

/// Samples one forward trajectory. `outcomes_out` receives one index per
/// interior event and must hold at least that many.
///
/// # Safety
/// `outcomes_out` must point to `capacity` writable values; `weight` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn twotime_sample_trajectory(
    model: *const TwotimeModel,
    seed: u64,
    outcomes_out: *mut usize,
    capacity: usize,
    weight: *mut f64,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let n = m.interior_count();
        if capacity < n {
            return Err(Failure(
                TwotimeStatus::BufferTooSmall,
                format!("need room for {n} outcomes, got {capacity}"),
            ));
        }
        if n > 0 && outcomes_out.is_null() {
            return Err(null("outcome buffer"));
        }
        let t = sample_trajectory(m, seed)?;
        if n > 0 {
            slice::from_raw_parts_mut(outcomes_out, n).copy_from_slice(t.record.outcomes());
        }
        write(weight, t.weight)
    })
}

/// Conditional distribution of event `j` (1-based in the analysis
/// direction) against the Born rule. A null `prefix` selects the most
/// probable conditioning prefix; otherwise it must hold `j - 1` outcomes.
/// `conditional` and `born` receive one entry per outcome and must hold at
/// least that many.
///
/// # Safety
/// Array pointers must be valid for the stated lengths; `summary` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn twotime_born_analysis(
    model: *const TwotimeModel,
    j: usize,
    direction: TwotimeDirection,
    prefix: *const usize,
    prefix_len: usize,
    conditional: *mut f64,
    born: *mut f64,
    capacity: usize,
    summary: *mut TwotimeBornSummary,
) -> TwotimeStatus {
    guard(|| {
        let m = model_ref(model)?;
        let k = m.outcome_count();
        if capacity < k {
            return Err(Failure(
                TwotimeStatus::BufferTooSmall,
                format!("need room for {k} outcomes, got {capacity}"),
            ));
        }
        if conditional.is_null() || born.is_null() {
            return Err(null("distribution buffer"));
        }
        let direction = match direction {
            TwotimeDirection::Forward => Direction::Forward,
            TwotimeDirection::Backward => Direction::Backward,
        };
        let prefix = if prefix.is_null() {
            None
        } else {
            Some(slice::from_raw_parts(prefix, prefix_len))
        };
        let a = TwoTimeEngine::new(m).born_analysis(j, direction, prefix)?;
        slice::from_raw_parts_mut(conditional, k).copy_from_slice(&a.conditional);
        slice::from_raw_parts_mut(born, k).copy_from_slice(&a.born);
        write(
            summary,
            TwotimeBornSummary {
                deviation: a.deviation,
                shielding_residual: a.shielding_residual,
                reachable_shielding_residual: a.reachable_shielding_residual,
                denominator: a.denominator,
            },
        )
    })
}
