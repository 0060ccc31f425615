//! C ABI for the nonsmooth-optimization laboratory.
//!
//! Objectives and traces cross the boundary as opaque handles created and
//! destroyed by this library; every fallible call returns an `SglStatus`
//! code and writes results through out-pointers. Points are plain `double`
//! arrays whose length must match the objective's dimension. The header
//! `include/subgradlab.h` is generated by cbindgen at build time.
//!
//! Thread safety: handles are immutable after creation and may be shared
//! across threads; creation and destruction of a given handle must not race.

use std::ffi::{c_char, CStr};

use subgradlab::error::Error;
use subgradlab::methods::{run_subgradient, IterateTrace, MethodParams};
use subgradlab::oracles::{catalog_get, ObjectiveSpec, SubgradientSelection};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SglStatus {
    /// Success.
    SglOk = 0,
    /// A required pointer argument was null.
    SglNullArgument = 1,
    /// A string argument was not valid UTF-8.
    SglInvalidUtf8 = 2,
    /// The objective id is not in the catalog.
    SglUnknownObjective = 3,
    /// A point length does not match the objective's dimension.
    SglDimensionMismatch = 4,
    /// A parameter or point precondition was violated (including non-finite
    /// entries).
    SglPrecondition = 5,
    /// The iterates diverged; no trace is returned.
    SglDivergence = 6,
    /// The objective lacks the oracle this operation needs.
    SglUnsupportedOracle = 7,
    /// An index was out of range.
    SglIndexOutOfRange = 8,
    /// Any other internal error.
    SglInternal = 9,
}

fn status_of(e: &Error) -> SglStatus {
    match e {
        Error::UnknownObjective { .. } => SglStatus::SglUnknownObjective,
        Error::DimensionMismatch { .. } => SglStatus::SglDimensionMismatch,
        Error::NonFinitePoint | Error::Precondition(_) => SglStatus::SglPrecondition,
        Error::Divergence { .. } => SglStatus::SglDivergence,
        Error::UnsupportedOracle { .. } | Error::OutOfNeighborhood { .. } => {
            SglStatus::SglUnsupportedOracle
        }
        _ => SglStatus::SglInternal,
    }
}

/// Opaque objective handle.
pub struct SglObjective(ObjectiveSpec);

/// Opaque iterate-trace handle.
pub struct SglTrace(IterateTrace);

/// Static, NUL-terminated name of a status code. Never null.
#[no_mangle]
pub extern "C" fn sgl_status_name(status: SglStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        SglStatus::SglOk => b"ok\0",
        SglStatus::SglNullArgument => b"null_argument\0",
        SglStatus::SglInvalidUtf8 => b"invalid_utf8\0",
        SglStatus::SglUnknownObjective => b"unknown_objective\0",
        SglStatus::SglDimensionMismatch => b"dimension_mismatch\0",
        SglStatus::SglPrecondition => b"precondition\0",
        SglStatus::SglDivergence => b"divergence\0",
        SglStatus::SglUnsupportedOracle => b"unsupported_oracle\0",
        SglStatus::SglIndexOutOfRange => b"index_out_of_range\0",
        SglStatus::SglInternal => b"internal\0",
    };
    name.as_ptr() as *const c_char
}

/// Creates an objective by catalog id (e.g. "abs1d", "global_l1") and
/// stores the handle in `*out`.
///
/// # Safety
/// `id` must point to a NUL-terminated string and `out` to writable storage
/// for one pointer. On any non-ok status `*out` is set to null.
#[no_mangle]
pub unsafe extern "C" fn sgl_objective_new(
    id: *const c_char,
    out: *mut *mut SglObjective,
) -> SglStatus {
    if out.is_null() {
        return SglStatus::SglNullArgument;
    }
    unsafe { *out = std::ptr::null_mut() };
    if id.is_null() {
        return SglStatus::SglNullArgument;
    }
    let id = match unsafe { CStr::from_ptr(id) }.to_str() {
        Ok(s) => s,
        Err(_) => return SglStatus::SglInvalidUtf8,
    };
    match catalog_get(id) {
        Ok(spec) => {
            unsafe { *out = Box::into_raw(Box::new(SglObjective(spec))) };
            SglStatus::SglOk
        }
        Err(e) => status_of(&e),
    }
}

/// Releases an objective handle. A null handle is a no-op.
///
/// # Safety
/// `obj` must be null or a pointer from [`sgl_objective_new`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn sgl_objective_free(obj: *mut SglObjective) {
    if !obj.is_null() {
        drop(unsafe { Box::from_raw(obj) });
    }
}

/// Writes the objective's ambient dimension to `*out_dim`. Entries whose
/// dimension is set by the query point (quad) report 0.
///
/// # Safety
/// `obj` must be a live objective handle and `out_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_objective_dim(
    obj: *const SglObjective,
    out_dim: *mut usize,
) -> SglStatus {
    if obj.is_null() || out_dim.is_null() {
        return SglStatus::SglNullArgument;
    }
    let spec = unsafe { &(*obj).0 };
    unsafe { *out_dim = spec.dim().unwrap_or(0) };
    SglStatus::SglOk
}

unsafe fn checked_point<'a>(
    spec: &ObjectiveSpec,
    x: *const f64,
    len: usize,
) -> Result<&'a [f64], SglStatus> {
    if x.is_null() {
        return Err(SglStatus::SglNullArgument);
    }
    let x = unsafe { std::slice::from_raw_parts(x, len) };
    match spec.validate_point(x) {
        Ok(()) => Ok(x),
        Err(e) => Err(status_of(&e)),
    }
}

/// Evaluates f(x) into `*out_f`.
///
/// # Safety
/// `obj` must be a live handle, `x` must point to `len` doubles, and
/// `out_f` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_objective_value(
    obj: *const SglObjective,
    x: *const f64,
    len: usize,
    out_f: *mut f64,
) -> SglStatus {
    if obj.is_null() || out_f.is_null() {
        return SglStatus::SglNullArgument;
    }
    let spec = unsafe { &(*obj).0 };
    let x = match unsafe { checked_point(spec, x, len) } {
        Ok(x) => x,
        Err(s) => return s,
    };
    unsafe { *out_f = spec.value(x) };
    SglStatus::SglOk
}

/// Writes the minimum-norm Clarke subgradient at `x` into `out_s` (`len`
/// doubles) and its norm d(0, ∂f(x)) into `*out_norm`.
///
/// # Safety
/// `obj` must be a live handle; `x` and `out_s` must each point to `len`
/// doubles; `out_norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_min_norm_subgradient(
    obj: *const SglObjective,
    x: *const f64,
    len: usize,
    out_s: *mut f64,
    out_norm: *mut f64,
) -> SglStatus {
    if obj.is_null() || out_s.is_null() || out_norm.is_null() {
        return SglStatus::SglNullArgument;
    }
    let spec = unsafe { &(*obj).0 };
    let x = match unsafe { checked_point(spec, x, len) } {
        Ok(x) => x,
        Err(s) => return s,
    };
    match spec.min_norm_subgradient(x) {
        Ok((s, n)) => {
            unsafe {
                std::ptr::copy_nonoverlapping(s.as_ptr(), out_s, len);
                *out_norm = n;
            }
            SglStatus::SglOk
        }
        Err(e) => status_of(&e),
    }
}

/// Runs the constant-step subgradient method for `k_steps` iterations from
/// `x0` and stores a trace handle in `*out`. `seed` feeds the seeded-random
/// tie-breaking rule; the default min-norm selection ignores it.
///
/// # Safety
/// `obj` must be a live handle, `x0` must point to `len` doubles, and `out`
/// to writable storage for one pointer. On any non-ok status (including
/// divergence) `*out` is set to null.
#[no_mangle]
pub unsafe extern "C" fn sgl_run_subgradient(
    obj: *const SglObjective,
    x0: *const f64,
    len: usize,
    alpha: f64,
    seed: u64,
    k_steps: usize,
    out: *mut *mut SglTrace,
) -> SglStatus {
    if out.is_null() {
        return SglStatus::SglNullArgument;
    }
    unsafe { *out = std::ptr::null_mut() };
    if obj.is_null() {
        return SglStatus::SglNullArgument;
    }
    let spec = unsafe { &(*obj).0 };
    let x0 = match unsafe { checked_point(spec, x0, len) } {
        Ok(x) => x,
        Err(s) => return s,
    };
    let mut params = MethodParams::new(alpha);
    params.seed = seed;
    params.selection = SubgradientSelection::default();
    match run_subgradient(spec, x0, params, k_steps) {
        Ok(trace) => {
            unsafe { *out = Box::into_raw(Box::new(SglTrace(trace))) };
            SglStatus::SglOk
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a trace handle. A null handle is a no-op.
///
/// # Safety
/// `trace` must be null or a pointer from [`sgl_run_subgradient`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn sgl_trace_free(trace: *mut SglTrace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Writes the number of stored iterates (k_steps + 1) to `*out_len` and the
/// iterate dimension to `*out_dim`.
///
/// # Safety
/// `trace` must be a live trace handle; both out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_trace_shape(
    trace: *const SglTrace,
    out_len: *mut usize,
    out_dim: *mut usize,
) -> SglStatus {
    if trace.is_null() || out_len.is_null() || out_dim.is_null() {
        return SglStatus::SglNullArgument;
    }
    let t = unsafe { &(*trace).0 };
    unsafe {
        *out_len = t.points.len();
        *out_dim = t.points[0].len();
    }
    SglStatus::SglOk
}

/// Copies iterate `k` into `out_x` (`dim` doubles, as reported by
/// [`sgl_trace_shape`]) and f(x_k) into `*out_f`.
///
/// # Safety
/// `trace` must be a live trace handle, `out_x` must point to `dim`
/// doubles, and `out_f` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sgl_trace_iterate(
    trace: *const SglTrace,
    k: usize,
    out_x: *mut f64,
    out_f: *mut f64,
) -> SglStatus {
    if trace.is_null() || out_x.is_null() || out_f.is_null() {
        return SglStatus::SglNullArgument;
    }
    let t = unsafe { &(*trace).0 };
    if k >= t.points.len() {
        return SglStatus::SglIndexOutOfRange;
    }
    unsafe {
        std::ptr::copy_nonoverlapping(t.points[k].as_ptr(), out_x, t.points[k].len());
        *out_f = t.f_values[k];
    }
    SglStatus::SglOk
}
