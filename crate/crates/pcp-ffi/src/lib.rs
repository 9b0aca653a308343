//! C ABI for the cooperative market library: single-hour settlement,
//! effective-bid calculation, and an opaque forecaster handle.
//!
//! Conventions: every function returns a `PcpStatus`; outputs go through
//! caller-provided pointers; `pcp_last_error_message` retrieves a
//! human-readable description of the most recent failure on the calling
//! thread. Array arguments are read-only and never retained.

use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::{c_char, size_t};
use pcp_core::bidding::{effective_bids, BidSet};
use pcp_core::forecast::{self, FitWindow, ForecastState, SmoothingParams};
use pcp_core::settlement::{settle, HourOutcome, DEVIATION_TOL};
use pcp_core::PcpError;

/// Status codes returned by every FFI call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum PcpStatus {
    PcpOk = 0,
    /// Invalid argument or failed validation.
    PcpInvalidArgument = 1,
    /// Data problem: gaps, misalignment, or insufficient history.
    PcpDataError = 2,
    /// Null pointer where a value was required.
    PcpNullPointer = 3,
    /// Internal failure (including caught panics).
    PcpInternalError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &PcpError) -> PcpStatus {
    match err {
        PcpError::Validation(_)
        | PcpError::Parse { .. }
        | PcpError::Range(_)
        | PcpError::Domain(_) => PcpStatus::PcpInvalidArgument,
        PcpError::Gap { .. }
        | PcpError::Alignment(_)
        | PcpError::InsufficientHistory { .. }
        | PcpError::Io { .. } => PcpStatus::PcpDataError,
        PcpError::Internal(_) => PcpStatus::PcpInternalError,
    }
}

fn fail(err: PcpError) -> PcpStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guarded(f: impl FnOnce() -> PcpStatus) -> PcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic across FFI boundary");
            PcpStatus::PcpInternalError
        }
    }
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len` bytes). Returns the full message length in bytes,
/// excluding the terminator; 0 means no error has been recorded.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn pcp_last_error_message(buf: *mut c_char, len: size_t) -> size_t {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

unsafe fn slice_arg<'a>(ptr: *const f64, n: size_t) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, n))
    }
}

/// Settle one hour: disaggregate the cooperative's market payment across
/// consumers. Writes `n` payments to `payments_out` and, if non-null, the
/// market total to `total_out`.
///
/// # Safety
/// `effective` and `realtime` must point to `n` readable doubles,
/// `payments_out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pcp_settle(
    effective: *const f64,
    realtime: *const f64,
    n: size_t,
    p_d: f64,
    p_r: f64,
    payments_out: *mut f64,
    total_out: *mut f64,
) -> PcpStatus {
    let (Some(effective), Some(realtime)) = (slice_arg(effective, n), slice_arg(realtime, n))
    else {
        set_error("effective/realtime must not be null");
        return PcpStatus::PcpNullPointer;
    };
    if payments_out.is_null() {
        set_error("payments_out must not be null");
        return PcpStatus::PcpNullPointer;
    }
    let effective = effective.to_vec();
    let realtime = realtime.to_vec();
    guarded(|| {
        let outcome = match HourOutcome::new(effective, realtime, p_d, p_r) {
            Ok(o) => o,
            Err(e) => return fail(e),
        };
        match settle(&outcome, DEVIATION_TOL) {
            Ok(s) => {
                std::ptr::copy_nonoverlapping(s.individual.as_ptr(), payments_out, n);
                if !total_out.is_null() {
                    *total_out = s.total_payment;
                }
                PcpStatus::PcpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Blend announced loads with the cooperative forecast into effective bids.
/// Writes `n` bids to `bids_out` and, if non-null, the blend weight to
/// `alpha_out`.
///
/// # Safety
/// `announced` and `confidence` must point to `n` readable doubles,
/// `bids_out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pcp_effective_bids(
    announced: *const f64,
    confidence: *const f64,
    n: size_t,
    forecast: f64,
    bids_out: *mut f64,
    alpha_out: *mut f64,
) -> PcpStatus {
    let (Some(announced), Some(confidence)) = (slice_arg(announced, n), slice_arg(confidence, n))
    else {
        set_error("announced/confidence must not be null");
        return PcpStatus::PcpNullPointer;
    };
    if bids_out.is_null() {
        set_error("bids_out must not be null");
        return PcpStatus::PcpNullPointer;
    }
    let announced = announced.to_vec();
    let confidence = confidence.to_vec();
    guarded(|| {
        let bids = match BidSet::new(announced, confidence, forecast) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        let eff = effective_bids(&bids);
        std::ptr::copy_nonoverlapping(eff.individual.as_ptr(), bids_out, n);
        if !alpha_out.is_null() {
            *alpha_out = eff.alpha;
        }
        PcpStatus::PcpOk
    })
}

/// Opaque aggregate-load forecaster.
pub struct PcpForecaster {
    state: ForecastState,
}

/// Create a forecaster by fitting on an hourly history window.
/// `start_hour` is the absolute hour index of `history[0]` and anchors the
/// daily/weekly seasonal phases. The window needs at least 336 hours.
///
/// # Safety
/// `history` must point to `len` readable doubles; `out` must be a valid
/// pointer to receive the handle. Free the handle with
/// `pcp_forecaster_free`.
#[no_mangle]
pub unsafe extern "C" fn pcp_forecaster_new(
    history: *const f64,
    len: size_t,
    start_hour: u64,
    out: *mut *mut PcpForecaster,
) -> PcpStatus {
    let Some(history) = slice_arg(history, len) else {
        set_error("history must not be null");
        return PcpStatus::PcpNullPointer;
    };
    if out.is_null() {
        set_error("out must not be null");
        return PcpStatus::PcpNullPointer;
    }
    let history = history.to_vec();
    guarded(|| {
        let result = FitWindow::new(history, start_hour)
            .and_then(|w| forecast::refit_daily_from(&w, SmoothingParams::DEFAULT));
        match result {
            Ok(refit) => {
                *out = Box::into_raw(Box::new(PcpForecaster { state: refit.state }));
                PcpStatus::PcpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Consume one observed hour, advancing the forecaster.
///
/// # Safety
/// `handle` must be a live pointer from `pcp_forecaster_new`.
#[no_mangle]
pub unsafe extern "C" fn pcp_forecaster_update(
    handle: *mut PcpForecaster,
    observed: f64,
) -> PcpStatus {
    let Some(f) = handle.as_mut() else {
        set_error("handle must not be null");
        return PcpStatus::PcpNullPointer;
    };
    guarded(|| {
        f.state = forecast::update(&f.state, observed);
        PcpStatus::PcpOk
    })
}

/// Forecast `lead` hours ahead (1..=36) into `out`.
///
/// # Safety
/// `handle` must be a live pointer from `pcp_forecaster_new`; `out` must be
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pcp_forecaster_forecast(
    handle: *const PcpForecaster,
    lead: size_t,
    out: *mut f64,
) -> PcpStatus {
    let Some(f) = handle.as_ref() else {
        set_error("handle must not be null");
        return PcpStatus::PcpNullPointer;
    };
    if out.is_null() {
        set_error("out must not be null");
        return PcpStatus::PcpNullPointer;
    }
    guarded(|| match forecast::forecast(&f.state, lead) {
        Ok(v) => {
            *out = v;
            PcpStatus::PcpOk
        }
        Err(e) => fail(e),
    })
}

/// Re-optimize smoothing parameters on a trailing window (daily refit),
/// starting the search from the handle's current parameters.
///
/// # Safety
/// `handle` must be a live pointer from `pcp_forecaster_new`; `history`
/// must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pcp_forecaster_refit(
    handle: *mut PcpForecaster,
    history: *const f64,
    len: size_t,
    start_hour: u64,
) -> PcpStatus {
    let Some(f) = handle.as_mut() else {
        set_error("handle must not be null");
        return PcpStatus::PcpNullPointer;
    };
    let Some(history) = slice_arg(history, len) else {
        set_error("history must not be null");
        return PcpStatus::PcpNullPointer;
    };
    let history = history.to_vec();
    guarded(|| {
        let result = FitWindow::new(history, start_hour)
            .and_then(|w| forecast::refit_daily_from(&w, f.state.params()));
        match result {
            Ok(refit) => {
                f.state = refit.state;
                PcpStatus::PcpOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a forecaster handle. Null is a no-op.
///
/// # Safety
/// `handle` must be null or a pointer from `pcp_forecaster_new` that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn pcp_forecaster_free(handle: *mut PcpForecaster) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
