//! C ABI over the `predual` library.
//!
//! States are opaque handles created by `predual_state_build` or
//! `predual_state_load` and released with `predual_state_free`. Every call
//! returns a `PredualStatus`; on failure `predual_last_error` describes the
//! problem. Strings handed out by the library are NUL-terminated UTF-8 and
//! must be released with `predual_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use predual::normingset::ConstructionState;
use predual::norms::{self, Vector};
use predual::{rational, Error};

/// Opaque construction state.
pub struct PredualState {
    inner: ConstructionState,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredualStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    MalformedDocument = 4,
    NotBuilt = 5,
    EpsilonNotReached = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("NULs removed"));
}

fn status_of(e: &Error) -> PredualStatus {
    match e {
        Error::MalformedDocument(_) | Error::SchemaVersion(_) => PredualStatus::MalformedDocument,
        Error::LevelNotBuilt { .. } | Error::CoordinateNotBuilt(_) | Error::UnknownFunctional { .. } => {
            PredualStatus::NotBuilt
        }
        Error::EpsilonNotReached { .. } => PredualStatus::EpsilonNotReached,
        _ => PredualStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PredualStatus, String)>) -> PredualStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PredualStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PredualStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PredualStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PredualStatus, String) {
    (PredualStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PredualStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PredualStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn hand_out(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

/// Message for the most recent failed call on this thread (empty after a
/// success). Owned by the library; valid until the next call.
#[no_mangle]
pub extern "C" fn predual_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds up to `levels` levels with parameter `b` (e.g. `"1/5"`), stopping
/// before any coordinate exceeds `max_coord` (0 means no cap).
///
/// # Safety
/// `b` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn predual_state_build(
    b: *const c_char,
    levels: usize,
    max_coord: u64,
    out: *mut *mut PredualState,
) -> PredualStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let b = rational::parse(text(b, "b")?).map_err(lib)?;
        let cap = (max_coord > 0).then_some(max_coord);
        let inner = ConstructionState::build(b, levels, cap).map_err(lib)?;
        *out = Box::into_raw(Box::new(PredualState { inner }));
        Ok(())
    })
}

/// Loads a state document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn predual_state_load(json: *const c_char, out: *mut *mut PredualState) -> PredualStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ConstructionState::load_state(text(json, "json")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(PredualState { inner }));
        Ok(())
    })
}

/// Serializes the state document into a new string.
///
/// # Safety
/// `state` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn predual_state_save(state: *const PredualState, out: *mut *mut c_char) -> PredualStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = hand_out(s.inner.save_state());
        Ok(())
    })
}

/// Releases a state. Null is ignored.
///
/// # Safety
/// `state` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn predual_state_free(state: *mut PredualState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of built levels.
///
/// # Safety
/// `state` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn predual_state_level_count(state: *const PredualState, out: *mut usize) -> PredualStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.inner.level_count();
        Ok(())
    })
}

/// Coordinate interval `[lo, hi]` of level `level` (1-based).
///
/// # Safety
/// `state` must come from this library; `lo` and `hi` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn predual_state_interval(
    state: *const PredualState,
    level: usize,
    lo: *mut u64,
    hi: *mut u64,
) -> PredualStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if lo.is_null() || hi.is_null() {
            return Err(null("lo/hi"));
        }
        let l = s.inner.level(level).map_err(lib)?;
        *lo = l.lo;
        *hi = l.hi;
        Ok(())
    })
}

/// Runs the construction property checks. `passed` receives the verdict and
/// `report` (if non-null) a JSON report.
///
/// # Safety
/// `state` must come from this library; `passed` must be valid; `report`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn predual_state_verify(
    state: *const PredualState,
    passed: *mut bool,
    report: *mut *mut c_char,
) -> PredualStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        let r = s.inner.verify_properties();
        *passed = r.all_passed();
        if !report.is_null() {
            *report = hand_out(serde_json::to_string(&r).expect("report serializes"));
        }
        Ok(())
    })
}

/// Certified norm bracket of a sparse vector such as `"1:1,2:-1/2"`,
/// returned as JSON with `lower`, `upper` and the witness. Fails with
/// `EpsilonNotReached` when the width stays above `eps` up to depth
/// `depth_limit`.
///
/// # Safety
/// `state` must come from this library; `vector` and `eps` must be
/// NUL-terminated strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn predual_norm_bracket(
    state: *const PredualState,
    vector: *const c_char,
    eps: *const c_char,
    depth_limit: u32,
    out: *mut *mut c_char,
) -> PredualStatus {
    guard(|| {
        let s = state.as_ref().ok_or_else(|| null("state"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x: Vector = text(vector, "vector")?.parse().map_err(lib)?;
        let eps = rational::parse(text(eps, "eps")?).map_err(lib)?;
        let br = norms::norm_bracket(&s.inner, &x, &eps, depth_limit).map_err(lib)?;
        *out = hand_out(serde_json::to_string(&br).expect("bracket serializes"));
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or come from this library, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn predual_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn predual_status_message(status: PredualStatus) -> *const c_char {
    let s: &'static CStr = match status {
        PredualStatus::Ok => c"ok",
        PredualStatus::NullPointer => c"null pointer argument",
        PredualStatus::InvalidUtf8 => c"argument is not valid UTF-8",
        PredualStatus::InvalidArgument => c"invalid argument",
        PredualStatus::MalformedDocument => c"malformed state document",
        PredualStatus::NotBuilt => c"level or coordinate not built",
        PredualStatus::EpsilonNotReached => c"bracket did not reach the requested width",
        PredualStatus::Panic => c"internal error",
    };
    s.as_ptr()
}
