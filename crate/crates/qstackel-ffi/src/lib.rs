//! C interface to the qstackel engine.
//!
//! Systems are opaque handles created by `qs_system_solve` or
//! `qs_system_from_json` and released with `qs_system_free`. Every fallible call returns a
//! [`QsStatus`]; the message of the most recent failure on the calling thread
//! is available from [`qs_last_error_message`]. Strings returned through out
//! pointers are owned by the caller and must be released with
//! [`qs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qstackel::cli::{parse_value, solve_named};
use qstackel::frobenius::{certify, DeformedSystem, SystemFile};
use qstackel::multitime::{path_independence_flows, CompiledFlows};
use qstackel::painleve::{specialize, Target};
use qstackel::stackelgen::{ordinary_bounds, SystemSpec};
use qstackel::{Error, PhasePoint};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Parse = 4,
    CertificationFailed = 5,
    BlowUp = 6,
    Unsupported = 7,
    Internal = 8,
}

/// Family selector for [`qs_system_solve`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QsFamily {
    Geodesic = 0,
    Ordinary = 1,
    Magnetic = 2,
}

/// Opaque deformed system.
pub struct QsSystem {
    inner: DeformedSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QsStatus {
    match e {
        Error::Parse(_) => QsStatus::Parse,
        Error::Certification(_) => QsStatus::CertificationFailed,
        Error::BlowUp(_) | Error::DivisionByZero(_) => QsStatus::BlowUp,
        Error::Unsupported(_) => QsStatus::Unsupported,
        _ => QsStatus::InvalidConfig,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (QsStatus, String)>) -> QsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QsStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            QsStatus::Internal
        }
    }
}

fn lib(e: Error) -> (QsStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QsStatus, String)> {
    if p.is_null() {
        return Err((QsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (QsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn nonnull<T>(p: *const T, what: &str) -> Result<(), (QsStatus, String)> {
    if p.is_null() {
        Err((QsStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), (QsStatus, String)> {
    let c = CString::new(s).map_err(|_| (QsStatus::Internal, "string contains NUL".to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn qs_status_string(status: QsStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        QsStatus::Ok => b"ok\0",
        QsStatus::NullPointer => b"null pointer\0",
        QsStatus::InvalidUtf8 => b"invalid UTF-8\0",
        QsStatus::InvalidConfig => b"invalid configuration\0",
        QsStatus::Parse => b"parse error\0",
        QsStatus::CertificationFailed => b"certification failed\0",
        QsStatus::BlowUp => b"numerical blow-up\0",
        QsStatus::Unsupported => b"unsupported\0",
        QsStatus::Internal => b"internal error\0",
    };
    s.as_ptr() as *const c_char
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Solve the deformation of a family over its full exponent range.
/// `gauge` may be null (zero tails), `"solve"`, or a preset name.
///
/// # Safety
/// `gauge` must be null or a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_system_solve(
    n: usize,
    m: usize,
    family: QsFamily,
    gauge: *const c_char,
    out: *mut *mut QsSystem,
) -> QsStatus {
    guard(|| {
        nonnull(out, "out")?;
        let gauge = if gauge.is_null() { "zero" } else { read_str(gauge, "gauge")? };
        let spec = match family {
            QsFamily::Geodesic => SystemSpec::geodesic(n, m),
            QsFamily::Ordinary => {
                let (lo, hi) = ordinary_bounds(n, m);
                SystemSpec::ordinary_range(n, m, lo, hi)
            }
            QsFamily::Magnetic => SystemSpec::magnetic(n, m, n as i64 + 1),
        };
        spec.validate().map_err(lib)?;
        let sys = solve_named(&spec, None, gauge, &Default::default()).map_err(lib)?;
        *out = Box::into_raw(Box::new(QsSystem { inner: sys }));
        Ok(())
    })
}

/// Load a system from its JSON file format.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_system_from_json(json: *const c_char, out: *mut *mut QsSystem) -> QsStatus {
    guard(|| {
        nonnull(out, "out")?;
        let text = read_str(json, "json")?;
        let f: SystemFile = serde_json::from_str(text).map_err(|e| (QsStatus::Parse, e.to_string()))?;
        let sys = DeformedSystem::from_file(&f).map_err(lib)?;
        *out = Box::into_raw(Box::new(QsSystem { inner: sys }));
        Ok(())
    })
}

/// Serialize a system; release the result with [`qs_string_free`].
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_system_to_json(sys: *const QsSystem, out: *mut *mut c_char) -> QsStatus {
    guard(|| {
        nonnull(sys, "system")?;
        nonnull(out, "out")?;
        let s = serde_json::to_string_pretty(&(*sys).inner.to_file()).map_err(|e| (QsStatus::Internal, e.to_string()))?;
        give_string(s, out)
    })
}

/// Dimension `n` of a system, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qs_system_dimension(sys: *const QsSystem) -> usize {
    if sys.is_null() {
        0
    } else {
        (*sys).inner.spec.n
    }
}

/// Substitute an exact value (rational or expression) for a parameter.
///
/// # Safety
/// `sys` must be a live handle; `name` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qs_system_bind(sys: *mut QsSystem, name: *const c_char, value: *const c_char) -> QsStatus {
    guard(|| {
        nonnull(sys, "system")?;
        let name = qstackel::cli::normalize_param(read_str(name, "name")?);
        let v = parse_value(read_str(value, "value")?).map_err(lib)?;
        let map = [(name, v)].into_iter().collect();
        let s = &mut *sys;
        s.inner = s.inner.subst_params(&map);
        Ok(())
    })
}

/// Certify the Frobenius condition. `passes` reports closability by tails,
/// `exact_zero` that every residual vanishes identically. Either may be null.
///
/// # Safety
/// `sys` must be a live handle; non-null out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_system_certify(sys: *const QsSystem, passes: *mut bool, exact_zero: *mut bool) -> QsStatus {
    guard(|| {
        nonnull(sys, "system")?;
        let rep = certify(&(*sys).inner);
        if !passes.is_null() {
            *passes = rep.passes();
        }
        if !exact_zero.is_null() {
            *exact_zero = rep.exact_zero();
        }
        if let Some(p) = rep.first_failure() {
            set_error(&format!("pair ({}, {}) has residual {}", p.r, p.s, p.residual));
        }
        Ok(())
    })
}

/// Largest endpoint distance over all axis orderings of the box
/// `[lo_r, hi_r]`, starting from `(q, p)` at the corner `lo`. All parameters
/// must be bound. Arrays have length `n`.
///
/// # Safety
/// `sys` must be a live handle; the arrays must hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qs_path_independence(
    sys: *const QsSystem,
    q: *const f64,
    p: *const f64,
    lo: *const f64,
    hi: *const f64,
    h: f64,
    out: *mut f64,
) -> QsStatus {
    guard(|| {
        nonnull(sys, "system")?;
        for (x, w) in [(q, "q"), (p, "p"), (lo, "lo"), (hi, "hi")] {
            nonnull(x, w)?;
        }
        nonnull(out, "out")?;
        let sys = &(*sys).inner;
        let n = sys.spec.n;
        let sl = |x: *const f64| std::slice::from_raw_parts(x, n).to_vec();
        let (lo, hi) = (sl(lo), sl(hi));
        let fl = CompiledFlows::from_system(sys, &|_| None).map_err(lib)?;
        let bx: Vec<(f64, f64)> = lo.iter().copied().zip(hi.iter().copied()).collect();
        let start = PhasePoint::new(sl(q), sl(p), lo);
        let rep = path_independence_flows(&fl, &start, &bx, h).map_err(lib)?;
        *out = rep.discrepancy;
        Ok(())
    })
}

/// Derive a Painlevé normal form ("PI".."PIV"). `text` receives the final
/// equation (free with [`qs_string_free`]); `matches` whether it equals the
/// canonical form exactly.
///
/// # Safety
/// `target` must be NUL-terminated; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qs_painleve(target: *const c_char, text: *mut *mut c_char, matches: *mut bool) -> QsStatus {
    guard(|| {
        nonnull(text, "text")?;
        nonnull(matches, "matches")?;
        let t: Target = read_str(target, "target")?.parse().map_err(lib)?;
        let sp = specialize(t).map_err(lib)?;
        *matches = sp.matches;
        give_string(sp.result.to_text(), text)
    })
}

/// Release a system handle. Null is ignored.
///
/// # Safety
/// `sys` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qs_system_free(sys: *mut QsSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}
