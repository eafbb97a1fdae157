//! C interface to the twisted Littlewood-Paley toolkit.
//!
//! Signals cross the boundary as opaque `TwlpSignal` handles. Every fallible call returns a
//! `TwlpStatus`; the message of the most recent failure on the calling thread is available from
//! `twlp_last_error`. Panics are caught and reported as `TWLP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use twlp_core::multiplier::{apply_multiplier, classify_region, flag_split, riesz_multiplier, tht_multiplier, PolyBump};
use twlp_core::signal_grid::{Grid2D, Signal2D};
use twlp_core::verify::{run_suite, VerifyConfig};
use twlp_core::TwlpError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwlpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    ShapeMismatch = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwlpMultiplier {
    Tht = 0,
    Riesz1 = 1,
    Riesz2 = 2,
    Flag1 = 3,
    Flag2 = 4,
    Flag3 = 5,
}

/// Opaque complex signal on a periodic grid.
pub struct TwlpSignal {
    inner: Signal2D,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &TwlpError) -> TwlpStatus {
    match e {
        TwlpError::InvalidGrid(_) | TwlpError::GridMismatch(_) => TwlpStatus::InvalidGrid,
        TwlpError::ShapeMismatch(_) => TwlpStatus::ShapeMismatch,
        TwlpError::Io(_) | TwlpError::Format(_) => TwlpStatus::Io,
        TwlpError::Singular(_) | TwlpError::Construction(_) | TwlpError::ProfileContract(_) => TwlpStatus::Numerical,
        TwlpError::InvalidArgument(_) | TwlpError::Precondition(_) | TwlpError::ScaleRange(_) => TwlpStatus::InvalidArgument,
    }
}

struct Fail(TwlpStatus, String);

impl From<TwlpError> for Fail {
    fn from(e: TwlpError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TwlpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording failures and panics in the thread's last-error slot.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TwlpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TwlpStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TwlpStatus::Panic
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn twlp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated, always NUL-terminated
/// when `cap > 0`) and returns the full message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn twlp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a real signal on an `n1 × n2` grid with spacing `h` from `len = n1·n2` row-major samples.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_new(
    n1: usize,
    n2: usize,
    h: f64,
    values: *const f64,
    len: usize,
    out: *mut *mut TwlpSignal,
) -> TwlpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if values.is_null() {
            return Err(null("values"));
        }
        let grid = Grid2D::new(n1, n2, h)?;
        if len != grid.len() {
            return Err(Fail(TwlpStatus::ShapeMismatch, format!("{len} samples for a {n1}x{n2} grid")));
        }
        let sig = Signal2D::from_real(grid, std::slice::from_raw_parts(values, len))?;
        *out = Box::into_raw(Box::new(TwlpSignal { inner: sig }));
        Ok(())
    })
}

/// Releases a handle (null is ignored).
///
/// # Safety
/// `sig` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_free(sig: *mut TwlpSignal) {
    if !sig.is_null() {
        drop(Box::from_raw(sig));
    }
}

/// # Safety
/// `sig` must be a live handle; `n1` and `n2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_shape(sig: *const TwlpSignal, n1: *mut usize, n2: *mut usize) -> TwlpStatus {
    guard(|| {
        let s = sig.as_ref().ok_or_else(|| null("sig"))?;
        if n1.is_null() || n2.is_null() {
            return Err(null("shape output"));
        }
        *n1 = s.inner.grid().n1();
        *n2 = s.inner.grid().n2();
        Ok(())
    })
}

unsafe fn copy_parts(sig: *const TwlpSignal, out: *mut f64, len: usize, part: fn(&num_complex::Complex64) -> f64) -> TwlpStatus {
    guard(|| {
        let s = sig.as_ref().ok_or_else(|| null("sig"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let v = s.inner.values();
        if len != v.len() {
            return Err(Fail(TwlpStatus::ShapeMismatch, format!("buffer of {len} for {} samples", v.len())));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, c) in dst.iter_mut().zip(v) {
            *d = part(c);
        }
        Ok(())
    })
}

/// Copies the real parts (row-major) into `out`, which must hold exactly `n1·n2` doubles.
///
/// # Safety
/// `sig` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_real(sig: *const TwlpSignal, out: *mut f64, len: usize) -> TwlpStatus {
    copy_parts(sig, out, len, |c| c.re)
}

/// Imaginary parts, as `twlp_signal_real`.
///
/// # Safety
/// As `twlp_signal_real`.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_imag(sig: *const TwlpSignal, out: *mut f64, len: usize) -> TwlpStatus {
    copy_parts(sig, out, len, |c| c.im)
}

/// Grid L² norm.
///
/// # Safety
/// `sig` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn twlp_signal_norm_l2(sig: *const TwlpSignal, out: *mut f64) -> TwlpStatus {
    guard(|| {
        let s = sig.as_ref().ok_or_else(|| null("sig"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.inner.norm_l2();
        Ok(())
    })
}

/// Applies a Fourier multiplier, returning a new handle in `out`.
///
/// # Safety
/// `sig` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn twlp_filter(sig: *const TwlpSignal, mult: TwlpMultiplier, out: *mut *mut TwlpSignal) -> TwlpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = sig.as_ref().ok_or_else(|| null("sig"))?;
        let g = s.inner.grid();
        let m = match mult {
            TwlpMultiplier::Tht => tht_multiplier(g),
            TwlpMultiplier::Riesz1 => riesz_multiplier(1, g)?,
            TwlpMultiplier::Riesz2 => riesz_multiplier(2, g)?,
            TwlpMultiplier::Flag1 | TwlpMultiplier::Flag2 | TwlpMultiplier::Flag3 => {
                let (a, b, c) = flag_split(&tht_multiplier(g), &PolyBump)?;
                match mult {
                    TwlpMultiplier::Flag1 => a,
                    TwlpMultiplier::Flag2 => b,
                    _ => c,
                }
            }
        };
        let r = apply_multiplier(&m, &s.inner)?;
        *out = Box::into_raw(Box::new(TwlpSignal { inner: r }));
        Ok(())
    })
}

/// Region code of a frequency: 0 on the nodal lines, 1..=6 for sectors I..VI.
#[no_mangle]
pub extern "C" fn twlp_classify_region(xi1: f64, xi2: f64) -> c_int {
    classify_region(xi1, xi2).code() as c_int
}

/// Runs one verification suite with the default configuration and the given seed.
///
/// # Safety
/// `name` must be a NUL-terminated string; `value` and `pass` must be writable.
#[no_mangle]
pub unsafe extern "C" fn twlp_verify_suite(name: *const c_char, seed: u64, value: *mut f64, pass: *mut c_int) -> TwlpStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if value.is_null() || pass.is_null() {
            return Err(null("result output"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail(TwlpStatus::InvalidArgument, "suite name is not UTF-8".into()))?;
        let cfg = VerifyConfig { seed, deterministic: true, ..VerifyConfig::default() };
        let e = run_suite(name, &cfg)?;
        *value = e.value;
        *pass = c_int::from(e.pass);
        Ok(())
    })
}
