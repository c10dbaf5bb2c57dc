//! C ABI for `quantlink`.
//!
//! Every fallible call returns a [`QlStatus`]; on failure the message is kept
//! per thread and can be read with [`ql_last_error_message`]. Quantizers are
//! exposed as opaque [`QlQuantizer`] handles owned by the caller and released
//! with [`ql_quantizer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use quantlink::experiments::{self, ExperimentConfig};
use quantlink::hermite::HermiteExpansion;
use quantlink::quantization::{distortion_factor, make_uniform_quantizer, optimal_uniform_quantizer, QuantizerSpec};
use quantlink::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Config = 5,
    Io = 6,
    InvalidUtf8 = 7,
    Panic = 8,
}

/// Opaque quantizer handle.
pub struct QlQuantizer {
    spec: QuantizerSpec,
}

/// Hermite coefficients of a quantizer.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QlHermite {
    pub omega1: f64,
    pub omega2: f64,
    pub lambda: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> QlStatus {
    match e {
        Error::InvalidArgument(_) => QlStatus::InvalidArgument,
        Error::DimensionMismatch(_) => QlStatus::DimensionMismatch,
        Error::Singular(_) | Error::DegenerateLevels(_) | Error::DegenerateDiagonal(_) => QlStatus::Numerical,
        Error::Config(_) | Error::Json(_) => QlStatus::Config,
        Error::Io(_) | Error::Csv(_) => QlStatus::Io,
    }
}

struct Fail(QlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records its error and converts panics into `QlStatus::Panic`.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QlStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            QlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(QlStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn quantizer<'a>(q: *const QlQuantizer) -> Result<&'a QlQuantizer, Fail> {
    q.as_ref().ok_or_else(|| null("quantizer"))
}

fn emit_quantizer(spec: QuantizerSpec, out: *mut *mut QlQuantizer) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: checked non-null above; the caller guarantees it is writable.
    unsafe { *out = Box::into_raw(Box::new(QlQuantizer { spec })) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ql_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message of this thread, including the
/// terminating NUL; 0 if the last call succeeded.
#[no_mangle]
pub extern "C" fn ql_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes_with_nul().len()))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len` bytes). Returns the number of bytes written excluding
/// the NUL, or -1 if `buf` is null or `len` is 0.
///
/// # Safety
/// `buf` must be valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ql_last_error_message(buf: *mut c_char, len: usize) -> isize {
    if buf.is_null() || len == 0 {
        return -1;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |s| s.as_bytes());
        let n = bytes.len().min(len - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
        n as isize
    })
}

/// MSE-optimal mid-rise uniform quantizer with `bits` bits for a
/// unit-variance real input.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_optimal(bits: u32, out: *mut *mut QlQuantizer) -> QlStatus {
    guard(|| emit_quantizer(optimal_uniform_quantizer(bits)?, out))
}

/// Mid-rise uniform quantizer with levels `(k + 1/2) step`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_uniform(bits: u32, step: f64, out: *mut *mut QlQuantizer) -> QlStatus {
    guard(|| emit_quantizer(make_uniform_quantizer(bits, step)?, out))
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `q` must come from a `ql_quantizer_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_free(q: *mut QlQuantizer) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Resolution in bits.
///
/// # Safety
/// `q` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_bits(q: *const QlQuantizer, out: *mut u32) -> QlStatus {
    guard(|| {
        let q = quantizer(q)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = q.spec.bits();
        Ok(())
    })
}

/// Quantizes `len` real samples from `input` into `output`. The two buffers
/// may alias.
///
/// # Safety
/// `q` must be a live handle; `input` and `output` must be valid for `len`
/// reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_apply(
    q: *const QlQuantizer,
    input: *const f64,
    output: *mut f64,
    len: usize,
) -> QlStatus {
    guard(|| {
        let q = quantizer(q)?;
        if len == 0 {
            return Ok(());
        }
        if input.is_null() {
            return Err(null("input"));
        }
        if output.is_null() {
            return Err(null("output"));
        }
        for i in 0..len {
            *output.add(i) = q.spec.apply(*input.add(i));
        }
        Ok(())
    })
}

/// Distortion factor `E[(x - Q(x))^2]` for a unit-variance Gaussian input.
///
/// # Safety
/// `q` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_distortion_factor(q: *const QlQuantizer, out: *mut f64) -> QlStatus {
    guard(|| {
        let q = quantizer(q)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = distortion_factor(&q.spec);
        Ok(())
    })
}

/// Hermite coefficients. With `design_variance` the quantizer is evaluated
/// at its unit-variance real design input, otherwise at a unit-variance
/// complex input (real variance 1/2) without gain control.
///
/// # Safety
/// `q` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ql_quantizer_hermite(
    q: *const QlQuantizer,
    design_variance: bool,
    out: *mut QlHermite,
) -> QlStatus {
    guard(|| {
        let q = quantizer(q)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let exp = if design_variance {
            HermiteExpansion::at_design_variance(&q.spec)
        } else {
            HermiteExpansion::new(&q.spec)
        };
        *out = QlHermite { omega1: exp.omega1, omega2: exp.omega2, lambda: exp.lambda };
        Ok(())
    })
}

/// Runs the experiment described by the JSON `config` and writes its CSV to
/// `csv_path`. `threads = 0` uses all cores. The row count is stored in
/// `rows` when it is non-null.
///
/// # Safety
/// `config` and `csv_path` must be NUL-terminated strings; `rows` must be
/// null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ql_run_experiment(
    config: *const c_char,
    csv_path: *const c_char,
    threads: usize,
    rows: *mut usize,
) -> QlStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_json(str_arg(config, "config")?)?;
        let path = str_arg(csv_path, "csv_path")?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if threads > 0 {
            builder = builder.num_threads(threads);
        }
        let pool = builder.build().map_err(|e| Fail(QlStatus::InvalidArgument, e.to_string()))?;
        let records = pool.install(|| experiments::run(&cfg))?;
        experiments::write_csv(&records, Path::new(path))?;
        if let Some(rows) = rows.as_mut() {
            *rows = records.len();
        }
        Ok(())
    })
}
