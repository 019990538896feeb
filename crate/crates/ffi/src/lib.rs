//! C ABI for the certification toolkit: opaque handles, integer status
//! codes, and JSON/CSV accessors so other languages can drive full runs
//! without touching the filesystem.
//!
//! Conventions:
//! - constructors return `NULL` on failure; call [`enbound_last_error_message`]
//!   for a thread-local description,
//! - every returned string is owned by the callee and must be released with
//!   [`enbound_string_free`],
//! - every handle has exactly one matching `_free` function; passing handles
//!   to any other library is undefined behavior.
//!
//! The matching header lives at `include/enbound.h`.

use enbound::certify::BoundCertificate;
use enbound::config::RunConfig;
use enbound::model::ModelPair;
use enbound::{report, runner};
use libc::{c_char, c_double, c_int};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes mirrored in the C header.
pub const ENBOUND_OK: c_int = 0;
pub const ENBOUND_ERR_ARGUMENT: c_int = 1;
pub const ENBOUND_ERR_CONFIG: c_int = 2;
pub const ENBOUND_ERR_NUMERIC: c_int = 3;
pub const ENBOUND_ERR_INTERNAL: c_int = 4;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', "?"))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &enbound::Error) -> c_int {
    match err {
        enbound::Error::Config { .. } | enbound::Error::Io { .. } => ENBOUND_ERR_CONFIG,
        enbound::Error::InvalidInput(_) => ENBOUND_ERR_ARGUMENT,
        enbound::Error::Numeric(_) => ENBOUND_ERR_NUMERIC,
    }
}

/// Opaque parsed-and-validated run configuration.
pub struct EnboundConfig {
    inner: RunConfig,
}

/// Opaque model pair.
pub struct EnboundModel {
    inner: ModelPair,
    config: RunConfig,
}

/// Opaque certification result.
pub struct EnboundCertificate {
    inner: BoundCertificate,
    config: RunConfig,
}

fn guard<T>(f: impl FnOnce() -> Result<*mut T, (c_int, String)>) -> *mut T {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(p)) => {
            clear_error();
            p
        }
        Ok(Err((_, msg))) => {
            set_error(msg);
            ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic".into());
            ptr::null_mut()
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, (c_int, String)> {
    if ptr.is_null() {
        return Err((ENBOUND_ERR_ARGUMENT, "null pointer argument".into()));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| (ENBOUND_ERR_ARGUMENT, format!("invalid utf-8: {e}")))
}

fn own_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "?"))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Library version as a static string (do not free).
#[no_mangle]
pub extern "C" fn enbound_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Thread-local message for the most recent failure (do not free; valid
/// until the next failing call on this thread). Returns NULL if the last
/// call succeeded.
#[no_mangle]
pub extern "C" fn enbound_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// Parse and validate a TOML run configuration from a UTF-8 string.
/// Returns NULL on error.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn enbound_config_parse(toml_text: *const c_char) -> *mut EnboundConfig {
    guard(|| {
        let text = unsafe { utf8_arg(toml_text)? };
        let cfg = RunConfig::from_str_resolved(text, "<memory>")
            .map_err(|e| (status_of(&e), e.to_string()))?;
        Ok(Box::into_raw(Box::new(EnboundConfig { inner: cfg })))
    })
}

/// # Safety
/// `cfg` must come from [`enbound_config_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn enbound_config_free(cfg: *mut EnboundConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Build the model described by the configuration. Returns NULL on error.
///
/// # Safety
/// `cfg` must be a live handle from [`enbound_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn enbound_model_build(cfg: *const EnboundConfig) -> *mut EnboundModel {
    guard(|| {
        let cfg = unsafe {
            cfg.as_ref()
                .ok_or((ENBOUND_ERR_ARGUMENT, "null config handle".to_string()))?
        };
        let model = cfg
            .inner
            .build_model()
            .map_err(|e| (status_of(&e), e.to_string()))?;
        Ok(Box::into_raw(Box::new(EnboundModel {
            inner: model,
            config: cfg.inner.clone(),
        })))
    })
}

/// # Safety
/// `model` must come from [`enbound_model_build`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn enbound_model_free(model: *mut EnboundModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Matrix dimension of the model, or 0 on a null handle.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn enbound_model_dim(model: *const EnboundModel) -> c_int {
    unsafe { model.as_ref() }
        .map(|m| m.inner.dim() as c_int)
        .unwrap_or(0)
}

/// Supremum of admissible drive intensities for the model under its
/// configured switching profile; +inf when the perturbation vanishes, NaN on
/// error.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn enbound_model_eps_star_max(model: *const EnboundModel) -> c_double {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return f64::NAN;
    };
    let Ok(switch) = m.config.build_switch() else {
        return f64::NAN;
    };
    m.inner.eps_star_max(&switch).unwrap_or(f64::NAN)
}

/// Run the full certification pipeline in memory. Returns NULL on error.
///
/// # Safety
/// `cfg` must be a live handle from [`enbound_config_parse`].
#[no_mangle]
pub unsafe extern "C" fn enbound_certify_run(cfg: *const EnboundConfig) -> *mut EnboundCertificate {
    guard(|| {
        let cfg = unsafe {
            cfg.as_ref()
                .ok_or((ENBOUND_ERR_ARGUMENT, "null config handle".to_string()))?
        };
        enbound::linalg::pin_blas_single_thread();
        let model = cfg
            .inner
            .build_model()
            .map_err(|e| (status_of(&e), e.to_string()))?;
        let switch = cfg
            .inner
            .build_switch()
            .map_err(|e| (status_of(&e), e.to_string()))?;
        let drive = enbound::model::DriveParams::new(
            &model,
            cfg.inner.drive.epsilon,
            cfg.inner.drive.eta_sweep[0],
            switch,
        )
        .map_err(|e| (status_of(&e), e.to_string()))?;
        let cert = enbound::certify::certify(&model, &drive, &cfg.inner.certify_options())
            .map_err(|e| (status_of(&e), e.to_string()))?;
        Ok(Box::into_raw(Box::new(EnboundCertificate {
            inner: cert,
            config: cfg.inner.clone(),
        })))
    })
}

/// Run the certification pipeline and write artifact files under `out_dir`,
/// exactly like the command-line `certify` subcommand. Returns a status code.
///
/// # Safety
/// `cfg` must be a live handle; `out_dir` a valid NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn enbound_certify_to_dir(
    cfg: *const EnboundConfig,
    out_dir: *const c_char,
) -> c_int {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let cfg = match unsafe { cfg.as_ref() } {
            Some(c) => c,
            None => {
                set_error("null config handle".into());
                return ENBOUND_ERR_ARGUMENT;
            }
        };
        let dir = match unsafe { utf8_arg(out_dir) } {
            Ok(d) => d,
            Err((code, msg)) => {
                set_error(msg);
                return code;
            }
        };
        enbound::linalg::pin_blas_single_thread();
        match runner::run_certify(&cfg.inner, std::path::Path::new(dir)) {
            Ok(artifacts) => {
                clear_error();
                if artifacts.pass {
                    ENBOUND_OK
                } else {
                    set_error("certification verdicts include failures".into());
                    ENBOUND_ERR_NUMERIC
                }
            }
            Err(e) => {
                let code = status_of(&e);
                set_error(e.to_string());
                code
            }
        }
    }));
    result.unwrap_or_else(|_| {
        set_error("internal panic".into());
        ENBOUND_ERR_INTERNAL
    })
}

/// # Safety
/// `cert` must come from [`enbound_certify_run`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn enbound_certificate_free(cert: *mut EnboundCertificate) {
    if !cert.is_null() {
        drop(unsafe { Box::from_raw(cert) });
    }
}

/// 1 if every verdict passed, 0 if any failed, -1 on a null handle.
///
/// # Safety
/// `cert` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn enbound_certificate_overall_pass(
    cert: *const EnboundCertificate,
) -> c_int {
    match unsafe { cert.as_ref() } {
        Some(c) => c.inner.verdicts.overall as c_int,
        None => -1,
    }
}

/// The certificate document as JSON (17-significant-digit floats). Free with
/// [`enbound_string_free`]. NULL on error.
///
/// # Safety
/// `cert` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn enbound_certificate_json(
    cert: *const EnboundCertificate,
) -> *mut c_char {
    guard(|| {
        let c = unsafe {
            cert.as_ref()
                .ok_or((ENBOUND_ERR_ARGUMENT, "null certificate handle".to_string()))?
        };
        let json = report::certificate_json(&c.config, &c.inner)
            .map_err(|e| (ENBOUND_ERR_INTERNAL, e.to_string()))?;
        Ok(own_string(json))
    })
}

/// The flat per-cell table as CSV (12-significant-digit floats). Free with
/// [`enbound_string_free`]. NULL on error.
///
/// # Safety
/// `cert` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn enbound_certificate_csv(cert: *const EnboundCertificate) -> *mut c_char {
    guard(|| {
        let c = unsafe {
            cert.as_ref()
                .ok_or((ENBOUND_ERR_ARGUMENT, "null certificate handle".to_string()))?
        };
        let csv = report::certificate_csv(&c.config, &c.inner)
            .map_err(|e| (ENBOUND_ERR_INTERNAL, e.to_string()))?;
        Ok(own_string(csv))
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from an `enbound_*` accessor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn enbound_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
