//! C ABI over `hamlab`.
//!
//! Every fallible function returns a [`HamlabStatus`]. On failure the message
//! is kept per thread and can be read with [`hamlab_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned through `char **` are owned by the caller and released
//! with [`hamlab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hamlab::birkhoff::{birkhoff_normal_form, BirkhoffConfig, Direction, NormalFormResult};
use hamlab::diophantine::estimate_gamma;
use hamlab::lab::{run_experiment, ExperimentSpec};
use hamlab::model::EllipticHamiltonian;
use hamlab::sdm::check_sdm_quadratic;
use hamlab::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    DimensionMismatch = 4,
    OutOfDomain = 5,
    Resonance = 6,
    BudgetExceeded = 7,
    ThresholdViolation = 8,
    NumericalFailure = 9,
    Io = 10,
    Panic = 11,
}

impl HamlabStatus {
    fn from_error(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => Self::DimensionMismatch,
            Error::Invalid(_) | Error::NonSymmetric(_) | Error::Json(_) | Error::NotActionRepresentable { .. } => {
                Self::InvalidInput
            }
            Error::OutOfDomain { .. } => Self::OutOfDomain,
            Error::ResonantFrequency { .. } | Error::ResonanceEncountered { .. } => Self::Resonance,
            Error::OrderTooHigh { .. } | Error::CombinatorialBudgetExceeded { .. } => Self::BudgetExceeded,
            Error::ThresholdViolation(_) => Self::ThresholdViolation,
            Error::FixedPointDivergence { .. } => Self::NumericalFailure,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Opaque Hamiltonian `H = α·Ĩ + V` with float coefficients.
pub struct HamlabHamiltonian(EllipticHamiltonian<f64>);

/// Opaque Birkhoff normal form.
pub struct HamlabNormalForm(NormalFormResult<f64>);

/// Transform direction for [`hamlab_normal_form_transform`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamlabDirection {
    /// `Φ_m`, from normal-form to original coordinates (`H∘Φ_m = h_m + remainder`).
    Forward = 0,
    Inverse = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HamlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(HamlabStatus::from_error(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HamlabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records its error and turns panics into [`HamlabStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HamlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HamlabStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            HamlabStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(HamlabStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(HamlabStatus::InvalidInput, "output contains NUL".into()))?;
    write_out(out, c.into_raw(), "output string pointer")
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn parse_json(s: &str) -> Result<serde_json::Value, Failure> {
    serde_json::from_str(s).map_err(|e| Error::from(e).into())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hamlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library.
#[no_mangle]
pub extern "C" fn hamlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hamlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `{"n", "alpha", "s", "V"}` into a new handle.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_from_json(
    json: *const c_char,
    out: *mut *mut HamlabHamiltonian,
) -> HamlabStatus {
    guard(|| {
        let v = parse_json(read_str(json, "json")?)?;
        let h = EllipticHamiltonian::<f64>::from_json(&v)?;
        write_out(out, Box::into_raw(Box::new(HamlabHamiltonian(h))), "out")
    })
}

/// # Safety
/// `h` must come from [`hamlab_hamiltonian_from_json`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_free(h: *mut HamlabHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of degrees of freedom, or 0 for NULL.
///
/// # Safety
/// `h` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_dimension(h: *const HamlabHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.dimension())
}

/// Serializes the Hamiltonian back to JSON.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_to_json(h: *const HamlabHamiltonian, out: *mut *mut c_char) -> HamlabStatus {
    guard(|| {
        let h = handle(h, "hamiltonian")?;
        write_string(out, h.0.to_json().to_string())
    })
}

/// `H(z)` for `z = (q, p)` of length `2n`.
///
/// # Safety
/// `z` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_energy(
    h: *const HamlabHamiltonian,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let h = handle(h, "hamiltonian")?;
        let e = h.0.energy(read_slice(z, len, "z")?)?;
        write_out(out, e, "out")
    })
}

/// Hamiltonian vector field `(∂H/∂p, −∂H/∂q)` written into `out[0..len]`.
///
/// # Safety
/// `z` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hamlab_hamiltonian_vector_field(
    h: *const HamlabHamiltonian,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let h = handle(h, "hamiltonian")?;
        let f = h.0.vector_field(read_slice(z, len, "z")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&f);
        Ok(())
    })
}

/// Normal form of order `2m` with the default working degree `2m + 4`.
///
/// # Safety
/// `h` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form(
    h: *const HamlabHamiltonian,
    m: u32,
    out: *mut *mut HamlabNormalForm,
) -> HamlabStatus {
    guard(|| {
        let h = handle(h, "hamiltonian")?;
        let nf = birkhoff_normal_form(&h.0, m, None, &BirkhoffConfig::default())?;
        write_out(out, Box::into_raw(Box::new(HamlabNormalForm(nf))), "out")
    })
}

/// # Safety
/// `nf` must come from [`hamlab_normal_form`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form_free(nf: *mut HamlabNormalForm) {
    if !nf.is_null() {
        drop(Box::from_raw(nf));
    }
}

/// Majorant of the remainder on the ball of radius `r`.
///
/// # Safety
/// `nf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form_remainder(
    nf: *const HamlabNormalForm,
    r: f64,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let nf = handle(nf, "normal form")?;
        if !(r > 0.0) {
            return Err(Failure(HamlabStatus::InvalidInput, format!("radius must be positive, got {r}")));
        }
        write_out(out, nf.0.remainder_majorant(r), "out")
    })
}

/// Transformed Hamiltonian `h_m(Ĩ(z)) + remainder(z)` at `z`.
///
/// # Safety
/// `z` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form_value(
    nf: *const HamlabNormalForm,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let nf = handle(nf, "normal form")?;
        let z = read_slice(z, len, "z")?;
        if len != 2 * nf.0.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * nf.0.n,
                got: len,
            }
            .into());
        }
        write_out(out, nf.0.normal_form_value(z), "out")
    })
}

/// Applies the normalizing transform (or its inverse) to `z`.
///
/// # Safety
/// `z` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form_transform(
    nf: *const HamlabNormalForm,
    z: *const f64,
    len: usize,
    direction: HamlabDirection,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let nf = handle(nf, "normal form")?;
        let dir = match direction {
            HamlabDirection::Forward => Direction::Forward,
            HamlabDirection::Inverse => Direction::Inverse,
        };
        let w = nf.0.apply_transform(read_slice(z, len, "z")?, dir)?;
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&w);
        Ok(())
    })
}

/// Normal form report (coefficients and majorants at `radius`) as JSON.
///
/// # Safety
/// `nf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_normal_form_to_json(
    nf: *const HamlabNormalForm,
    radius: f64,
    out: *mut *mut c_char,
) -> HamlabStatus {
    guard(|| {
        let nf = handle(nf, "normal form")?;
        write_string(out, nf.0.to_json(radius).to_string())
    })
}

/// `γ̂ = min_{0<|k|₁≤K} |k·α| |k|₁^τ`.
///
/// # Safety
/// `alpha` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_estimate_gamma(
    alpha: *const f64,
    n: usize,
    tau: f64,
    k_max: u64,
    out: *mut f64,
) -> HamlabStatus {
    guard(|| {
        let est = estimate_gamma(read_slice(alpha, n, "alpha")?, tau, k_max)?;
        write_out(out, est.gamma_hat, "out")
    })
}

/// Quadratic steepness check of the symmetric `n × n` matrix `beta`
/// (row-major). Writes 1 or 0 to `passed` and, when `verdict_json` is not
/// NULL, the full verdict as JSON.
///
/// # Safety
/// `beta` must point to `n*n` doubles; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_sdm_check_quadratic(
    beta: *const f64,
    n: usize,
    gamma_p: f64,
    tau_p: f64,
    l_max: u32,
    passed: *mut i32,
    verdict_json: *mut *mut c_char,
) -> HamlabStatus {
    guard(|| {
        let flat = read_slice(beta, n * n, "beta")?;
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let v = check_sdm_quadratic(&[], &rows, gamma_p, tau_p, l_max)?;
        write_out(passed, i32::from(v.passed), "passed")?;
        if !verdict_json.is_null() {
            write_string(verdict_json, serde_json::to_string(&v).map_err(Error::from)?)?;
        }
        Ok(())
    })
}

/// Runs an experiment spec and returns its summary JSON. Artifacts are
/// written to `out_dir` when it is not NULL.
///
/// # Safety
/// `spec_json` and `out_dir` must be NUL-terminated (or `out_dir` NULL);
/// `summary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hamlab_run_experiment(
    spec_json: *const c_char,
    out_dir: *const c_char,
    summary: *mut *mut c_char,
) -> HamlabStatus {
    guard(|| {
        let spec: ExperimentSpec =
            serde_json::from_str(read_str(spec_json, "spec_json")?).map_err(Error::from)?;
        let arts = run_experiment(&spec)?;
        if !out_dir.is_null() {
            arts.write_to(std::path::Path::new(read_str(out_dir, "out_dir")?))?;
        }
        write_string(summary, arts.summary.to_string())
    })
}
