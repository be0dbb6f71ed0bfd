//! C ABI over `herzkit`.
//!
//! Functions and results cross the boundary as opaque handles; structured
//! inputs (function specs, parameter bundles, experiments) are JSON strings.
//! Every entry point returns an [`HkStatus`]; on failure a message is
//! available from [`hk_last_error`] on the same thread. Strings returned by
//! the library are released with [`hk_string_free`]. Exponents are passed as
//! `double`, with `INFINITY` for the infinite exponent.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use herzkit::cli::EmbedPayload;
use herzkit::embeddings::run_embedding;
use herzkit::norms::{herz_norm, herz_sobolev_norm, SobolevMode};
use herzkit::operators::OperatorKind;
use herzkit::params::{check_hypotheses, ParamBundle};
use herzkit::{DomainSpec, Exponent, FunctionSpec, HerzError, HerzParams, NormResult, SobolevParams, TheoremId};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    MissingField = 5,
    DimensionMismatch = 6,
    Unsupported = 7,
    Divergence = 8,
    NonIntegrable = 9,
    NotConverged = 10,
    Resolution = 11,
    NotDyadicAligned = 12,
    RegimeViolation = 13,
    Panic = 14,
}

/// A parsed test function.
pub struct HkFunction {
    spec: FunctionSpec,
}

/// The outcome of a norm evaluation. Also produced for divergent sums, in
/// which case it carries the partial value.
pub struct HkNormResult {
    result: NormResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &HerzError) -> HkStatus {
    match e {
        HerzError::Precondition(_) | HerzError::OutOfRange(_) => HkStatus::InvalidArgument,
        HerzError::MissingField(_) => HkStatus::MissingField,
        HerzError::DimensionMismatch { .. } => HkStatus::DimensionMismatch,
        HerzError::UndefinedGradient(_)
        | HerzError::MissingDerivative(_)
        | HerzError::UnsupportedVariant(_)
        | HerzError::DimensionUnsupported(_) => HkStatus::Unsupported,
        HerzError::Divergence { .. } | HerzError::DivergentTail(_) => HkStatus::Divergence,
        HerzError::NonIntegrable(_) => HkStatus::NonIntegrable,
        HerzError::Quadrature(_) => HkStatus::NotConverged,
        HerzError::Resolution(_) => HkStatus::Resolution,
        HerzError::NotDyadicAligned(_) => HkStatus::NotDyadicAligned,
        HerzError::RegimeViolation(_) => HkStatus::RegimeViolation,
    }
}

struct Failure(HkStatus, String);

impl From<HerzError> for Failure {
    fn from(e: HerzError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HkStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(HkStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(HkStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

fn json<T: for<'de> serde::Deserialize<'de>>(text: &str, name: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(HkStatus::InvalidJson, format!("`{name}`: {e}")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(HkStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(HkStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn point<'a>(x: *const f64, len: usize, f: &FunctionSpec) -> Result<&'a [f64], Failure> {
    if x.is_null() {
        return Err(Failure(HkStatus::NullPointer, "`x` is null".into()));
    }
    if len != f.dim() {
        return Err(HerzError::DimensionMismatch {
            expected: f.dim(),
            got: len,
        }
        .into());
    }
    Ok(std::slice::from_raw_parts(x, len))
}

fn exponent(v: f64) -> Result<Exponent, Failure> {
    Ok(Exponent::quasi(v)?)
}

fn give_string(s: String, out: &mut *mut c_char) {
    *out = CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw();
}

/// Message for the most recent failure on this thread. Owned by the library;
/// valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a function spec such as
/// `{"variant":"Gaussian","center":[0,0],"scale":1}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_function_from_json(spec_json: *const c_char, out: *mut *mut HkFunction) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let spec: FunctionSpec = json(str_arg(spec_json, "spec_json")?, "spec_json")?;
        spec.validate()?;
        *out = Box::into_raw(Box::new(HkFunction { spec }));
        Ok(())
    })
}

/// # Safety
/// `f` must be null or a live handle from [`hk_function_from_json`].
#[no_mangle]
pub unsafe extern "C" fn hk_function_free(f: *mut HkFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Spatial dimension of the function, 0 for a null handle.
///
/// # Safety
/// `f` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_function_dim(f: *const HkFunction) -> usize {
    f.as_ref().map_or(0, |f| f.spec.dim())
}

/// Evaluates `f` at the point `x[0..len]`.
///
/// # Safety
/// `f` must be a live handle, `x` must point to `len` doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_function_eval(f: *const HkFunction, x: *const f64, len: usize, out: *mut f64) -> HkStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let out = out_ptr(out, "out")?;
        *out = f.spec.evaluate(point(x, len, &f.spec)?)?;
        Ok(())
    })
}

/// Dilates `f` by `2^m`, producing a new handle.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_function_dilate(f: *const HkFunction, m: i32, out: *mut *mut HkFunction) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let spec = handle(f, "f")?.spec.dilate_dyadic(m)?;
        *out = Box::into_raw(Box::new(HkFunction { spec }));
        Ok(())
    })
}

fn store_result(r: std::result::Result<NormResult, HerzError>, out: &mut *mut HkNormResult) -> Result<(), Failure> {
    match r {
        Ok(result) => {
            let converged = result.converged;
            *out = Box::into_raw(Box::new(HkNormResult { result }));
            if converged {
                Ok(())
            } else {
                Err(Failure(HkStatus::NotConverged, "norm sum did not converge".into()))
            }
        }
        Err(HerzError::Divergence { direction, partial }) => {
            let msg = format!("norm diverges toward {direction}; partial value {}", partial.value);
            *out = Box::into_raw(Box::new(HkNormResult { result: *partial }));
            Err(Failure(HkStatus::Divergence, msg))
        }
        Err(e) => Err(e.into()),
    }
}

/// Herz norm `‖f‖_{K̇^{α,p}_q}` over the whole space with default truncation
/// and quadrature. On [`HkStatus::Divergence`] and [`HkStatus::NotConverged`]
/// `*out` still receives a result holding the partial sum.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_herz_norm(
    f: *const HkFunction,
    alpha: f64,
    p: f64,
    q: f64,
    out: *mut *mut HkNormResult,
) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let f = handle(f, "f")?;
        let n = f.spec.dim();
        let hp = HerzParams::new(alpha, exponent(p)?, exponent(q)?, n)?;
        store_result(
            herz_norm(&f.spec, &hp, &DomainSpec::full(n), &Default::default(), &Default::default()),
            out,
        )
    })
}

/// Herz–Sobolev norm of order `m`; `top_order` selects the seminorm made of
/// the order-`m` derivatives only.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_herz_sobolev_norm(
    f: *const HkFunction,
    alpha: f64,
    p: f64,
    q: f64,
    m: u32,
    top_order: bool,
    out: *mut *mut HkNormResult,
) -> HkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let f = handle(f, "f")?;
        let n = f.spec.dim();
        let sp = SobolevParams {
            herz: HerzParams::new(alpha, exponent(p)?, exponent(q)?, n)?,
            m,
        };
        let mode = if top_order {
            SobolevMode::TopOrder
        } else {
            SobolevMode::Full
        };
        store_result(
            herz_sobolev_norm(&f.spec, &sp, &DomainSpec::full(n), mode, &Default::default(), &Default::default()),
            out,
        )
    })
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hk_norm_result_free(r: *mut HkNormResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Norm value (the partial value for a divergent sum); NaN for a null handle.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hk_norm_result_value(r: *const HkNormResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.result.value)
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hk_norm_result_converged(r: *const HkNormResult) -> bool {
    r.as_ref().is_some_and(|r| r.result.converged)
}

/// Number of annulus terms in the result.
///
/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn hk_norm_result_term_count(r: *const HkNormResult) -> usize {
    r.as_ref().map_or(0, |r| r.result.terms.len())
}

/// Term `i`: annulus index `k`, its `L^p` mass and its weighted term.
///
/// # Safety
/// `r` must be a live result handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_norm_result_term(
    r: *const HkNormResult,
    i: usize,
    k: *mut i32,
    mass: *mut f64,
    term: *mut f64,
) -> HkStatus {
    guard(|| {
        let r = handle(r, "r")?;
        let t = r.result.terms.get(i).ok_or_else(|| {
            Failure(
                HkStatus::InvalidArgument,
                format!("term {i} out of range ({} terms)", r.result.terms.len()),
            )
        })?;
        *out_ptr(k, "k")? = t.k;
        *out_ptr(mass, "mass")? = t.mass;
        *out_ptr(term, "term")? = t.term;
        Ok(())
    })
}

/// Applies an operator given as JSON, for example `{"kind":"riesz","lambda":0.5}`,
/// to `f` at the point `x[0..len]`.
///
/// # Safety
/// `f` must be a live handle, `op_json` a NUL-terminated string, `x` must
/// point to `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_operator_apply(
    f: *const HkFunction,
    op_json: *const c_char,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> HkStatus {
    guard(|| {
        let f = handle(f, "f")?;
        let op: OperatorKind = json(str_arg(op_json, "op_json")?, "op_json")?;
        let out = out_ptr(out, "out")?;
        *out = op.apply(&f.spec, point(x, len, &f.spec)?, &Default::default())?;
        Ok(())
    })
}

/// Checks the hypotheses of `theorem` (for example `"Embeddings1"`) against a
/// JSON parameter bundle. `*ok` tells whether all hold; `*report_json`
/// receives the full report, to be released with [`hk_string_free`].
///
/// # Safety
/// Strings must be NUL-terminated; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_check_hypotheses(
    theorem: *const c_char,
    params_json: *const c_char,
    ok: *mut bool,
    report_json: *mut *mut c_char,
) -> HkStatus {
    guard(|| {
        let ok = out_ptr(ok, "ok")?;
        let report_json = out_ptr(report_json, "report_json")?;
        *report_json = ptr::null_mut();
        let thm: TheoremId = json(&format!("\"{}\"", str_arg(theorem, "theorem")?.escape_default()), "theorem")?;
        let params: ParamBundle = json(str_arg(params_json, "params_json")?, "params_json")?;
        let report = check_hypotheses(thm, &params)?;
        *ok = report.ok;
        give_string(serde_json::to_string(&report).expect("report serializes"), report_json);
        Ok(())
    })
}

/// Runs an embedding experiment described by the same JSON payload as the
/// `embed` command. `*pass` receives the verdict and `*report_json` the report.
///
/// # Safety
/// `experiment_json` must be NUL-terminated; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn hk_embed_run(
    experiment_json: *const c_char,
    pass: *mut bool,
    report_json: *mut *mut c_char,
) -> HkStatus {
    guard(|| {
        let pass = out_ptr(pass, "pass")?;
        let report_json = out_ptr(report_json, "report_json")?;
        *report_json = ptr::null_mut();
        let req: EmbedPayload = json(str_arg(experiment_json, "experiment_json")?, "experiment_json")?;
        let exp = req.experiment(vec![0])?;
        let report = run_embedding(&exp, &req.truncation, &req.quadrature)?;
        *pass = report.pass;
        give_string(serde_json::to_string(&report).expect("report serializes"), report_json);
        Ok(())
    })
}
