//! C ABI over `qform-tails`.
//!
//! Functions return a [`QtStatus`]; results go through out-pointers. On a
//! nonzero status, `qt_last_error_message` describes the failure for the
//! calling thread. Matrices are opaque handles created with `qt_matrix_new`
//! and released with `qt_matrix_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qform_tails::bounds::{
    conjugate_g, gaussian_hw_bound, psi1_quadform_bound, quadform_tail_bound, rv_hw_bound, tail_bound_from_envelope,
    CorollaryVariant, MgfEnvelope, Psi1Variant, TailForm, UniversalConstants,
};
use qform_tails::calibration::default_constants;
use qform_tails::matrix::{matrix_norms, SquareMatrix};
use qform_tails::orlicz::{empirical_luxemburg_norm, OrliczIndex};
use qform_tails::regression::{build_artifacts, excess_loss_tail_bound, FixedDesign};
use qform_tails::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    NotSymmetric = 3,
    NoConvergence = 4,
    Domain = 5,
    NonFinite = 6,
    InvalidArgument = 7,
    SingularDesign = 8,
    Config = 9,
    Io = 10,
    Json = 11,
    Panic = 12,
}

impl From<&Error> for QtStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Shape { .. } => QtStatus::Shape,
            Error::NotSymmetric { .. } => QtStatus::NotSymmetric,
            Error::NoConvergence { .. } => QtStatus::NoConvergence,
            Error::Domain { .. } => QtStatus::Domain,
            Error::NonFinite { .. } => QtStatus::NonFinite,
            Error::InvalidArgument { .. } => QtStatus::InvalidArgument,
            Error::SingularDesign { .. } => QtStatus::SingularDesign,
            Error::Config(_) => QtStatus::Config,
            Error::Io { .. } => QtStatus::Io,
            Error::Json(_) => QtStatus::Json,
        }
    }
}

/// Opaque square matrix handle.
pub struct QtMatrix {
    inner: SquareMatrix,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtNormBundle {
    pub operator_norm: f64,
    pub hilbert_schmidt: f64,
    pub trace_norm: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c_rv: f64,
}

impl From<UniversalConstants> for QtConstants {
    fn from(c: UniversalConstants) -> Self {
        Self {
            c1: c.c1,
            c2: c.c2,
            c3: c.c3,
            c4: c.c4,
            c_rv: c.c_rv,
        }
    }
}

impl QtConstants {
    /// Rebuilds from `c1`, `c2`, `c_rv`; `c3`, `c4` are re-derived.
    fn to_core(self) -> Result<UniversalConstants, Error> {
        UniversalConstants::new(self.c1, self.c2, self.c_rv)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtCorollary {
    Trace = 0,
    HilbertSchmidt = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QtPsi1Variant {
    Trace = 0,
    HsPsd = 1,
    HsGeneral = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtExcessLossBound {
    pub threshold: f64,
    pub prob_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QtStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QtStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            QtStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            QtStatus::Panic
        }
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn qt_status_name(status: QtStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        QtStatus::Ok => b"ok\0",
        QtStatus::NullPointer => b"null_pointer\0",
        QtStatus::Shape => b"shape\0",
        QtStatus::NotSymmetric => b"not_symmetric\0",
        QtStatus::NoConvergence => b"no_convergence\0",
        QtStatus::Domain => b"domain\0",
        QtStatus::NonFinite => b"non_finite\0",
        QtStatus::InvalidArgument => b"invalid_argument\0",
        QtStatus::SingularDesign => b"singular_design\0",
        QtStatus::Config => b"config\0",
        QtStatus::Io => b"io\0",
        QtStatus::Json => b"json\0",
        QtStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an `n × n` matrix from `n*n` row-major values.
///
/// # Safety
/// `data` must point to `n*n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_matrix_new(n: usize, data: *const f64, out: *mut *mut QtMatrix) -> QtStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or(Failure::Core(Error::Config("matrix size overflows".into())))?;
        let values = slice(data, len, "data")?.to_vec();
        let m = SquareMatrix::new(n, values)?;
        write(out, Box::into_raw(Box::new(QtMatrix { inner: m })), "out")
    })
}

/// Releases a matrix. NULL is ignored.
///
/// # Safety
/// `m` must come from `qt_matrix_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qt_matrix_free(m: *mut QtMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dimension of the matrix, 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_matrix_dim(m: *const QtMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.n())
}

/// Operator, Hilbert-Schmidt and trace norms.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_matrix_norms(m: *const QtMatrix, out: *mut QtNormBundle) -> QtStatus {
    guard(|| {
        let nb = matrix_norms(&deref(m, "matrix")?.inner)?;
        write(
            out,
            QtNormBundle {
                operator_norm: nb.operator_norm,
                hilbert_schmidt: nb.hilbert_schmidt,
                trace_norm: nb.trace_norm,
            },
            "out",
        )
    })
}

/// Constants from the calibration shipped with the library.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_constants_default(out: *mut QtConstants) -> QtStatus {
    guard(|| write(out, default_constants().into(), "out"))
}

/// Constants from `c1`, `c2`, `c_rv`, with `c3 = 2√2 c1 c2` and `c4 = 2 c3`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_constants_new(c1: f64, c2: f64, c_rv: f64, out: *mut QtConstants) -> QtStatus {
    guard(|| write(out, UniversalConstants::new(c1, c2, c_rv)?.into(), "out"))
}

/// Plug-in ψ_p Luxemburg norm (`p` is 1 or 2) of `len` samples.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_empirical_luxemburg_norm(
    samples: *const f64,
    len: usize,
    p: u32,
    rel_tol: f64,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let xs = slice(samples, len, "samples")?;
        let est = empirical_luxemburg_norm(xs, OrliczIndex::from_p(p)?, rel_tol)?;
        write(out, est.value, "out")
    })
}

/// Conjugate `g(s)` of the envelope `φ_{a,b}`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_conjugate_g(a: f64, b: f64, s: f64, out: *mut f64) -> QtStatus {
    guard(|| write(out, conjugate_g(&MgfEnvelope::new(a, b)?, s)?, "out"))
}

/// `2 e^{-g(s)}` when `exact` is nonzero, else `2 exp(-min{s²/2a², bs/2})`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_tail_bound_from_envelope(a: f64, b: f64, s: f64, exact: bool, out: *mut f64) -> QtStatus {
    guard(|| {
        let form = if exact { TailForm::Exact } else { TailForm::MinForm };
        write(out, tail_bound_from_envelope(&MgfEnvelope::new(a, b)?, s, form)?, "out")
    })
}

/// Trace or Hilbert-Schmidt corollary bound on `P(|q − Eq| >= t)`.
///
/// # Safety
/// `m`, `consts` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_quadform_tail_bound(
    m: *const QtMatrix,
    k: f64,
    consts: *const QtConstants,
    t: f64,
    variant: QtCorollary,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let nb = matrix_norms(&deref(m, "matrix")?.inner)?;
        let c = deref(consts, "consts")?.to_core()?;
        let v = match variant {
            QtCorollary::Trace => CorollaryVariant::Trace,
            QtCorollary::HilbertSchmidt => CorollaryVariant::Hs,
        };
        write(out, quadform_tail_bound(&nb, k, &c, t, v)?, "out")
    })
}

/// Upper bound on `||<Aξ, ξ>||_ψ1`, doubled when `centered`.
///
/// # Safety
/// `m`, `consts` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_psi1_quadform_bound(
    m: *const QtMatrix,
    k: f64,
    consts: *const QtConstants,
    variant: QtPsi1Variant,
    centered: bool,
    matrix_is_psd: bool,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let nb = matrix_norms(&deref(m, "matrix")?.inner)?;
        let c = deref(consts, "consts")?.to_core()?;
        let v = match variant {
            QtPsi1Variant::Trace => Psi1Variant::Trace,
            QtPsi1Variant::HsPsd => Psi1Variant::HsPsd,
            QtPsi1Variant::HsGeneral => Psi1Variant::HsGeneral,
        };
        write(out, psi1_quadform_bound(&nb, k, &c, v, centered, matrix_is_psd)?, "out")
    })
}

/// Gaussian Hanson-Wright bound for `<Ag, g>`, `g ~ N(0, I)`.
///
/// # Safety
/// `m`, `consts` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_gaussian_hw_bound(
    m: *const QtMatrix,
    consts: *const QtConstants,
    t: f64,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let nb = matrix_norms(&deref(m, "matrix")?.inner)?;
        let c = deref(consts, "consts")?.to_core()?;
        write(out, gaussian_hw_bound(&nb, &c, t)?, "out")
    })
}

/// Independent-coordinate Hanson-Wright reference bound with constant `c_rv`.
///
/// # Safety
/// `m` must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qt_rv_hw_bound(m: *const QtMatrix, k: f64, c_rv: f64, t: f64, out: *mut f64) -> QtStatus {
    guard(|| {
        let nb = matrix_norms(&deref(m, "matrix")?.inner)?;
        write(out, rv_hw_bound(&nb, k, c_rv, t)?, "out")
    })
}

/// Excess-loss bound for a `d × n` row-major design (`d*n` values).
///
/// # Safety
/// `design` must point to `d*n` doubles; `consts` valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qt_excess_loss_tail_bound(
    design: *const f64,
    d: usize,
    n: usize,
    k: f64,
    consts: *const QtConstants,
    u: f64,
    out: *mut QtExcessLossBound,
) -> QtStatus {
    guard(|| {
        let len = d.checked_mul(n).ok_or(Failure::Core(Error::Config("design size overflows".into())))?;
        let values = slice(design, len, "design")?;
        let rows: Vec<Vec<f64>> = if n == 0 { Vec::new() } else { values.chunks(n).map(<[f64]>::to_vec).collect() };
        let c = deref(consts, "consts")?.to_core()?;
        let artifacts = build_artifacts(&FixedDesign::new(rows)?)?;
        let b = excess_loss_tail_bound(&artifacts, k, &c, u)?;
        write(
            out,
            QtExcessLossBound {
                threshold: b.threshold,
                prob_bound: b.prob_bound,
            },
            "out",
        )
    })
}
