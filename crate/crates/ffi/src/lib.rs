//! C ABI over `torus-quant`.
//!
//! Objects are opaque heap handles created by `*_new`/constructor calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`TqStatus`]; on failure [`tq_last_error_message`] describes the cause
//! (per thread, valid until the next failing call on that thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use torus_quant::analysis::{operator_norm, NormKind};
use torus_quant::func_expr::{parse, project, ProjectionSpec};
use torus_quant::quantization::{assemble_toeplitz, operator_trace, HilbertSpec, Polarization, QuantumOperator};
use torus_quant::star_products::{star_exact, HbarValue, Orientation};
use torus_quant::trig_poly::{FreqVector, TrigPoly};
use torus_quant::Error;

/// Trigonometric polynomial handle.
pub struct TqTrigPoly(TrigPoly);

/// Dense operator handle.
pub struct TqOperator(QuantumOperator);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    ParseError = 4,
    TooLarge = 5,
    NonConvergence = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TqOrientation {
    Star = 0,
    CheckStar = 1,
    Moyal = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TqPolarization {
    Pt = 0,
    PtCheck = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TqNormKind {
    L1 = 0,
    Linf = 1,
    L2 = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TqStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::VariableOutOfRange { .. } => TqStatus::DimensionMismatch,
        Error::Syntax { .. } | Error::UnknownIdentifier { .. } | Error::Arity { .. } => TqStatus::ParseError,
        Error::TooLarge { .. } => TqStatus::TooLarge,
        Error::NonConvergence { .. } => TqStatus::NonConvergence,
        _ => TqStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> Result<(), (TqStatus, String)>) -> TqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TqStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside torus-quant".into());
            TqStatus::Panic
        }
    }
}

fn lib(e: Error) -> (TqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TqStatus, String) {
    (TqStatus::NullPointer, format!("`{}` is null", what))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TqStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (TqStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (TqStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or null.
#[no_mangle]
pub extern "C" fn tq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates the zero polynomial on the `2n`-torus.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_new(n: usize, out: *mut *mut TqTrigPoly) -> TqStatus {
    guard(|| {
        if n == 0 {
            return Err((TqStatus::InvalidArgument, "n must be at least 1".into()));
        }
        write_out(out, Box::into_raw(Box::new(TqTrigPoly(TrigPoly::zero(n)))), "out")
    })
}

/// Adds `(re + i im) exp(2 pi i (p.x + q.y))`; `p` and `q` point to `n` integers each.
///
/// # Safety
/// `poly` must be a live handle; `p` and `q` must point to `n` readable integers.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_add_term(
    poly: *mut TqTrigPoly,
    p: *const i64,
    q: *const i64,
    re: f64,
    im: f64,
) -> TqStatus {
    guard(|| {
        let poly = poly.as_mut().ok_or_else(|| null("poly"))?;
        let n = poly.0.dim();
        let p = FreqVector::new(slice(p, n, "p")?.to_vec());
        let q = FreqVector::new(slice(q, n, "q")?.to_vec());
        let term = TrigPoly::monomial(p, q, Complex64::new(re, im)).map_err(lib)?;
        poly.0 = poly.0.add(&term).map_err(lib)?;
        Ok(())
    })
}

/// Projects an expression onto frequencies `|p_i|, |q_i| <= bandwidth`; `grid = 0` picks the default grid.
///
/// # Safety
/// `expr` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_from_expr(
    expr: *const c_char,
    n: usize,
    bandwidth: usize,
    grid: usize,
    out: *mut *mut TqTrigPoly,
) -> TqStatus {
    guard(|| {
        if expr.is_null() {
            return Err(null("expr"));
        }
        let text = CStr::from_ptr(expr)
            .to_str()
            .map_err(|_| (TqStatus::InvalidArgument, "expression is not UTF-8".to_string()))?;
        let ast = parse(text).map_err(lib)?;
        let spec = if grid == 0 {
            ProjectionSpec::with_default_grid(bandwidth)
        } else {
            ProjectionSpec::new(bandwidth, grid).map_err(lib)?
        };
        let poly = project(&ast, n, &spec).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(TqTrigPoly(poly))), "out")
    })
}

/// Number of stored coefficients, 0 for a null handle.
///
/// # Safety
/// `poly` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_len(poly: *const TqTrigPoly) -> usize {
    poly.as_ref().map_or(0, |p| p.0.len())
}

/// Evaluates at `(x, y)`, each of length `n`.
///
/// # Safety
/// `poly` must be a live handle; `x`, `y` must point to `n` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_evaluate(
    poly: *const TqTrigPoly,
    x: *const f64,
    y: *const f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> TqStatus {
    guard(|| {
        let poly = deref(poly, "poly")?;
        let n = poly.0.dim();
        let v = poly
            .0
            .evaluate(slice(x, n, "x")?, slice(y, n, "y")?)
            .map_err(lib)?;
        write_out(out_re, v.re, "out_re")?;
        write_out(out_im, v.im, "out_im")
    })
}

/// # Safety
/// `poly` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tq_trigpoly_free(poly: *mut TqTrigPoly) {
    if !poly.is_null() {
        drop(Box::from_raw(poly));
    }
}

fn orientation(o: TqOrientation) -> Orientation {
    match o {
        TqOrientation::Star => Orientation::Star,
        TqOrientation::CheckStar => Orientation::CheckStar,
        TqOrientation::Moyal => Orientation::Moyal,
    }
}

/// Untruncated star product at `hbar = 1/k`.
///
/// # Safety
/// `f`, `g` must be live handles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tq_star_exact(
    f: *const TqTrigPoly,
    g: *const TqTrigPoly,
    k: u64,
    o: TqOrientation,
    out: *mut *mut TqTrigPoly,
) -> TqStatus {
    guard(|| {
        let f = deref(f, "f")?;
        let g = deref(g, "g")?;
        let h = HbarValue::new(k).map_err(lib)?;
        let product = star_exact(&f.0, &g.0, h, orientation(o)).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(TqTrigPoly(product))), "out")
    })
}

/// Dense Toeplitz operator of `f` at level `k`.
///
/// # Safety
/// `f` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tq_toeplitz_assemble(
    f: *const TqTrigPoly,
    k: usize,
    polarization: TqPolarization,
    out: *mut *mut TqOperator,
) -> TqStatus {
    guard(|| {
        let f = deref(f, "f")?;
        let polarization = match polarization {
            TqPolarization::Pt => Polarization::PT,
            TqPolarization::PtCheck => Polarization::PTCheck,
        };
        let spec = HilbertSpec::new(f.0.dim(), k, polarization).map_err(lib)?;
        let op = assemble_toeplitz(&f.0, spec).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(TqOperator(op))), "out")
    })
}

/// Side length `k^n`, 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tq_operator_dim(op: *const TqOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

/// Matrix entry `(row, col)` in the row-major basis order.
///
/// # Safety
/// `op` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tq_operator_entry(
    op: *const TqOperator,
    row: usize,
    col: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> TqStatus {
    guard(|| {
        let op = deref(op, "op")?;
        let dim = op.0.dim();
        if row >= dim || col >= dim {
            return Err((
                TqStatus::InvalidArgument,
                format!("entry ({}, {}) outside a {}x{} matrix", row, col, dim, dim),
            ));
        }
        let v = op.0.matrix()[(row, col)];
        write_out(out_re, v.re, "out_re")?;
        write_out(out_im, v.im, "out_im")
    })
}

/// # Safety
/// `op` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tq_operator_trace(op: *const TqOperator, out_re: *mut f64, out_im: *mut f64) -> TqStatus {
    guard(|| {
        let op = deref(op, "op")?;
        let t = operator_trace(&op.0);
        write_out(out_re, t.re, "out_re")?;
        write_out(out_im, t.im, "out_im")
    })
}

/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tq_operator_norm(op: *const TqOperator, kind: TqNormKind, out: *mut f64) -> TqStatus {
    guard(|| {
        let op = deref(op, "op")?;
        let kind = match kind {
            TqNormKind::L1 => NormKind::L1Operator,
            TqNormKind::Linf => NormKind::LinfOperator,
            TqNormKind::L2 => NormKind::L2Operator,
        };
        let v = operator_norm(&op.0, kind).map_err(lib)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tq_operator_free(op: *mut TqOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}
