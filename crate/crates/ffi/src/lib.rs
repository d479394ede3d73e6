//! C interface to `tropdyn`.
//!
//! Every function returns a [`TdStatus`]. On failure the message is kept per
//! thread and can be fetched with [`td_last_error_message`]. Exact rationals
//! cross the boundary as `"p/q"` strings; strings returned by the library
//! must be released with [`td_string_free`], handles with their own `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tropdyn::dynamics::{detect_period, Recurrence};
use tropdyn::exact::{parse_rational, parse_rational_list};
use tropdyn::interaction::{interaction_map, project, IntervalPLMap, SymbolSequence};
use tropdyn::lattice::{audit, evolve_lvca, LatticeField};
use tropdyn::mmm::{igusa_leading_coefficient, CycleIndex};
use tropdyn::tropical::{normalize, TropicalExpr};
use tropdyn::{dequantize, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    /// Malformed expression, number or index.
    Syntax = 1,
    /// Invalid argument, map or configuration.
    InvalidArgument = 2,
    /// Numeric or domain failure.
    Domain = 3,
    /// A value hit the midpoint of the projection.
    Midpoint = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    /// Index outside a handle's bounds.
    OutOfRange = 7,
    Panic = 8,
}

/// Opaque parsed expression.
pub struct TdExpr {
    expr: TropicalExpr,
    arity: usize,
}

/// Opaque lattice field.
pub struct TdField {
    field: LatticeField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TdStatus {
    match e {
        Error::Syntax { .. } => TdStatus::Syntax,
        Error::Midpoint { .. } => TdStatus::Midpoint,
        e if e.exit_code() == 2 => TdStatus::InvalidArgument,
        _ => TdStatus::Domain,
    }
}

enum Fail {
    Lib(Error),
    Status(TdStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TdStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Status(TdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(TdStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail::Status(TdStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::Status(TdStatus::NullPointer, format!("{what} is null")))
}

fn owned(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Copy of the calling thread's last error message, or NULL. Free with
/// `td_string_free`.
#[no_mangle]
pub extern "C" fn td_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn td_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a max-plus expression over `arity` variables (`x, y, z, w` or
/// `v0, v1, ...`).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn td_expr_parse(text_ptr: *const c_char, arity: usize, out: *mut *mut TdExpr) -> TdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let expr = TropicalExpr::parse(text(text_ptr, "text")?, arity)?;
        *out = Box::into_raw(Box::new(TdExpr { expr, arity }));
        Ok(())
    })
}

/// # Safety
/// `e` must be NULL or a handle from `td_expr_parse`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn td_expr_free(e: *mut TdExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Evaluates at a comma-separated rational point; writes `"p/q"`.
///
/// # Safety
/// Pointers must be valid; `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_expr_eval(e: *const TdExpr, point: *const c_char, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        let out = out_ptr(out, "out")?;
        let p = parse_rational_list(text(point, "point")?)?;
        *out = owned(e.expr.eval(&p)?.to_string());
        Ok(())
    })
}

/// Normal form `max(P) - max(Q)` as JSON.
///
/// # Safety
/// Pointers must be valid; `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_expr_normal_form_json(e: *const TdExpr, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        let out = out_ptr(out, "out")?;
        let nf = normalize(&e.expr, e.arity)?;
        let json = serde_json_text(&nf);
        *out = owned(json);
        Ok(())
    })
}

fn serde_json_text<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("library values serialize")
}

/// Dequantized family as text, e.g. `(1 + w + 1) / (z)`.
///
/// # Safety
/// Pointers must be valid; `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_expr_dequantize(e: *const TdExpr, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        let out = out_ptr(out, "out")?;
        let fam = dequantize::dequantize(&normalize(&e.expr, e.arity)?);
        *out = owned(fam.to_string());
        Ok(())
    })
}

/// Exact period detection for the recurrence of order `arity` defined by
/// `e`. `found` is set to 0 when no period exists within the bounds.
///
/// # Safety
/// Pointers must be valid; `e` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_period(
    e: *const TdExpr,
    init: *const c_char,
    max_transient: usize,
    max_period: usize,
    found: *mut bool,
    transient: *mut usize,
    period: *mut usize,
) -> TdStatus {
    guard(|| {
        let e = handle(e, "expr")?;
        let (found, transient, period) = (
            out_ptr(found, "found")?,
            out_ptr(transient, "transient")?,
            out_ptr(period, "period")?,
        );
        let init = parse_rational_list(text(init, "init")?)?;
        let rec = Recurrence::piecewise_linear(e.expr.clone(), e.arity)?;
        let r = detect_period(&rec, &init, max_transient, max_period)?;
        *found = r.found;
        *transient = r.transient;
        *period = r.period;
        Ok(())
    })
}

/// Leading Kontsevich-cycle coefficient for an index such as `"1^2 3"`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn td_igusa(index: *const c_char, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let idx: CycleIndex = text(index, "index")?.parse()?;
        *out = owned(igusa_leading_coefficient(&idx).to_string());
        Ok(())
    })
}

/// Symbol of a rational in `[0, 1]`; `TD_STATUS_MIDPOINT` at `1/2`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn td_project(v: *const c_char, out: *mut u8) -> TdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = project(&parse_rational(text(v, "value")?)?)?;
        Ok(())
    })
}

/// Output symbols of the interaction of two maps (built-in names or
/// `pl:` specs) started at `x` and driven by a `0`/`1` string.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn td_interaction(
    f0: *const c_char,
    f1: *const c_char,
    x: *const c_char,
    symbols: *const c_char,
    out: *mut *mut c_char,
) -> TdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let f0 = IntervalPLMap::parse(text(f0, "f0")?)?;
        let f1 = IntervalPLMap::parse(text(f1, "f1")?)?;
        let x = parse_rational(text(x, "x")?)?;
        let ks = SymbolSequence::parse(text(symbols, "symbols")?)?;
        *out = owned(interaction_map(&f0, &f1, &x, &ks)?.to_string());
        Ok(())
    })
}

/// Evolves the cell automaton from a comma-separated row.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn td_lvca_evolve(
    l: *const c_char,
    row: *const c_char,
    steps: usize,
    background: *const c_char,
    out: *mut *mut TdField,
) -> TdStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let l = parse_rational(text(l, "L")?)?;
        let row = parse_rational_list(text(row, "row")?)?;
        let b = parse_rational(text(background, "background")?)?;
        let field = evolve_lvca(&row, &l, steps, &b)?;
        *out = Box::into_raw(Box::new(TdField { field }));
        Ok(())
    })
}

/// # Safety
/// `f` must be NULL or a handle from `td_lvca_evolve`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn td_field_free(f: *mut TdField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of rows (time steps plus one) and columns.
///
/// # Safety
/// Pointers must be valid; `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_field_dims(f: *const TdField, rows: *mut usize, cols: *mut usize) -> TdStatus {
    guard(|| {
        let f = handle(f, "field")?;
        *out_ptr(rows, "rows")? = f.field.rows().len();
        *out_ptr(cols, "cols")? = f.field.width();
        Ok(())
    })
}

/// Exact value at time `s`, cell `n`.
///
/// # Safety
/// Pointers must be valid; `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_field_value(f: *const TdField, s: usize, n: usize, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let f = handle(f, "field")?;
        let out = out_ptr(out, "out")?;
        let v = f
            .field
            .rows()
            .get(s)
            .and_then(|r| r.get(n))
            .ok_or_else(|| Fail::Status(TdStatus::OutOfRange, format!("cell ({s}, {n}) is outside the field")))?;
        *out = owned(v.to_string());
        Ok(())
    })
}

/// Number of cells violating the recurrence; 0 for every evolved field.
///
/// # Safety
/// Pointers must be valid; `f` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_field_audit(f: *const TdField, violations: *mut usize) -> TdStatus {
    guard(|| {
        let f = handle(f, "field")?;
        *out_ptr(violations, "violations")? = audit(&f.field)?.violations.len();
        Ok(())
    })
}
