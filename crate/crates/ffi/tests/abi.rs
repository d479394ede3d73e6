use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use tropdyn_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    td_string_free(p);
    s
}

unsafe fn last_error() -> String {
    take(td_last_error_message())
}

#[test]
fn expression_round_trip() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(
            td_expr_parse(c("max(max(0,y)-x, -x)").as_ptr(), 2, &mut e),
            TdStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(td_expr_eval(e, c("1,2").as_ptr(), &mut out), TdStatus::Ok);
        assert_eq!(take(out), "1");
        assert_eq!(td_expr_dequantize(e, &mut out), TdStatus::Ok);
        let text = take(out);
        assert!(text.contains('/'), "{text}");
        assert_eq!(td_expr_normal_form_json(e, &mut out), TdStatus::Ok);
        let json: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!(json.is_object());

        let (mut found, mut transient, mut period) = (false, 0usize, 0usize);
        assert_eq!(
            td_period(
                e,
                c("3/7,-2").as_ptr(),
                200,
                50,
                &mut found,
                &mut transient,
                &mut period
            ),
            TdStatus::Ok
        );
        assert!(found);
        assert_eq!(period, 5);
        td_expr_free(e);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut e = ptr::null_mut();
        assert_eq!(td_expr_parse(c("max(x,").as_ptr(), 2, &mut e), TdStatus::Syntax);
        assert!(e.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(td_expr_parse(ptr::null(), 2, &mut e), TdStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(td_expr_parse(bad.as_ptr().cast(), 2, &mut e), TdStatus::InvalidUtf8);

        let mut sym = 9u8;
        assert_eq!(td_project(c("1/2").as_ptr(), &mut sym), TdStatus::Midpoint);
        assert_eq!(td_project(c("1/3").as_ptr(), &mut sym), TdStatus::Ok);
        assert_eq!(sym, 0);
        let mut out = ptr::null_mut();
        assert_eq!(td_igusa(c("1^").as_ptr(), &mut out), TdStatus::Syntax);
        td_expr_free(ptr::null_mut());
        td_string_free(ptr::null_mut());
    }
}

#[test]
fn igusa_and_interaction() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(td_igusa(c("1^1").as_ptr(), &mut out), TdStatus::Ok);
        assert_eq!(take(out), "12");
        assert_eq!(td_igusa(c("1^2").as_ptr(), &mut out), TdStatus::Ok);
        assert_eq!(take(out), "72");
        assert_eq!(
            td_interaction(
                c("lower-half").as_ptr(),
                c("upper-half").as_ptr(),
                c("1/3").as_ptr(),
                c("0110").as_ptr(),
                &mut out
            ),
            TdStatus::Ok
        );
        assert_eq!(take(out), "0110");
    }
}

#[test]
fn field_handle() {
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(
            td_lvca_evolve(c("0").as_ptr(), c("0,0,1,0,0").as_ptr(), 3, c("0").as_ptr(), &mut f),
            TdStatus::Ok
        );
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(td_field_dims(f, &mut rows, &mut cols), TdStatus::Ok);
        assert_eq!((rows, cols), (4, 5));
        let mut out = ptr::null_mut();
        assert_eq!(td_field_value(f, 1, 1, &mut out), TdStatus::Ok);
        assert_eq!(take(out), "-1");
        assert_eq!(td_field_value(f, 9, 0, &mut out), TdStatus::OutOfRange);
        let mut v = 7;
        assert_eq!(td_field_audit(f, &mut v), TdStatus::Ok);
        assert_eq!(v, 0);
        td_field_free(f);
    }
}

#[test]
fn header_is_current_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/tropdyn.h")).unwrap();
    for sym in [
        "td_expr_parse",
        "td_field_audit",
        "td_string_free",
        "TD_STATUS_MIDPOINT = 4",
        "typedef struct td_expr td_expr",
    ] {
        assert!(header.contains(sym), "{sym}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror"])
        .arg(dir.join("include/tropdyn.h"))
        .status()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(status.success());
}
