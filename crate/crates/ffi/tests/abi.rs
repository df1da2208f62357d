use std::ffi::{CStr, CString};
use std::ptr;

use predual_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut std::ffi::c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    predual_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(predual_last_error()).to_str().unwrap().to_owned()
}

#[test]
fn build_query_and_free() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(predual_state_build(c("1/5").as_ptr(), 4, 0, &mut st), PredualStatus::Ok);
        let mut n = 0usize;
        assert_eq!(predual_state_level_count(st, &mut n), PredualStatus::Ok);
        assert_eq!(n, 4);
        let (mut lo, mut hi) = (0u64, 0u64);
        assert_eq!(predual_state_interval(st, 4, &mut lo, &mut hi), PredualStatus::Ok);
        assert_eq!((lo, hi), (4, 7));
        assert_eq!(predual_state_interval(st, 9, &mut lo, &mut hi), PredualStatus::NotBuilt);
        assert!(last_error().contains("not built"));
        predual_state_free(st);
    }
}

#[test]
fn save_load_round_trip_and_verify() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(predual_state_build(c("1/5").as_ptr(), 5, 100, &mut st), PredualStatus::Ok);
        let mut doc = ptr::null_mut();
        assert_eq!(predual_state_save(st, &mut doc), PredualStatus::Ok);
        let text = take(doc);
        let mut back = ptr::null_mut();
        assert_eq!(predual_state_load(c(&text).as_ptr(), &mut back), PredualStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(predual_state_save(back, &mut again), PredualStatus::Ok);
        assert_eq!(take(again), text);
        let mut passed = false;
        let mut report = ptr::null_mut();
        assert_eq!(predual_state_verify(back, &mut passed, &mut report), PredualStatus::Ok);
        assert!(passed);
        assert!(take(report).contains("\"passed\":true"));
        assert_eq!(predual_state_verify(back, &mut passed, ptr::null_mut()), PredualStatus::Ok);
        predual_state_free(st);
        predual_state_free(back);
    }
}

#[test]
fn norm_bracket_json() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(predual_state_build(c("1/5").as_ptr(), 4, 0, &mut st), PredualStatus::Ok);
        let mut out = ptr::null_mut();
        let status = predual_norm_bracket(st, c("1:1,2:1").as_ptr(), c("1/1000").as_ptr(), 8, &mut out);
        assert_eq!(status, PredualStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["lower"], "6/5");
        assert_eq!(v["upper"], "6/5");
        let status = predual_norm_bracket(st, c("99:1").as_ptr(), c("1/1000").as_ptr(), 8, &mut out);
        assert_eq!(status, PredualStatus::NotBuilt);
        predual_state_free(st);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut st = ptr::null_mut();
        assert_eq!(predual_state_build(c("1/3").as_ptr(), 4, 0, &mut st), PredualStatus::InvalidArgument);
        assert!(st.is_null());
        assert!(last_error().contains("1/3"));
        assert_eq!(predual_state_build(ptr::null(), 4, 0, &mut st), PredualStatus::NullPointer);
        assert_eq!(predual_state_build(c("1/5").as_ptr(), 4, 0, ptr::null_mut()), PredualStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(predual_state_build(bad.as_ptr().cast(), 4, 0, &mut st), PredualStatus::InvalidUtf8);
        assert_eq!(predual_state_load(c("{\"version\":1").as_ptr(), &mut st), PredualStatus::MalformedDocument);
        let mut n = 0usize;
        assert_eq!(predual_state_level_count(ptr::null(), &mut n), PredualStatus::NullPointer);
        let msg = CStr::from_ptr(predual_status_message(PredualStatus::NotBuilt)).to_str().unwrap();
        assert!(msg.contains("not built"));
        predual_state_free(ptr::null_mut());
        predual_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/predual.h")).unwrap();
    for name in [
        "predual_state_build",
        "predual_state_load",
        "predual_state_save",
        "predual_state_free",
        "predual_state_level_count",
        "predual_state_interval",
        "predual_state_verify",
        "predual_norm_bracket",
        "predual_string_free",
        "predual_status_message",
        "predual_last_error",
        "typedef struct PredualState PredualState",
        "PREDUAL_STATUS_EPSILON_NOT_REACHED = 6",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/predual.h");
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(out) = std::process::Command::new(compiler).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, header]).output()
        else {
            continue;
        };
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
