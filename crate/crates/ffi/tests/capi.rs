use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use quantlink_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { ql_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n >= 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string()
}

fn optimal(bits: u32) -> *mut QlQuantizer {
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { ql_quantizer_optimal(bits, &mut q) }, QlStatus::Ok);
    assert!(!q.is_null());
    q
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(ql_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn quantizer_roundtrip() {
    let q = optimal(2);
    let mut bits = 0;
    assert_eq!(unsafe { ql_quantizer_bits(q, &mut bits) }, QlStatus::Ok);
    assert_eq!(bits, 2);

    let input = [-3.0, -0.2, 0.0, 0.2, 3.0];
    let mut out = [0.0; 5];
    assert_eq!(unsafe { ql_quantizer_apply(q, input.as_ptr(), out.as_mut_ptr(), 5) }, QlStatus::Ok);
    let step = out[4] - out[3];
    assert!((step - 0.995687).abs() < 1e-5, "{out:?}");
    assert_eq!(out[0], -out[4]);
    assert_eq!(out[2], -step / 2.0);

    let mut rho = 0.0;
    assert_eq!(unsafe { ql_quantizer_distortion_factor(q, &mut rho) }, QlStatus::Ok);
    assert!((rho - 0.1188).abs() < 1e-3, "{rho}");

    let mut h = QlHermite::default();
    assert_eq!(unsafe { ql_quantizer_hermite(q, true, &mut h) }, QlStatus::Ok);
    assert!((h.lambda - 2.0 * h.omega1).abs() < 1e-12);
    assert!(h.omega2.abs() < 1e-12);
    unsafe { ql_quantizer_free(q) };
}

#[test]
fn sign_quantizer_gain() {
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { ql_quantizer_uniform(1, 2.0, &mut q) }, QlStatus::Ok);
    let mut h = QlHermite::default();
    assert_eq!(unsafe { ql_quantizer_hermite(q, false, &mut h) }, QlStatus::Ok);
    assert!((h.lambda - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9, "{}", h.lambda);
    unsafe { ql_quantizer_free(q) };
}

#[test]
fn errors_are_reported() {
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { ql_quantizer_uniform(2, -1.0, &mut q) }, QlStatus::InvalidArgument);
    assert!(q.is_null());
    assert!(ql_last_error_length() > 1);
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { ql_quantizer_optimal(2, ptr::null_mut()) }, QlStatus::NullPointer);
    assert!(last_error().contains("null"));

    let mut bits = 0;
    assert_eq!(unsafe { ql_quantizer_bits(ptr::null(), &mut bits) }, QlStatus::NullPointer);

    let q = optimal(1);
    assert_eq!(unsafe { ql_quantizer_apply(q, ptr::null(), ptr::null_mut(), 0) }, QlStatus::Ok);
    assert_eq!(ql_last_error_length(), 0);
    assert_eq!(unsafe { ql_quantizer_apply(q, ptr::null(), ptr::null_mut(), 3) }, QlStatus::NullPointer);
    unsafe { ql_quantizer_free(q) };
    unsafe { ql_quantizer_free(ptr::null_mut()) };
}

#[test]
fn error_message_is_truncated() {
    let mut q = ptr::null_mut();
    unsafe { ql_quantizer_uniform(0, 1.0, &mut q) };
    let mut buf = [1 as c_char; 4];
    assert_eq!(unsafe { ql_last_error_message(buf.as_mut_ptr(), 4) }, 3);
    assert_eq!(buf[3], 0);
    assert_eq!(unsafe { ql_last_error_message(ptr::null_mut(), 4) }, -1);
}

#[test]
fn run_experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mse.csv");
    let cfg = CString::new(
        r#"{"experiment":"mse","n_tx":2,"n_rx":8,"bits":[1,2],"ebn0_grid_db":[0.0],"equalizers":["aqnm"],"trials":32,"seed":1}"#,
    )
    .unwrap();
    let out = CString::new(path.to_str().unwrap()).unwrap();
    let mut rows = 0;
    assert_eq!(unsafe { ql_run_experiment(cfg.as_ptr(), out.as_ptr(), 1, &mut rows) }, QlStatus::Ok);
    assert_eq!(rows, 2);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);

    let bad = CString::new(r#"{"experiment":"mse"}"#).unwrap();
    assert_eq!(unsafe { ql_run_experiment(bad.as_ptr(), out.as_ptr(), 1, ptr::null_mut()) }, QlStatus::Config);
    assert_eq!(unsafe { ql_run_experiment(ptr::null(), out.as_ptr(), 1, ptr::null_mut()) }, QlStatus::NullPointer);
}

const C_SMOKE: &str = r#"
#include <stdio.h>
#include "quantlink.h"

int main(void) {
    QlQuantizer *q = NULL;
    if (ql_quantizer_optimal(3, &q) != QL_STATUS_OK) return 1;
    double x[2] = {-0.1, 5.0}, y[2];
    if (ql_quantizer_apply(q, x, y, 2) != QL_STATUS_OK) return 2;
    QlHermite h;
    if (ql_quantizer_hermite(q, true, &h) != QL_STATUS_OK) return 3;
    ql_quantizer_free(q);
    if (ql_quantizer_uniform(1, -1.0, &q) != QL_STATUS_INVALID_ARGUMENT) return 4;
    char msg[128];
    if (ql_last_error_message(msg, sizeof msg) <= 0) return 5;
    printf("%s %.6f %.6f %.6f\n", ql_version(), y[0], y[1], h.lambda);
    return 0;
}
"#;

/// Compiles and runs a C program against the generated header and the shared
/// library when a C compiler is available.
#[test]
fn c_program_links_against_header() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libquantlink_ffi.so").exists() {
        eprintln!("shared library not found in {}, skipping", lib_dir.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let exe = dir.path().join("smoke");
    std::fs::write(&src, C_SMOKE).unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lquantlink_ffi")
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
