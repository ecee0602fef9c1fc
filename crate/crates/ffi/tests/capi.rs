use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use vts_ffi::*;

fn last_error() -> String {
    let p = vts_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn iou_and_null_checks() {
    let a = [0.0, 0.0, 2.0, 0.0, 2.0, 1.0, 0.0, 1.0];
    let b = [1.0, 0.0, 3.0, 0.0, 3.0, 1.0, 1.0, 1.0];
    let mut out = -1.0;
    unsafe {
        assert_eq!(vts_polygon_iou(a.as_ptr(), b.as_ptr(), &mut out), VtsStatus::Ok);
        assert!((out - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(vts_polygon_iou(a.as_ptr(), ptr::null(), &mut out), VtsStatus::NullPointer);
    }
    assert!(last_error().contains("null"));
    let bad = [f64::NAN; 8];
    assert_eq!(unsafe { vts_polygon_iou(a.as_ptr(), bad.as_ptr(), &mut out) }, VtsStatus::InvalidArgument);
    assert!(!unsafe { CStr::from_ptr(vts_version()) }.to_bytes().is_empty());
}

#[test]
fn assignment_through_c() {
    let cost = [2.0, 1.0, 9.0, 1.0, 2.0, 9.0];
    let (mut rows, mut cols, mut n) = ([0usize; 2], [0usize; 2], 0usize);
    let s = unsafe { vts_assign(cost.as_ptr(), 2, 3, rows.as_mut_ptr(), cols.as_mut_ptr(), 2, &mut n) };
    assert_eq!(s, VtsStatus::Ok);
    assert_eq!((n, rows, cols), (2, [0, 1], [1, 0]));
    let s = unsafe { vts_assign(cost.as_ptr(), 2, 3, rows.as_mut_ptr(), cols.as_mut_ptr(), 1, &mut n) };
    assert_eq!((s, n), (VtsStatus::InvalidArgument, 2));
    let s = unsafe { vts_assign(ptr::null(), 0, 0, ptr::null_mut(), ptr::null_mut(), 0, &mut n) };
    assert_eq!((s, n), (VtsStatus::Ok, 0));
}

#[test]
fn teacher_score_through_c() {
    let t = [1.0, 0.0, 0.0, 1.0];
    let r = [1.0, 1.0];
    let mut out = 0.0;
    assert_eq!(unsafe { vts_teacher_score(t.as_ptr(), 2, t.as_ptr(), 2, 2, &mut out) }, VtsStatus::Ok);
    assert!((out - 1.0).abs() < 1e-12);
    // one row against two: the region is zero padded
    assert_eq!(unsafe { vts_teacher_score(r.as_ptr(), 1, t.as_ptr(), 2, 2, &mut out) }, VtsStatus::Ok);
    assert!((out - 0.5).abs() < 1e-12);
    let zero = [0.0, 0.0];
    assert_eq!(unsafe { vts_teacher_score(zero.as_ptr(), 1, t.as_ptr(), 2, 2, &mut out) }, VtsStatus::Contract);
}

#[test]
fn tracker_handle_lifecycle() {
    let mut params = vts_tracker_params_default();
    params.embedding_dim = 2;
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(vts_tracker_new(&params, &mut t), VtsStatus::Ok);
        let mut ids = [0i64; 2];
        let f0 = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(vts_tracker_push_frame(t, 0, f0.as_ptr(), ptr::null(), 2, ids.as_mut_ptr()), VtsStatus::Ok);
        assert_eq!(ids, [0, 1]);
        let f1 = [0.0, 3.0, 0.0, 0.0];
        assert_eq!(vts_tracker_push_frame(t, 1, f1.as_ptr(), ptr::null(), 2, ids.as_mut_ptr()), VtsStatus::Ok);
        assert_eq!(ids, [1, -1]);
        assert_eq!(vts_tracker_stream_count(t), 2);
        assert_eq!(vts_tracker_push_frame(t, 1, f1.as_ptr(), ptr::null(), 2, ids.as_mut_ptr()), VtsStatus::Contract);
        vts_tracker_free(t);
        vts_tracker_free(ptr::null_mut());

        params.similarity_threshold = 2.0;
        assert_eq!(vts_tracker_new(&params, &mut t), VtsStatus::Config);
        assert!(t.is_null());
    }
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "n_streams = 3\n").unwrap();
    unsafe {
        assert_eq!(vts_run_sim(c(&spec).as_ptr(), c(&scene).as_ptr(), 5), VtsStatus::Ok);
    }
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[recommender]\npolicy = \"pcw\"\n[paths]\nobservations = \"scene/observations.jsonl\"\nannotations = \"scene/annotations.txt\"\n").unwrap();
    let out = dir.path().join("out");
    unsafe {
        assert_eq!(vts_run_spot(c(&cfg).as_ptr(), c(&out).as_ptr()), VtsStatus::Ok);
        assert_eq!(vts_run_eval(c(&cfg).as_ptr(), ptr::null()), VtsStatus::Ok);
    }
    assert!(out.join("metrics.txt").is_file());
    let missing = dir.path().join("absent.toml");
    assert_eq!(unsafe { vts_run_spot(c(&missing).as_ptr(), ptr::null()) }, VtsStatus::MissingInput);
    assert!(last_error().contains("absent.toml"));
    assert_eq!(unsafe { vts_run_detect(ptr::null(), ptr::null()) }, VtsStatus::NullPointer);
}

/// Compiles a small C program against the generated header and static library.
#[test]
fn header_compiles_and_links() {
    let Ok(cc) = which_cc() else { return };
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include");
    let lib_dir = root.join("../../target/debug");
    if !lib_dir.join("libvts_ffi.a").is_file() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include "vts.h"
#include <stdio.h>
int main(void) {
    double a[8] = {0,0,2,0,2,1,0,1}, b[8] = {1,0,3,0,3,1,1,1}, iou = 0;
    if (vts_polygon_iou(a, b, &iou) != VTS_STATUS_OK) return 1;
    VtsTracker *t = NULL;
    VtsTrackerParams p = vts_tracker_params_default();
    p.embedding_dim = 2;
    if (vts_tracker_new(&p, &t) != VTS_STATUS_OK) return 2;
    double e[2] = {1, 0};
    int64_t id = -5;
    if (vts_tracker_push_frame(t, 0, e, NULL, 1, &id) != VTS_STATUS_OK || id != 0) return 3;
    vts_tracker_free(t);
    printf("%.6f\n", iou);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&header)
        .arg(lib_dir.join("libvts_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = std::process::Command::new(&exe).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0.333333");
}

fn which_cc() -> Result<String, ()> {
    for c in ["cc", "gcc", "clang"] {
        if std::process::Command::new(c).arg("--version").output().is_ok() {
            return Ok(c.to_string());
        }
    }
    Err(())
}
