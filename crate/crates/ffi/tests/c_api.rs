use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use collgraph_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn last_error() -> String {
    let p = cg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const NET: &str = r#"{"topology": {"kind": "ring", "n": 4}, "alpha_s": 1e-6, "bandwidth_Bps": 1e9, "reduce_bandwidth_Bps": null}"#;

#[test]
fn generate_validate_simulate() {
    unsafe {
        let mut trace = ptr::null_mut();
        let st = cg_trace_generate(cstr("ring-allreduce").as_ptr(), 4, 4 << 20, &mut trace);
        assert_eq!(st, CgStatus::Ok);
        assert_eq!(cg_trace_num_ranks(trace), 4);
        assert_eq!(cg_trace_num_nodes(trace), 60);

        let mut verdict = CgVerdict::Fail;
        let mut json = ptr::null_mut();
        assert_eq!(cg_trace_validate(trace, &mut verdict, &mut json), CgStatus::Ok);
        assert_eq!(verdict, CgVerdict::Pass);
        let doc: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(doc["verdict"], "PASS");
        cg_string_free(json);

        let mut report = ptr::null_mut();
        assert_eq!(cg_simulate(trace, cstr(NET).as_ptr(), ptr::null(), &mut report), CgStatus::Ok);
        let d = cg_report_total_duration(report);
        assert!(((d - 6.297456e-3) / 6.297456e-3).abs() < 1e-12, "{d}");

        let mut report_json = ptr::null_mut();
        assert_eq!(cg_report_to_json(report, &mut report_json), CgStatus::Ok);
        assert!(CStr::from_ptr(report_json).to_str().unwrap().contains("total_duration_s"));
        cg_string_free(report_json);

        let mut switched = ptr::null_mut();
        assert_eq!(
            cg_simulate(trace, cstr(NET).as_ptr(), cstr("switch").as_ptr(), &mut switched),
            CgStatus::Ok
        );
        assert!(cg_report_total_duration(switched) > d);

        cg_report_free(switched);
        cg_report_free(report);
        cg_trace_free(trace);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(dir.path().join("ag.json").to_str().unwrap());
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(cg_trace_generate(cstr("rd-allgather").as_ptr(), 8, 1024, &mut a), CgStatus::Ok);
        assert_eq!(cg_trace_save(a, path.as_ptr()), CgStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(cg_trace_load(path.as_ptr(), &mut b), CgStatus::Ok);
        assert_eq!(cg_trace_num_nodes(a), cg_trace_num_nodes(b));
        cg_trace_free(a);
        cg_trace_free(b);
    }
}

#[test]
fn msccl_fixture_converts() {
    let path = cstr(fixture("ring_allreduce_4.xml").to_str().unwrap());
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(cg_trace_from_msccl(path.as_ptr(), 4 << 20, &mut t), CgStatus::Ok);
        let mut v = CgVerdict::Fail;
        assert_eq!(cg_trace_validate(t, &mut v, ptr::null_mut()), CgStatus::Ok);
        assert_eq!(v, CgVerdict::Pass);
        cg_trace_free(t);

        assert_eq!(cg_trace_from_msccl(path.as_ptr(), 1001, &mut t), CgStatus::Size);
    }
}

#[test]
fn circular_wait_is_stuck_and_deadlocks() {
    let path = cstr(fixture("circular_wait.json").to_str().unwrap());
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(cg_trace_load(path.as_ptr(), &mut t), CgStatus::Ok);
        let mut v = CgVerdict::Pass;
        assert_eq!(cg_trace_validate(t, &mut v, ptr::null_mut()), CgStatus::Ok);
        assert_eq!(v, CgVerdict::Stuck);

        let net = cstr(r#"{"topology": {"kind": "ring", "n": 2}, "alpha_s": 0, "bandwidth_Bps": 1}"#);
        let mut r = ptr::null_mut();
        assert_eq!(cg_simulate(t, net.as_ptr(), ptr::null(), &mut r), CgStatus::Deadlock);
        assert!(r.is_null());
        let msg = last_error();
        assert!(msg.contains("rank 0 node 0") && msg.contains("rank 1 node 0"), "{msg}");
        cg_trace_free(t);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(cg_trace_generate(ptr::null(), 4, 8, &mut t), CgStatus::NullArgument);
        assert!(last_error().contains("algo"));
        assert_eq!(cg_trace_generate(cstr("rd-allgather").as_ptr(), 6, 8, &mut t), CgStatus::Spec);
        assert!(last_error().contains("power-of-two"));
        assert_eq!(cg_trace_generate(cstr("bogus").as_ptr(), 4, 8, &mut t), CgStatus::Spec);
        assert_eq!(
            cg_trace_generate(cstr("ring-allreduce").as_ptr(), 4, 8, ptr::null_mut()),
            CgStatus::NullArgument
        );
        assert_eq!(cg_trace_load(cstr("/nonexistent/t.json").as_ptr(), &mut t), CgStatus::Io);
        let bad = [0xffu8, 0];
        assert_eq!(cg_trace_load(bad.as_ptr().cast(), &mut t), CgStatus::InvalidUtf8);
        assert!(t.is_null());

        assert_eq!(cg_trace_num_nodes(ptr::null()), 0);
        assert!(cg_report_total_duration(ptr::null()).is_nan());
        cg_trace_free(ptr::null_mut());
        cg_report_free(ptr::null_mut());
        cg_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/collgraph.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "typedef struct CgTrace CgTrace",
        "typedef struct CgReport CgReport",
        "CG_STATUS_OK = 0",
        "CG_STATUS_DEADLOCK",
        "CG_VERDICT_STUCK",
        "cg_trace_load(",
        "cg_trace_generate(",
        "cg_trace_from_msccl(",
        "cg_trace_save(",
        "cg_trace_validate(",
        "cg_simulate(",
        "cg_report_total_duration(",
        "cg_report_to_json(",
        "cg_last_error_message(",
        "cg_trace_free(",
        "cg_report_free(",
        "cg_string_free(",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }

    // The header must also be valid C on its own.
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
