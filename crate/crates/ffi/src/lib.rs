//! C ABI over collgraph.
//!
//! Traces and reports are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`CgStatus`]; on failure `cg_last_error_message` describes the problem
//! for the calling thread. Strings returned through out-parameters are
//! freed with `cg_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use collgraph::msccl::{convert_to_trace, parse_msccl_xml};
use collgraph::sim::{simulate, NetConfig, SimReport, Topology, TopologyKind};
use collgraph::validate::{check_semantics, verdict_json, Status};
use collgraph::{generate, load_trace, save_trace, AlgoSpec, Algorithm, Error, Trace};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Invariant = 5,
    Spec = 6,
    Msccl = 7,
    Match = 8,
    Size = 9,
    Stuck = 10,
    Deadlock = 11,
    Unexpanded = 12,
    Config = 13,
    Other = 14,
    Panic = 15,
}

/// Outcome of semantic validation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgVerdict {
    Pass = 0,
    Fail = 1,
    Skipped = 2,
    Stuck = 3,
}

/// Opaque trace handle.
pub struct CgTrace(Trace);

/// Opaque simulation report handle.
pub struct CgReport(SimReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CgStatus {
    match e {
        Error::Io { .. } => CgStatus::Io,
        Error::Parse { .. } | Error::Schema(_) => CgStatus::Parse,
        Error::Invariant { .. } | Error::TraceInvariant(_) | Error::Cycle { .. } => CgStatus::Invariant,
        Error::Spec(_) => CgStatus::Spec,
        Error::Xml { .. } | Error::MscclSchema { .. } | Error::Ref { .. } => CgStatus::Msccl,
        Error::Match(_) => CgStatus::Match,
        Error::Size(_) => CgStatus::Size,
        Error::Stuck { .. } => CgStatus::Stuck,
        Error::Deadlock { .. } => CgStatus::Deadlock,
        Error::UnexpandedCollective { .. } => CgStatus::Unexpanded,
        Error::Config(_) | Error::Topology(_) | Error::Unreachable { .. } => CgStatus::Config,
        _ => CgStatus::Other,
    }
}

enum Fail {
    Null(&'static str),
    Utf8(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is NULL"));
            CgStatus::NullArgument
        }
        Ok(Err(Fail::Utf8(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            CgStatus::InvalidUtf8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn out_arg<T>(p: *mut T, what: &'static str) -> Result<*mut T, Fail> {
    if p.is_null() {
        Err(Fail::Null(what))
    } else {
        Ok(p)
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads and checks a trace file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_load(path: *const c_char, out: *mut *mut CgTrace) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let trace = load_trace(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(CgTrace(trace)));
        Ok(())
    })
}

/// Generates `algo` ("ring-allreduce", "ring-allgather", "rd-allgather").
///
/// # Safety
/// `algo` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_generate(
    algo: *const c_char,
    num_ranks: usize,
    comm_size: u64,
    out: *mut *mut CgTrace,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let algo: Algorithm = str_arg(algo, "algo")?.parse()?;
        let trace = generate(&AlgoSpec::new(algo, num_ranks, comm_size))?;
        *out = Box::into_raw(Box::new(CgTrace(trace)));
        Ok(())
    })
}

/// Converts an MSCCL-IR XML file at `comm_size` bytes.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_from_msccl(
    path: *const c_char,
    comm_size: u64,
    out: *mut *mut CgTrace,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let program = parse_msccl_xml(str_arg(path, "path")?)?;
        let trace = convert_to_trace(&program, comm_size)?;
        *out = Box::into_raw(Box::new(CgTrace(trace)));
        Ok(())
    })
}

/// Writes the trace in canonical form.
///
/// # Safety
/// `trace` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_save(trace: *const CgTrace, path: *const c_char) -> CgStatus {
    guard(|| {
        let trace = ref_arg(trace, "trace")?;
        save_trace(&trace.0, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of ranks, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_num_ranks(trace: *const CgTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.num_ranks())
}

/// Total node count over all ranks, or 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_num_nodes(trace: *const CgTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.num_nodes())
}

/// Symbolically validates the trace. A stuck execution reports
/// `CG_VERDICT_STUCK` with status `CG_STATUS_OK`.
///
/// # Safety
/// `trace` must come from this library; `verdict` must be writable.
/// `json_out` may be NULL; otherwise it receives the verdict document,
/// to be released with `cg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_validate(
    trace: *const CgTrace,
    verdict: *mut CgVerdict,
    json_out: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        let trace = ref_arg(trace, "trace")?;
        let verdict = out_arg(verdict, "verdict")?;
        let outcome = check_semantics(&trace.0);
        let v = match &outcome {
            Ok(v) => match v.status {
                Status::Pass => CgVerdict::Pass,
                Status::Fail => CgVerdict::Fail,
                Status::Skipped => CgVerdict::Skipped,
            },
            Err(Error::Stuck { .. }) => CgVerdict::Stuck,
            Err(_) => return Err(outcome.unwrap_err().into()),
        };
        *verdict = v;
        if !json_out.is_null() {
            *json_out = into_c_string(format!("{:#}", verdict_json(&outcome)));
        }
        Ok(())
    })
}

/// Simulates an expanded trace. `net_json` is a network configuration
/// document; `topology` optionally overrides its topology with a token
/// such as "ring" or "mesh2d:8x8" and may be NULL.
///
/// # Safety
/// Pointers must be valid as described; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_simulate(
    trace: *const CgTrace,
    net_json: *const c_char,
    topology: *const c_char,
    out: *mut *mut CgReport,
) -> CgStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let trace = ref_arg(trace, "trace")?;
        let config = NetConfig::from_json(str_arg(net_json, "net_json")?)?;
        let topo = if topology.is_null() {
            config
                .topology
                .ok_or_else(|| Error::Config("configuration has no topology".into()))?
        } else {
            let token = str_arg(topology, "topology")?;
            Topology::new(TopologyKind::parse(token, trace.0.num_ranks())?)?
        };
        let report = simulate(&trace.0, &topo, &config.cost)?;
        *out = Box::into_raw(Box::new(CgReport(report)));
        Ok(())
    })
}

/// Total simulated duration in seconds, or NaN for NULL.
///
/// # Safety
/// `report` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn cg_report_total_duration(report: *const CgReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.total_duration_s)
}

/// The full report as JSON; release with `cg_string_free`.
///
/// # Safety
/// `report` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cg_report_to_json(report: *const CgReport, out: *mut *mut c_char) -> CgStatus {
    guard(|| {
        let report = ref_arg(report, "report")?;
        let out = out_arg(out, "out")?;
        *out = into_c_string(report.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `trace` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cg_trace_free(trace: *mut CgTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `report` must be NULL or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cg_report_free(report: *mut CgReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
