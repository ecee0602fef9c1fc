//! C ABI over `vts-core`.
//!
//! Every function returns a [`VtsStatus`]; on failure the message is kept in
//! thread-local storage and read with [`vts_last_error`]. Panics never cross
//! the boundary: they are caught and reported as `VTS_STATUS_INTERNAL`.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use vts_core::config::RunConfig;
use vts_core::geometry::{polygon_iou, Quad};
use vts_core::io::RegionObservation;
use vts_core::pipeline;
use vts_core::quality::{estimate_template, teacher_score};
use vts_core::simkit::ScenarioSpec;
use vts_core::tracker::{assign, Tracker, TrackerConfig};
use vts_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    MissingInput = 3,
    Format = 4,
    Config = 5,
    Contract = 6,
    Io = 7,
    Internal = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VtsStatus, msg: impl Into<String>) -> VtsStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> VtsStatus {
    match e {
        Error::MissingInput { .. } => VtsStatus::MissingInput,
        Error::Format { .. } | Error::Parse { .. } | Error::DuplicateIdentity { .. } => VtsStatus::Format,
        Error::Config(_) => VtsStatus::Config,
        Error::Io { .. } => VtsStatus::Io,
        _ => VtsStatus::Contract,
    }
}

fn from_error(e: Error) -> VtsStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> VtsStatus) -> VtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VtsStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, VtsStatus> {
    if p.is_null() {
        return Err(fail(VtsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(VtsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// IoU of two quadrilaterals given as 8 coordinates `x0,y0,...,x3,y3`.
///
/// # Safety
/// `a` and `b` must point to 8 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vts_polygon_iou(a: *const f64, b: *const f64, out: *mut f64) -> VtsStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return fail(VtsStatus::NullPointer, "null argument to vts_polygon_iou");
        }
        let qa = Quad::from_coords(*a.cast::<[f64; 8]>());
        let qb = Quad::from_coords(*b.cast::<[f64; 8]>());
        if !qa.is_finite() || !qb.is_finite() {
            return fail(VtsStatus::InvalidArgument, "quad coordinates must be finite");
        }
        *out = polygon_iou(&qa, &qb);
        VtsStatus::Ok
    })
}

/// Minimum-cost assignment on a row-major `rows x cols` matrix. Non-finite
/// entries mark forbidden pairs. Writes at most `capacity` pairs into
/// `out_rows`/`out_cols` and the pair count into `out_len`; a capacity of
/// `min(rows, cols)` is always enough.
///
/// # Safety
/// `cost` must hold `rows * cols` doubles; the output arrays must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn vts_assign(
    cost: *const f64,
    rows: usize,
    cols: usize,
    out_rows: *mut usize,
    out_cols: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> VtsStatus {
    guard(|| {
        if out_len.is_null() || (rows * cols > 0 && cost.is_null()) {
            return fail(VtsStatus::NullPointer, "null argument to vts_assign");
        }
        let flat = if rows * cols == 0 { &[][..] } else { std::slice::from_raw_parts(cost, rows * cols) };
        let matrix: Vec<Vec<f64>> = (0..rows).map(|r| flat[r * cols..(r + 1) * cols].to_vec()).collect();
        let pairs = assign(&matrix);
        *out_len = pairs.len();
        if pairs.len() > capacity {
            return fail(VtsStatus::InvalidArgument, format!("capacity {capacity} < {} pairs", pairs.len()));
        }
        if !pairs.is_empty() && (out_rows.is_null() || out_cols.is_null()) {
            return fail(VtsStatus::NullPointer, "null output array");
        }
        for (k, (r, c)) in pairs.into_iter().enumerate() {
            *out_rows.add(k) = r;
            *out_cols.add(k) = c;
        }
        VtsStatus::Ok
    })
}

/// Cosine similarity of a region's character features to a template, both
/// row-major with `dim` columns. Shorter matrices are zero padded.
///
/// # Safety
/// `region` must hold `region_rows * dim` doubles, `template` `template_rows * dim`.
#[no_mangle]
pub unsafe extern "C" fn vts_teacher_score(
    region: *const f64,
    region_rows: usize,
    template: *const f64,
    template_rows: usize,
    dim: usize,
    out: *mut f64,
) -> VtsStatus {
    guard(|| {
        if region.is_null() || template.is_null() || out.is_null() {
            return fail(VtsStatus::NullPointer, "null argument to vts_teacher_score");
        }
        if dim == 0 || region_rows == 0 || template_rows == 0 {
            return fail(VtsStatus::InvalidArgument, "empty feature matrix");
        }
        let rows = |p: *const f64, n: usize| -> Vec<Vec<f64>> {
            std::slice::from_raw_parts(p, n * dim).chunks(dim).map(<[f64]>::to_vec).collect()
        };
        let t_max = region_rows.max(template_rows);
        let result = estimate_template(&[rows(template, template_rows)], t_max, 1)
            .and_then(|t| teacher_score(&rows(region, region_rows), &t));
        match result {
            Ok(v) => {
                *out = v;
                VtsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Tracker parameters; start from [`vts_tracker_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VtsTrackerParams {
    pub similarity_threshold: f64,
    pub mc_epsilon: f64,
    pub max_gap: u32,
    pub embedding_dim: usize,
}

#[no_mangle]
pub extern "C" fn vts_tracker_params_default() -> VtsTrackerParams {
    let d = TrackerConfig::default();
    VtsTrackerParams {
        similarity_threshold: d.similarity_threshold,
        mc_epsilon: d.mc_epsilon,
        max_gap: d.max_gap,
        embedding_dim: d.embedding_dim,
    }
}

/// Opaque incremental tracker.
pub struct VtsTracker {
    inner: Tracker,
}

/// # Safety
/// `params` must be null (defaults) or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vts_tracker_new(params: *const VtsTrackerParams, out: *mut *mut VtsTracker) -> VtsStatus {
    guard(|| {
        if out.is_null() {
            return fail(VtsStatus::NullPointer, "null output handle");
        }
        *out = ptr::null_mut();
        let p = if params.is_null() { vts_tracker_params_default() } else { *params };
        let cfg = TrackerConfig {
            similarity_threshold: p.similarity_threshold,
            mc_epsilon: p.mc_epsilon,
            max_gap: p.max_gap,
            embedding_dim: p.embedding_dim,
            ..TrackerConfig::default()
        };
        match Tracker::new(cfg) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(VtsTracker { inner: t }));
                VtsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Links one frame of `count` embeddings (row-major, `embedding_dim` wide).
/// `quads` may be null or hold `count * 8` coordinates. `out_ids[i]` gets the
/// stream id of observation `i`, or -1 when it was rejected.
///
/// # Safety
/// `tracker` must come from [`vts_tracker_new`]; arrays must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn vts_tracker_push_frame(
    tracker: *mut VtsTracker,
    frame: u32,
    embeddings: *const f64,
    quads: *const f64,
    count: usize,
    out_ids: *mut i64,
) -> VtsStatus {
    guard(|| {
        let Some(t) = tracker.as_mut() else {
            return fail(VtsStatus::NullPointer, "null tracker");
        };
        if count > 0 && (embeddings.is_null() || out_ids.is_null()) {
            return fail(VtsStatus::NullPointer, "null array with non-zero count");
        }
        let dim = t.inner.config().embedding_dim;
        let observations: Vec<RegionObservation> = (0..count)
            .map(|i| {
                let e = std::slice::from_raw_parts(embeddings.add(i * dim), dim).to_vec();
                let quad = if quads.is_null() {
                    Quad::from_rect(0.0, 0.0, 1.0, 1.0)
                } else {
                    Quad::from_coords(*quads.add(i * 8).cast::<[f64; 8]>())
                };
                RegionObservation::new(frame, quad, e)
            })
            .collect();
        match t.inner.push_frame(frame, observations) {
            Ok(ids) => {
                for (i, id) in ids.into_iter().enumerate() {
                    *out_ids.add(i) = id.map_or(-1, i64::from);
                }
                VtsStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of streams opened so far; 0 for a null handle.
///
/// # Safety
/// `tracker` must be null or come from [`vts_tracker_new`].
#[no_mangle]
pub unsafe extern "C" fn vts_tracker_stream_count(tracker: *const VtsTracker) -> usize {
    tracker.as_ref().map_or(0, |t| t.inner.stream_count())
}

/// # Safety
/// `tracker` must be null or come from [`vts_tracker_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vts_tracker_free(tracker: *mut VtsTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Generates a synthetic scenario into `out_dir`. `spec_path` may be null
/// for the default scenario; `seed` overrides the scenario seed.
///
/// # Safety
/// Strings must be null or NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn vts_run_sim(spec_path: *const c_char, out_dir: *const c_char, seed: u64) -> VtsStatus {
    guard(|| {
        let out = match path_arg(out_dir, "out_dir") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let spec = if spec_path.is_null() {
            Ok(ScenarioSpec::default())
        } else {
            match path_arg(spec_path, "spec_path") {
                Ok(p) => pipeline::load_spec(&p),
                Err(s) => return s,
            }
        };
        match spec.and_then(|s| pipeline::run_sim(&ScenarioSpec { seed, ..s }, &out)) {
            Ok(_) => VtsStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

fn with_config(config_path: *const c_char, out_dir: *const c_char, f: impl FnOnce(&RunConfig, PathBuf) -> vts_core::Result<()>) -> VtsStatus {
    guard(|| {
        let cfg_path = match unsafe { path_arg(config_path, "config_path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match RunConfig::load(&cfg_path) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        let out = if out_dir.is_null() {
            pipeline::output_dir(&cfg, None)
        } else {
            match unsafe { path_arg(out_dir, "out_dir") } {
                Ok(p) => p,
                Err(s) => return s,
            }
        };
        match f(&cfg, out) {
            Ok(()) => VtsStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Same as the `detect` command. `out_dir` may be null.
///
/// # Safety
/// Strings must be null or NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn vts_run_detect(config_path: *const c_char, out_dir: *const c_char) -> VtsStatus {
    with_config(config_path, out_dir, |cfg, out| {
        pipeline::run_detect(cfg, &out, &pipeline::thread_pool()?).map(drop)
    })
}

/// Same as the `spot` command. `out_dir` may be null.
///
/// # Safety
/// Strings must be null or NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn vts_run_spot(config_path: *const c_char, out_dir: *const c_char) -> VtsStatus {
    with_config(config_path, out_dir, |cfg, out| {
        pipeline::run_spot(cfg, &out, &pipeline::thread_pool()?).map(drop)
    })
}

/// Same as the `eval` command. `out_dir` may be null.
///
/// # Safety
/// Strings must be null or NUL-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn vts_run_eval(config_path: *const c_char, out_dir: *const c_char) -> VtsStatus {
    with_config(config_path, out_dir, |cfg, out| pipeline::run_eval(cfg, &out).map(drop))
}
