//! C ABI for the facade-box regularizer.
//!
//! Handles are opaque; every function returns an `fr_status` code and writes
//! results through out-pointers. Strings returned through `char**` are
//! heap-allocated and must be released with [`fr_string_free`]; handles with
//! their matching `_free` function. All functions tolerate null handles by
//! returning `fr_status_NULL_ARGUMENT`.
//!
//! The generated header lives at `include/facadereg.h`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use facadereg::bip::Formulation;
use facadereg::formats;
use facadereg::pipeline::{regularize, Grouping, RegularizationParams, RegularizationReport};
use facadereg::solve::SolverTag;
use facadereg::svg::render_svg;
use facadereg::types::{Attribute, DetectionSet};
use facadereg::Error;

/// Result code of every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum fr_status {
    Ok = 0,
    NullArgument = 1,
    Utf8 = 2,
    Parse = 3,
    InvalidParams = 4,
    Infeasible = 5,
    TooLarge = 6,
    Internal = 7,
}

/// Box grouping mode.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum fr_grouping {
    PerClass = 0,
    Merged = 1,
}

/// Exact solver selection.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum fr_solver {
    BranchBound = 0,
    Dp = 1,
    BruteForce = 2,
}

/// Usage-indicator encoding.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum fr_formulation {
    Indicator = 0,
    Chain = 1,
}

/// Box attribute selector for per-attribute accessors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum fr_attribute {
    X = 0,
    Y = 1,
    W = 2,
    H = 3,
}

impl fr_attribute {
    fn to_attr(self) -> Attribute {
        match self {
            fr_attribute::X => Attribute::X,
            fr_attribute::Y => Attribute::Y,
            fr_attribute::W => Attribute::W,
            fr_attribute::H => Attribute::H,
        }
    }
}

/// Pipeline parameters. Initialize with `fr_params_default`, then override
/// fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct fr_params {
    /// Clustering bandwidth in pixels (lower bound).
    pub delta_l: f64,
    /// Maximum snap distance in pixels (upper bound).
    pub delta_u: f64,
    pub weight_x: f64,
    pub weight_y: f64,
    pub weight_w: f64,
    pub weight_h: f64,
    pub grouping: fr_grouping,
    pub solver: fr_solver,
    pub formulation: fr_formulation,
    pub time_limit_secs: f64,
    /// Boxes below this confidence are dropped before solving.
    pub min_confidence: f64,
}

impl fr_params {
    fn to_params(self) -> RegularizationParams {
        RegularizationParams {
            delta_l: self.delta_l,
            delta_u: self.delta_u,
            weights: [self.weight_x, self.weight_y, self.weight_w, self.weight_h],
            grouping: match self.grouping {
                fr_grouping::PerClass => Grouping::PerClass,
                fr_grouping::Merged => Grouping::Merged,
            },
            solver: match self.solver {
                fr_solver::BranchBound => SolverTag::BranchBound,
                fr_solver::Dp => SolverTag::Dp,
                fr_solver::BruteForce => SolverTag::BruteForce,
            },
            formulation: match self.formulation {
                fr_formulation::Indicator => Formulation::Indicator,
                fr_formulation::Chain => Formulation::Chain,
            },
            time_limit: Duration::from_secs_f64(self.time_limit_secs.max(0.0)),
            min_confidence: self.min_confidence,
        }
    }
}

/// Opaque parsed detection set.
pub struct fr_detections {
    inner: DetectionSet,
}

/// Opaque regularization outcome: input boxes, output boxes, and the report.
pub struct fr_result {
    input: DetectionSet,
    output: DetectionSet,
    report: RegularizationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let safe = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = safe);
}

fn status_of(err: &Error) -> fr_status {
    match err {
        Error::ParseSyntax(_)
        | Error::ParseSchema(_)
        | Error::UnsupportedVersion { .. }
        | Error::InvalidBox { .. }
        | Error::EmptyDetections => fr_status::Parse,
        Error::InvalidParams(_) | Error::DimensionMismatch(_) => fr_status::InvalidParams,
        Error::Infeasible | Error::InfeasibleRow { .. } => fr_status::Infeasible,
        Error::TooLargeForEnumeration { .. } => fr_status::TooLarge,
        _ => fr_status::Internal,
    }
}

fn fail(err: &Error) -> fr_status {
    set_error(&err.to_string());
    status_of(err)
}

fn guarded(f: impl FnOnce() -> fr_status) -> fr_status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            fr_status::Internal
        }
    }
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn fr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `out` with the default parameter set (delta_l = 4, delta_u = 40,
/// weights 100/100/10/10, per-class grouping, branch-and-bound, indicator
/// encoding, 60 s limit).
#[no_mangle]
pub extern "C" fn fr_params_default(out: *mut fr_params) -> fr_status {
    if out.is_null() {
        return fr_status::NullArgument;
    }
    let d = RegularizationParams::default();
    unsafe {
        *out = fr_params {
            delta_l: d.delta_l,
            delta_u: d.delta_u,
            weight_x: d.weights[0],
            weight_y: d.weights[1],
            weight_w: d.weights[2],
            weight_h: d.weights[3],
            grouping: fr_grouping::PerClass,
            solver: fr_solver::BranchBound,
            formulation: fr_formulation::Indicator,
            time_limit_secs: d.time_limit.as_secs_f64(),
            min_confidence: d.min_confidence,
        };
    }
    fr_status::Ok
}

/// Parses a detection file (JSON, see the library docs for the schema) into
/// an opaque handle.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fr_detections_parse_json(
    data: *const u8,
    len: usize,
    out: *mut *mut fr_detections,
) -> fr_status {
    if data.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    guarded(|| {
        let bytes = unsafe { std::slice::from_raw_parts(data, len) };
        match formats::parse_detections(bytes) {
            Ok(inner) => {
                unsafe { *out = Box::into_raw(Box::new(fr_detections { inner })) };
                fr_status::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of boxes in the set.
///
/// # Safety
/// `d` must be a live handle from `fr_detections_parse_json`; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fr_detections_len(
    d: *const fr_detections,
    out: *mut usize,
) -> fr_status {
    if d.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    unsafe { *out = (*d).inner.len() };
    fr_status::Ok
}

/// Releases a detections handle. Null is a no-op.
///
/// # Safety
/// `d` must have come from `fr_detections_parse_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fr_detections_free(d: *mut fr_detections) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

/// Runs the regularization pipeline.
///
/// # Safety
/// `d` must be a live detections handle, `params` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fr_regularize(
    d: *const fr_detections,
    params: *const fr_params,
    out: *mut *mut fr_result,
) -> fr_status {
    if d.is_null() || params.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    guarded(|| {
        let input = unsafe { &(*d).inner };
        let p = unsafe { *params }.to_params();
        match regularize(input, &p) {
            Ok((output, report)) => {
                let result = fr_result {
                    input: input.clone(),
                    output,
                    report,
                };
                unsafe { *out = Box::into_raw(Box::new(result)) };
                fr_status::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a result handle. Null is a no-op.
///
/// # Safety
/// `r` must have come from `fr_regularize` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fr_result_free(r: *mut fr_result) {
    if !r.is_null() {
        drop(unsafe { Box::from_raw(r) });
    }
}

/// Objective value split into its data and regularity terms.
///
/// # Safety
/// `r` must be a live result handle; out-pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fr_result_objective(
    r: *const fr_result,
    total: *mut f64,
    data_term: *mut f64,
    regularity_term: *mut f64,
) -> fr_status {
    if r.is_null() {
        return fr_status::NullArgument;
    }
    let o = unsafe { &(*r).report.objective };
    unsafe {
        if !total.is_null() {
            *total = o.total;
        }
        if !data_term.is_null() {
            *data_term = o.data_term;
        }
        if !regularity_term.is_null() {
            *regularity_term = o.regularity_term;
        }
    }
    fr_status::Ok
}

/// Model-space size before and distinct values in use after regularization
/// for one attribute, aggregated over groups.
///
/// # Safety
/// `r` must be a live result handle; out-pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fr_result_counts(
    r: *const fr_result,
    attribute: fr_attribute,
    detected: *mut usize,
    regularized: *mut usize,
) -> fr_status {
    if r.is_null() {
        return fr_status::NullArgument;
    }
    let report = unsafe { &(*r).report };
    let attr = attribute.to_attr();
    unsafe {
        if !detected.is_null() {
            *detected = *report.detected_counts.get(attr);
        }
        if !regularized.is_null() {
            *regularized = *report.regularized_counts.get(attr);
        }
    }
    fr_status::Ok
}

/// Whether the solver proved optimality (false only after a time-limit hit).
///
/// # Safety
/// `r` must be a live result handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fr_result_proven(r: *const fr_result, out: *mut bool) -> fr_status {
    if r.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    unsafe { *out = (*r).report.proven };
    fr_status::Ok
}

/// Number of boxes in the regularized output.
///
/// # Safety
/// `r` must be a live result handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fr_result_len(r: *const fr_result, out: *mut usize) -> fr_status {
    if r.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    unsafe { *out = (*r).output.len() };
    fr_status::Ok
}

/// One regularized box: writes class label index (0 window, 1 door,
/// 2 balcony, 3 other), confidence, and x/y/w/h.
///
/// # Safety
/// `r` must be a live result handle; out-pointers may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fr_result_box(
    r: *const fr_result,
    index: usize,
    class_index: *mut u32,
    confidence: *mut f64,
    x: *mut f64,
    y: *mut f64,
    w: *mut f64,
    h: *mut f64,
) -> fr_status {
    if r.is_null() {
        return fr_status::NullArgument;
    }
    let output = unsafe { &(*r).output };
    let Some(b) = output.boxes.get(index) else {
        set_error("box index out of range");
        return fr_status::InvalidParams;
    };
    let class = match b.class {
        facadereg::PrimitiveClass::Window => 0,
        facadereg::PrimitiveClass::Door => 1,
        facadereg::PrimitiveClass::Balcony => 2,
        facadereg::PrimitiveClass::Other => 3,
    };
    unsafe {
        if !class_index.is_null() {
            *class_index = class;
        }
        if !confidence.is_null() {
            *confidence = b.confidence;
        }
        if !x.is_null() {
            *x = b.x;
        }
        if !y.is_null() {
            *y = b.y;
        }
        if !w.is_null() {
            *w = b.w;
        }
        if !h.is_null() {
            *h = b.h;
        }
    }
    fr_status::Ok
}

fn string_out(out: *mut *mut c_char, bytes: Vec<u8>) -> fr_status {
    match CString::new(bytes) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            fr_status::Ok
        }
        Err(_) => {
            set_error("output contained an interior nul byte");
            fr_status::Internal
        }
    }
}

/// Serializes the full results file (JSON) for this outcome.
///
/// # Safety
/// `r` must be a live result handle; `out` valid. Free with
/// `fr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn fr_result_results_json(
    r: *const fr_result,
    out: *mut *mut c_char,
) -> fr_status {
    if r.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    guarded(|| {
        let res = unsafe { &*r };
        string_out(
            out,
            formats::write_results(&res.input, &res.output, &res.report),
        )
    })
}

/// Renders the detected-vs-regularized SVG overlay.
///
/// # Safety
/// `r` must be a live result handle; `out` valid. Free with
/// `fr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn fr_result_render_svg(
    r: *const fr_result,
    out: *mut *mut c_char,
) -> fr_status {
    if r.is_null() || out.is_null() {
        return fr_status::NullArgument;
    }
    guarded(|| {
        let res = unsafe { &*r };
        let svg = render_svg(
            &res.input,
            &res.output,
            res.input.image_width,
            res.input.image_height,
        );
        string_out(out, svg)
    })
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    const GRID: &[u8] = br#"{
        "version": 1,
        "image": { "width": 400, "height": 400, "source_id": "ffi" },
        "boxes": [
            { "class": "window", "score": 1.0, "x": 100.5, "y": 80.2, "w": 30.1, "h": 40.0 },
            { "class": "window", "score": 1.0, "x": 160.1, "y": 79.8, "w": 29.9, "h": 40.2 },
            { "class": "window", "score": 1.0, "x": 99.8,  "y": 140.0, "w": 30.0, "h": 39.9 },
            { "class": "window", "score": 1.0, "x": 159.7, "y": 140.3, "w": 30.2, "h": 40.1 }
        ]
    }"#;

    fn parse(bytes: &[u8]) -> *mut fr_detections {
        let mut handle: *mut fr_detections = ptr::null_mut();
        let status = unsafe { fr_detections_parse_json(bytes.as_ptr(), bytes.len(), &mut handle) };
        assert_eq!(status, fr_status::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn parse_regularize_and_inspect() {
        let detections = parse(GRID);
        let mut len = 0usize;
        assert_eq!(
            unsafe { fr_detections_len(detections, &mut len) },
            fr_status::Ok
        );
        assert_eq!(len, 4);

        let mut params = fr_params {
            delta_l: 0.0,
            delta_u: 0.0,
            weight_x: 0.0,
            weight_y: 0.0,
            weight_w: 0.0,
            weight_h: 0.0,
            grouping: fr_grouping::PerClass,
            solver: fr_solver::BranchBound,
            formulation: fr_formulation::Indicator,
            time_limit_secs: 0.0,
            min_confidence: 0.0,
        };
        assert_eq!(fr_params_default(&mut params), fr_status::Ok);
        assert_eq!(params.delta_l, 4.0);
        assert_eq!(params.delta_u, 40.0);
        assert_eq!(params.weight_x, 100.0);
        assert_eq!(params.weight_w, 10.0);

        let mut result: *mut fr_result = ptr::null_mut();
        assert_eq!(
            unsafe { fr_regularize(detections, &params, &mut result) },
            fr_status::Ok
        );

        let (mut total, mut data, mut reg) = (0.0, 0.0, 0.0);
        assert_eq!(
            unsafe { fr_result_objective(result, &mut total, &mut data, &mut reg) },
            fr_status::Ok
        );
        assert!((total - (data + reg)).abs() <= 1e-9 * total.max(1.0));

        // 2 columns x 2 rows of near-identical windows.
        let (mut det, mut used) = (0usize, 0usize);
        assert_eq!(
            unsafe { fr_result_counts(result, fr_attribute::X, &mut det, &mut used) },
            fr_status::Ok
        );
        assert_eq!((det, used), (2, 2));
        assert_eq!(
            unsafe { fr_result_counts(result, fr_attribute::W, &mut det, &mut used) },
            fr_status::Ok
        );
        assert_eq!((det, used), (1, 1));

        let mut proven = false;
        assert_eq!(
            unsafe { fr_result_proven(result, &mut proven) },
            fr_status::Ok
        );
        assert!(proven);

        let mut n_out = 0usize;
        assert_eq!(unsafe { fr_result_len(result, &mut n_out) }, fr_status::Ok);
        assert_eq!(n_out, 4);

        let (mut class, mut conf, mut x, mut y, mut w, mut h) = (9u32, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            unsafe {
                fr_result_box(
                    result, 0, &mut class, &mut conf, &mut x, &mut y, &mut w, &mut h,
                )
            },
            fr_status::Ok
        );
        assert_eq!(class, 0);
        assert_eq!(conf, 1.0);
        assert!(w > 29.0 && w < 31.0);

        let mut json: *mut c_char = ptr::null_mut();
        assert_eq!(
            unsafe { fr_result_results_json(result, &mut json) },
            fr_status::Ok
        );
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap();
        assert!(facadereg::formats::parse_results(text.as_bytes()).is_ok());
        unsafe { fr_string_free(json) };

        let mut svg: *mut c_char = ptr::null_mut();
        assert_eq!(
            unsafe { fr_result_render_svg(result, &mut svg) },
            fr_status::Ok
        );
        let text = unsafe { CStr::from_ptr(svg) }.to_str().unwrap();
        assert!(text.starts_with("<?xml"));
        assert_eq!(text.matches("<rect").count(), 8);
        unsafe { fr_string_free(svg) };

        unsafe { fr_result_free(result) };
        unsafe { fr_detections_free(detections) };
    }

    #[test]
    fn parse_errors_are_reported() {
        let bad = b"{ not json";
        let mut handle: *mut fr_detections = ptr::null_mut();
        let status = unsafe { fr_detections_parse_json(bad.as_ptr(), bad.len(), &mut handle) };
        assert_eq!(status, fr_status::Parse);
        assert!(handle.is_null());
        let msg = unsafe { CStr::from_ptr(fr_last_error_message()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("syntax"), "{msg}");
    }

    #[test]
    fn invalid_params_are_reported() {
        let detections = parse(GRID);
        let mut params = fr_params {
            delta_l: 4.0,
            delta_u: 40.0,
            weight_x: 100.0,
            weight_y: 100.0,
            weight_w: 10.0,
            weight_h: 10.0,
            grouping: fr_grouping::PerClass,
            solver: fr_solver::BranchBound,
            formulation: fr_formulation::Indicator,
            time_limit_secs: 60.0,
            min_confidence: 0.0,
        };
        params.delta_u = 1.0;
        let mut result: *mut fr_result = ptr::null_mut();
        assert_eq!(
            unsafe { fr_regularize(detections, &params, &mut result) },
            fr_status::InvalidParams
        );
        assert!(result.is_null());
        unsafe { fr_detections_free(detections) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        assert_eq!(fr_params_default(ptr::null_mut()), fr_status::NullArgument);
        let mut out = 0usize;
        assert_eq!(
            unsafe { fr_detections_len(ptr::null(), &mut out) },
            fr_status::NullArgument
        );
        unsafe {
            fr_detections_free(ptr::null_mut());
            fr_result_free(ptr::null_mut());
            fr_string_free(ptr::null_mut());
        }
    }
}
