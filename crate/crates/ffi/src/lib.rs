//! C ABI over the auditor core: opaque handles for parsed graphs and dataset
//! knowledge bases, plus the scoring, labeling, and detectability primitives
//! and a whole-pipeline entry point.
//!
//! Conventions: every fallible call returns [`AuditorStatus`] and writes its
//! result through out-pointers; `auditor_last_error` returns a thread-local,
//! NUL-terminated description of the most recent failure on the calling
//! thread (valid until that thread's next failing call). Handles must be
//! released with their matching `_free` function. All entry points catch
//! panics and convert them to `AUDITOR_STATUS_PANIC` instead of unwinding
//! across the boundary.

use auditor_core::assess::{
    label_from_score, reconcile, score_criteria, Answer, CoverageLabel, CriteriaVector,
    LabelThresholds,
};
use auditor_core::detect::{classify_sources, DetectabilityLabel, KeywordConfig};
use auditor_core::kb::{load_profiles, KnowledgeBase};
use auditor_core::pipeline::{load_config, run_pipeline};
use auditor_core::risk::{frequency_score, weighted_risk, RiskCombiner};
use auditor_core::stix::{merge_matrices, parse_bundle, Matrix, StixObjectGraph};
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditorStatus {
    /// The call succeeded.
    AuditorStatusOk = 0,
    /// A required pointer argument was NULL.
    AuditorStatusNullArgument = 1,
    /// An argument was out of range or not valid UTF-8.
    AuditorStatusInvalidArgument = 2,
    /// Input data could not be parsed or failed validation.
    AuditorStatusDataError = 3,
    /// The pipeline ran but the remote assessment service was unavailable.
    AuditorStatusRemoteUnavailable = 4,
    /// An internal panic was caught at the boundary.
    AuditorStatusPanic = 5,
}

use AuditorStatus::*;

/// Coverage label encoding: reconciliation order, most cautious first.
pub const AUDITOR_LABEL_NO: c_int = 0;
pub const AUDITOR_LABEL_UNKNOWN: c_int = 1;
pub const AUDITOR_LABEL_PARTIAL: c_int = 2;
pub const AUDITOR_LABEL_FULL: c_int = 3;

/// Matrix encoding for `auditor_graph_parse`.
pub const AUDITOR_MATRIX_ENTERPRISE: c_int = 0;
pub const AUDITOR_MATRIX_ICS: c_int = 1;

/// Risk combiner encoding for `auditor_weighted_risk`.
pub const AUDITOR_COMBINER_WEIGHTED: c_int = 0;
pub const AUDITOR_COMBINER_ADDITIVE: c_int = 1;

/// Criterion answer encoding for `auditor_score_criteria`.
pub const AUDITOR_ANSWER_NO: c_int = 0;
pub const AUDITOR_ANSWER_YES: c_int = 1;
pub const AUDITOR_ANSWER_UNKNOWN: c_int = 2;

/// Detectability class encoding for `auditor_classify_data_sources`.
pub const AUDITOR_DETECT_UNCLASSIFIED: c_int = 0;
pub const AUDITOR_DETECT_NETWORK: c_int = 1;
pub const AUDITOR_DETECT_HOST_PHYSICAL: c_int = 2;
pub const AUDITOR_DETECT_PARTIAL: c_int = 3;

/// Opaque handle to a parsed (possibly merged) technique graph.
#[repr(C)]
pub struct AuditorGraph {
    _private: [u8; 0],
}

/// Opaque handle to a dataset knowledge base.
#[repr(C)]
pub struct AuditorKnowledgeBase {
    _private: [u8; 0],
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn guarded<F: FnOnce() -> AuditorStatus>(f: F) -> AuditorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic caught at the FFI boundary");
            AuditorStatusPanic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a pointer previously returned by this library.
unsafe fn graph_ref<'a>(ptr: *const AuditorGraph) -> Option<&'a StixObjectGraph> {
    (ptr as *const StixObjectGraph).as_ref()
}

unsafe fn kb_ref<'a>(ptr: *const AuditorKnowledgeBase) -> Option<&'a KnowledgeBase> {
    (ptr as *const KnowledgeBase).as_ref()
}

unsafe fn read_c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, AuditorStatus> {
    if ptr.is_null() {
        set_last_error(&format!("{what} is NULL"));
        return Err(AuditorStatusNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("{what} is not valid UTF-8"));
        AuditorStatusInvalidArgument
    })
}

fn coverage_label_from_int(value: c_int) -> Result<CoverageLabel, AuditorStatus> {
    match value {
        AUDITOR_LABEL_NO => Ok(CoverageLabel::No),
        AUDITOR_LABEL_UNKNOWN => Ok(CoverageLabel::Unknown),
        AUDITOR_LABEL_PARTIAL => Ok(CoverageLabel::Partial),
        AUDITOR_LABEL_FULL => Ok(CoverageLabel::Full),
        _ => {
            set_last_error(&format!("invalid coverage label {value}"));
            Err(AuditorStatusInvalidArgument)
        }
    }
}

fn coverage_label_to_int(label: CoverageLabel) -> c_int {
    match label {
        CoverageLabel::No => AUDITOR_LABEL_NO,
        CoverageLabel::Unknown => AUDITOR_LABEL_UNKNOWN,
        CoverageLabel::Partial => AUDITOR_LABEL_PARTIAL,
        CoverageLabel::Full => AUDITOR_LABEL_FULL,
    }
}

/// Pointer to a NUL-terminated description of the calling thread's most
/// recent FFI failure; empty when no failure has occurred. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn auditor_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parse one ATT&CK STIX bundle (`AUDITOR_MATRIX_*`) into a graph handle.
/// The handle must be released with `auditor_graph_free`.
///
/// # Safety
/// `bundle_json` must be a valid NUL-terminated string and `out_graph` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn auditor_graph_parse(
    bundle_json: *const c_char,
    matrix: c_int,
    out_graph: *mut *mut AuditorGraph,
) -> AuditorStatus {
    guarded(|| {
        if out_graph.is_null() {
            set_last_error("out_graph is NULL");
            return AuditorStatusNullArgument;
        }
        let raw = match read_c_str(bundle_json, "bundle_json") {
            Ok(raw) => raw,
            Err(status) => return status,
        };
        let matrix = match matrix {
            AUDITOR_MATRIX_ENTERPRISE => Matrix::Enterprise,
            AUDITOR_MATRIX_ICS => Matrix::Ics,
            other => {
                set_last_error(&format!("invalid matrix {other}"));
                return AuditorStatusInvalidArgument;
            }
        };
        match parse_bundle(raw, matrix) {
            Ok(graph) => {
                *out_graph = Box::into_raw(Box::new(graph)) as *mut AuditorGraph;
                AuditorStatusOk
            }
            Err(e) => {
                set_last_error(&e.to_string());
                AuditorStatusDataError
            }
        }
    })
}

/// Merge an Enterprise graph with an ICS graph into a new handle; the input
/// handles stay owned by the caller.
///
/// # Safety
/// Both graph pointers must come from this library; `out_graph` must be valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_graph_merge(
    enterprise: *const AuditorGraph,
    ics: *const AuditorGraph,
    out_graph: *mut *mut AuditorGraph,
) -> AuditorStatus {
    guarded(|| {
        if out_graph.is_null() {
            set_last_error("out_graph is NULL");
            return AuditorStatusNullArgument;
        }
        let (Some(enterprise), Some(ics)) = (graph_ref(enterprise), graph_ref(ics)) else {
            set_last_error("graph handle is NULL");
            return AuditorStatusNullArgument;
        };
        let merged = merge_matrices(enterprise.clone(), ics.clone());
        *out_graph = Box::into_raw(Box::new(merged)) as *mut AuditorGraph;
        AuditorStatusOk
    })
}

/// Report the technique, entity, and uses-edge counts of a graph.
///
/// # Safety
/// `graph` must come from this library; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_graph_counts(
    graph: *const AuditorGraph,
    out_techniques: *mut usize,
    out_entities: *mut usize,
    out_edges: *mut usize,
) -> AuditorStatus {
    guarded(|| {
        let Some(graph) = graph_ref(graph) else {
            set_last_error("graph handle is NULL");
            return AuditorStatusNullArgument;
        };
        if out_techniques.is_null() || out_entities.is_null() || out_edges.is_null() {
            set_last_error("count out-pointer is NULL");
            return AuditorStatusNullArgument;
        }
        *out_techniques = graph.techniques.len();
        *out_entities = graph.entities.len();
        *out_edges = graph.uses_edges.len();
        AuditorStatusOk
    })
}

/// Release a graph handle. NULL is ignored.
///
/// # Safety
/// `graph` must be NULL or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn auditor_graph_free(graph: *mut AuditorGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph as *mut StixObjectGraph));
    }
}

/// Parse a dataset knowledge base from JSON into a handle that must be
/// released with `auditor_kb_free`.
///
/// # Safety
/// `kb_json` must be a valid NUL-terminated string and `out_kb` valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_kb_parse(
    kb_json: *const c_char,
    out_kb: *mut *mut AuditorKnowledgeBase,
) -> AuditorStatus {
    guarded(|| {
        if out_kb.is_null() {
            set_last_error("out_kb is NULL");
            return AuditorStatusNullArgument;
        }
        let raw = match read_c_str(kb_json, "kb_json") {
            Ok(raw) => raw,
            Err(status) => return status,
        };
        match load_profiles(raw) {
            Ok(kb) => {
                *out_kb = Box::into_raw(Box::new(kb)) as *mut AuditorKnowledgeBase;
                AuditorStatusOk
            }
            Err(e) => {
                set_last_error(&e.to_string());
                AuditorStatusDataError
            }
        }
    })
}

/// Report how many dataset profiles a knowledge base holds.
///
/// # Safety
/// `kb` must come from this library; `out_count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_kb_dataset_count(
    kb: *const AuditorKnowledgeBase,
    out_count: *mut usize,
) -> AuditorStatus {
    guarded(|| {
        let Some(kb) = kb_ref(kb) else {
            set_last_error("kb handle is NULL");
            return AuditorStatusNullArgument;
        };
        if out_count.is_null() {
            set_last_error("out_count is NULL");
            return AuditorStatusNullArgument;
        }
        *out_count = kb.profiles.len();
        AuditorStatusOk
    })
}

/// Release a knowledge base handle. NULL is ignored.
///
/// # Safety
/// `kb` must be NULL or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn auditor_kb_free(kb: *mut AuditorKnowledgeBase) {
    if !kb.is_null() {
        drop(Box::from_raw(kb as *mut KnowledgeBase));
    }
}

/// log2(occurrence_count + 1); infallible.
#[no_mangle]
pub extern "C" fn auditor_frequency_score(occurrence_count: u64) -> f64 {
    frequency_score(occurrence_count as usize)
}

/// Combine a base risk with a frequency score (`AUDITOR_COMBINER_*`).
///
/// # Safety
/// `out_risk` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn auditor_weighted_risk(
    base_risk: f64,
    frequency: f64,
    combiner: c_int,
    out_risk: *mut f64,
) -> AuditorStatus {
    guarded(|| {
        if out_risk.is_null() {
            set_last_error("out_risk is NULL");
            return AuditorStatusNullArgument;
        }
        let combiner = match combiner {
            AUDITOR_COMBINER_WEIGHTED => RiskCombiner::Weighted,
            AUDITOR_COMBINER_ADDITIVE => RiskCombiner::Additive,
            other => {
                set_last_error(&format!("invalid combiner {other}"));
                return AuditorStatusInvalidArgument;
            }
        };
        *out_risk = weighted_risk(base_risk, frequency, combiner);
        AuditorStatusOk
    })
}

/// Score a five-answer criteria vector (`AUDITOR_ANSWER_*`, length 5):
/// 0.2 per Yes.
///
/// # Safety
/// `answers` must point to `len` readable ints; `out_score` must be valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_score_criteria(
    answers: *const c_int,
    len: usize,
    out_score: *mut f64,
) -> AuditorStatus {
    guarded(|| {
        if answers.is_null() || out_score.is_null() {
            set_last_error("answers or out_score is NULL");
            return AuditorStatusNullArgument;
        }
        if len != 5 {
            set_last_error(&format!("expected 5 answers, got {len}"));
            return AuditorStatusInvalidArgument;
        }
        let mut decoded = [Answer::Unknown; 5];
        for (slot, offset) in decoded.iter_mut().zip(0..5) {
            *slot = match *answers.add(offset) {
                AUDITOR_ANSWER_NO => Answer::No,
                AUDITOR_ANSWER_YES => Answer::Yes,
                AUDITOR_ANSWER_UNKNOWN => Answer::Unknown,
                other => {
                    set_last_error(&format!("invalid answer {other}"));
                    return AuditorStatusInvalidArgument;
                }
            };
        }
        *out_score = score_criteria(&CriteriaVector::from_answers(decoded));
        AuditorStatusOk
    })
}

/// Map a score and its Unknown count to a coverage label using the default
/// thresholds.
///
/// # Safety
/// `out_label` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn auditor_label_from_score(
    score: f64,
    unknown_count: u32,
    out_label: *mut c_int,
) -> AuditorStatus {
    guarded(|| {
        if out_label.is_null() {
            set_last_error("out_label is NULL");
            return AuditorStatusNullArgument;
        }
        match label_from_score(score, unknown_count as usize, &LabelThresholds::default()) {
            Ok(label) => {
                *out_label = coverage_label_to_int(label);
                AuditorStatusOk
            }
            Err(e) => {
                set_last_error(&e.to_string());
                AuditorStatusInvalidArgument
            }
        }
    })
}

/// Reconcile two coverage labels: the more cautious (lower) one wins.
///
/// # Safety
/// `out_label` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn auditor_reconcile(
    a: c_int,
    b: c_int,
    out_label: *mut c_int,
) -> AuditorStatus {
    guarded(|| {
        if out_label.is_null() {
            set_last_error("out_label is NULL");
            return AuditorStatusNullArgument;
        }
        let (a, b) = match (coverage_label_from_int(a), coverage_label_from_int(b)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        *out_label = coverage_label_to_int(reconcile(a, b));
        AuditorStatusOk
    })
}

/// Numeric value of a coverage label (No 0.0, Unknown 0.25, Partial 0.5,
/// Full 1.0).
///
/// # Safety
/// `out_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn auditor_label_value(label: c_int, out_value: *mut f64) -> AuditorStatus {
    guarded(|| {
        if out_value.is_null() {
            set_last_error("out_value is NULL");
            return AuditorStatusNullArgument;
        }
        match coverage_label_from_int(label) {
            Ok(label) => {
                *out_value = label.numeric_value();
                AuditorStatusOk
            }
            Err(status) => status,
        }
    })
}

/// Classify a list of data-source strings with the default keyword lists;
/// writes an `AUDITOR_DETECT_*` value.
///
/// # Safety
/// `sources` must point to `len` valid NUL-terminated strings (or be NULL
/// when `len` is 0); `out_label` must be valid.
#[no_mangle]
pub unsafe extern "C" fn auditor_classify_data_sources(
    sources: *const *const c_char,
    len: usize,
    out_label: *mut c_int,
) -> AuditorStatus {
    guarded(|| {
        if out_label.is_null() || (sources.is_null() && len > 0) {
            set_last_error("sources or out_label is NULL");
            return AuditorStatusNullArgument;
        }
        let mut decoded = Vec::with_capacity(len);
        for offset in 0..len {
            match read_c_str(*sources.add(offset), "data source") {
                Ok(source) => decoded.push(source.to_string()),
                Err(status) => return status,
            }
        }
        let label = classify_sources(&decoded, &KeywordConfig::default());
        *out_label = match label {
            DetectabilityLabel::Unclassified => AUDITOR_DETECT_UNCLASSIFIED,
            DetectabilityLabel::Network => AUDITOR_DETECT_NETWORK,
            DetectabilityLabel::HostPhysical => AUDITOR_DETECT_HOST_PHYSICAL,
            DetectabilityLabel::Partial => AUDITOR_DETECT_PARTIAL,
        };
        AuditorStatusOk
    })
}

/// Run the whole pipeline from a config file path. Returns Ok on success,
/// RemoteUnavailable when the run completed with an unreachable assessment
/// service, DataError otherwise (see `auditor_last_error`).
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn auditor_run_pipeline(config_path: *const c_char) -> AuditorStatus {
    guarded(|| {
        let path = match read_c_str(config_path, "config_path") {
            Ok(path) => path,
            Err(status) => return status,
        };
        let loaded = match load_config(Path::new(path)) {
            Ok(loaded) => loaded,
            Err(e) => {
                set_last_error(&e.to_string());
                return AuditorStatusDataError;
            }
        };
        match run_pipeline(&loaded) {
            Ok(outcome) if outcome.remote_unavailable => {
                set_last_error(
                    "remote assessment service unavailable; run completed with unassessed records",
                );
                AuditorStatusRemoteUnavailable
            }
            Ok(_) => AuditorStatusOk,
            Err(e) => {
                set_last_error(&e.to_string());
                AuditorStatusDataError
            }
        }
    })
}
