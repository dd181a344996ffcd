#ifndef AUDITOR_H
#define AUDITOR_H

/* Generated by cbindgen from the auditor-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Coverage label encoding: reconciliation order, most cautious first.
 */
#define AUDITOR_LABEL_NO 0

#define AUDITOR_LABEL_UNKNOWN 1

#define AUDITOR_LABEL_PARTIAL 2

#define AUDITOR_LABEL_FULL 3

/**
 * Matrix encoding for `auditor_graph_parse`.
 */
#define AUDITOR_MATRIX_ENTERPRISE 0

#define AUDITOR_MATRIX_ICS 1

/**
 * Risk combiner encoding for `auditor_weighted_risk`.
 */
#define AUDITOR_COMBINER_WEIGHTED 0

#define AUDITOR_COMBINER_ADDITIVE 1

/**
 * Criterion answer encoding for `auditor_score_criteria`.
 */
#define AUDITOR_ANSWER_NO 0

#define AUDITOR_ANSWER_YES 1

#define AUDITOR_ANSWER_UNKNOWN 2

/**
 * Detectability class encoding for `auditor_classify_data_sources`.
 */
#define AUDITOR_DETECT_UNCLASSIFIED 0

#define AUDITOR_DETECT_NETWORK 1

#define AUDITOR_DETECT_HOST_PHYSICAL 2

#define AUDITOR_DETECT_PARTIAL 3

/**
 * Result of an FFI call.
 */
typedef enum AuditorStatus {
  /**
   * The call succeeded.
   */
  AuditorStatusOk = 0,
  /**
   * A required pointer argument was NULL.
   */
  AuditorStatusNullArgument = 1,
  /**
   * An argument was out of range or not valid UTF-8.
   */
  AuditorStatusInvalidArgument = 2,
  /**
   * Input data could not be parsed or failed validation.
   */
  AuditorStatusDataError = 3,
  /**
   * The pipeline ran but the remote assessment service was unavailable.
   */
  AuditorStatusRemoteUnavailable = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  AuditorStatusPanic = 5,
} AuditorStatus;

/**
 * Opaque handle to a parsed (possibly merged) technique graph.
 */
typedef struct AuditorGraph {
  uint8_t _private[0];
} AuditorGraph;

/**
 * Opaque handle to a dataset knowledge base.
 */
typedef struct AuditorKnowledgeBase {
  uint8_t _private[0];
} AuditorKnowledgeBase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Pointer to a NUL-terminated description of the calling thread's most
 * recent FFI failure; empty when no failure has occurred. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *auditor_last_error(void);

/**
 * Parse one ATT&CK STIX bundle (`AUDITOR_MATRIX_*`) into a graph handle.
 * The handle must be released with `auditor_graph_free`.
 *
 * # Safety
 * `bundle_json` must be a valid NUL-terminated string and `out_graph` a
 * valid pointer.
 */
enum AuditorStatus auditor_graph_parse(const char *bundle_json,
                                       int matrix,
                                       struct AuditorGraph **out_graph);

/**
 * Merge an Enterprise graph with an ICS graph into a new handle; the input
 * handles stay owned by the caller.
 *
 * # Safety
 * Both graph pointers must come from this library; `out_graph` must be valid.
 */
enum AuditorStatus auditor_graph_merge(const struct AuditorGraph *enterprise,
                                       const struct AuditorGraph *ics,
                                       struct AuditorGraph **out_graph);

/**
 * Report the technique, entity, and uses-edge counts of a graph.
 *
 * # Safety
 * `graph` must come from this library; out-pointers must be valid.
 */
enum AuditorStatus auditor_graph_counts(const struct AuditorGraph *graph,
                                        uintptr_t *out_techniques,
                                        uintptr_t *out_entities,
                                        uintptr_t *out_edges);

/**
 * Release a graph handle. NULL is ignored.
 *
 * # Safety
 * `graph` must be NULL or an unreleased handle from this library.
 */
void auditor_graph_free(struct AuditorGraph *graph);

/**
 * Parse a dataset knowledge base from JSON into a handle that must be
 * released with `auditor_kb_free`.
 *
 * # Safety
 * `kb_json` must be a valid NUL-terminated string and `out_kb` valid.
 */
enum AuditorStatus auditor_kb_parse(const char *kb_json, struct AuditorKnowledgeBase **out_kb);

/**
 * Report how many dataset profiles a knowledge base holds.
 *
 * # Safety
 * `kb` must come from this library; `out_count` must be valid.
 */
enum AuditorStatus auditor_kb_dataset_count(const struct AuditorKnowledgeBase *kb,
                                            uintptr_t *out_count);

/**
 * Release a knowledge base handle. NULL is ignored.
 *
 * # Safety
 * `kb` must be NULL or an unreleased handle from this library.
 */
void auditor_kb_free(struct AuditorKnowledgeBase *kb);

/**
 * log2(occurrence_count + 1); infallible.
 */
double auditor_frequency_score(uint64_t occurrence_count);

/**
 * Combine a base risk with a frequency score (`AUDITOR_COMBINER_*`).
 *
 * # Safety
 * `out_risk` must be a valid pointer.
 */
enum AuditorStatus auditor_weighted_risk(double base_risk,
                                         double frequency,
                                         int combiner,
                                         double *out_risk);

/**
 * Score a five-answer criteria vector (`AUDITOR_ANSWER_*`, length 5):
 * 0.2 per Yes.
 *
 * # Safety
 * `answers` must point to `len` readable ints; `out_score` must be valid.
 */
enum AuditorStatus auditor_score_criteria(const int *answers, uintptr_t len, double *out_score);

/**
 * Map a score and its Unknown count to a coverage label using the default
 * thresholds.
 *
 * # Safety
 * `out_label` must be a valid pointer.
 */
enum AuditorStatus auditor_label_from_score(double score, uint32_t unknown_count, int *out_label);

/**
 * Reconcile two coverage labels: the more cautious (lower) one wins.
 *
 * # Safety
 * `out_label` must be a valid pointer.
 */
enum AuditorStatus auditor_reconcile(int a, int b, int *out_label);

/**
 * Numeric value of a coverage label (No 0.0, Unknown 0.25, Partial 0.5,
 * Full 1.0).
 *
 * # Safety
 * `out_value` must be a valid pointer.
 */
enum AuditorStatus auditor_label_value(int label, double *out_value);

/**
 * Classify a list of data-source strings with the default keyword lists;
 * writes an `AUDITOR_DETECT_*` value.
 *
 * # Safety
 * `sources` must point to `len` valid NUL-terminated strings (or be NULL
 * when `len` is 0); `out_label` must be valid.
 */
enum AuditorStatus auditor_classify_data_sources(const char *const *sources,
                                                 uintptr_t len,
                                                 int *out_label);

/**
 * Run the whole pipeline from a config file path. Returns Ok on success,
 * RemoteUnavailable when the run completed with an unreachable assessment
 * service, DataError otherwise (see `auditor_last_error`).
 *
 * # Safety
 * `config_path` must be a valid NUL-terminated string.
 */
enum AuditorStatus auditor_run_pipeline(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUDITOR_H */
