#pragma once

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from facadereg-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every API call.
typedef enum fr_status {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_ARGUMENT = 1,
  FR_STATUS_UTF8 = 2,
  FR_STATUS_PARSE = 3,
  FR_STATUS_INVALID_PARAMS = 4,
  FR_STATUS_INFEASIBLE = 5,
  FR_STATUS_TOO_LARGE = 6,
  FR_STATUS_INTERNAL = 7,
} fr_status;

// Box grouping mode.
typedef enum fr_grouping {
  FR_GROUPING_PER_CLASS = 0,
  FR_GROUPING_MERGED = 1,
} fr_grouping;

// Exact solver selection.
typedef enum fr_solver {
  FR_SOLVER_BRANCH_BOUND = 0,
  FR_SOLVER_DP = 1,
  FR_SOLVER_BRUTE_FORCE = 2,
} fr_solver;

// Usage-indicator encoding.
typedef enum fr_formulation {
  FR_FORMULATION_INDICATOR = 0,
  FR_FORMULATION_CHAIN = 1,
} fr_formulation;

// Box attribute selector for per-attribute accessors.
typedef enum fr_attribute {
  FR_ATTRIBUTE_X = 0,
  FR_ATTRIBUTE_Y = 1,
  FR_ATTRIBUTE_W = 2,
  FR_ATTRIBUTE_H = 3,
} fr_attribute;

// Opaque parsed detection set.
typedef struct fr_detections fr_detections;

// Opaque regularization outcome: input boxes, output boxes, and the report.
typedef struct fr_result fr_result;

// Pipeline parameters. Initialize with `fr_params_default`, then override
// fields as needed.
typedef struct fr_params {
  // Clustering bandwidth in pixels (lower bound).
  double delta_l;
  // Maximum snap distance in pixels (upper bound).
  double delta_u;
  double weight_x;
  double weight_y;
  double weight_w;
  double weight_h;
  enum fr_grouping grouping;
  enum fr_solver solver;
  enum fr_formulation formulation;
  double time_limit_secs;
  // Boxes below this confidence are dropped before solving.
  double min_confidence;
} fr_params;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. Valid until the next
// failing call on the same thread; never null.
const char *fr_last_error_message(void);

// Fills `out` with the default parameter set (delta_l = 4, delta_u = 40,
// weights 100/100/10/10, per-class grouping, branch-and-bound, indicator
// encoding, 60 s limit).
enum fr_status fr_params_default(struct fr_params *out);

// Parses a detection file (JSON, see the library docs for the schema) into
// an opaque handle.
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be a valid pointer.
enum fr_status fr_detections_parse_json(const uint8_t *data,
                                        size_t len,
                                        struct fr_detections **out);

// Number of boxes in the set.
//
// # Safety
// `d` must be a live handle from `fr_detections_parse_json`; `out` valid.
enum fr_status fr_detections_len(const struct fr_detections *d, size_t *out);

// Releases a detections handle. Null is a no-op.
//
// # Safety
// `d` must have come from `fr_detections_parse_json` and not be freed twice.
void fr_detections_free(struct fr_detections *d);

// Runs the regularization pipeline.
//
// # Safety
// `d` must be a live detections handle, `params` and `out` valid pointers.
enum fr_status fr_regularize(const struct fr_detections *d,
                             const struct fr_params *params,
                             struct fr_result **out);

// Releases a result handle. Null is a no-op.
//
// # Safety
// `r` must have come from `fr_regularize` and not be freed twice.
void fr_result_free(struct fr_result *r);

// Objective value split into its data and regularity terms.
//
// # Safety
// `r` must be a live result handle; out-pointers may be null to skip.
enum fr_status fr_result_objective(const struct fr_result *r,
                                   double *total,
                                   double *data_term,
                                   double *regularity_term);

// Model-space size before and distinct values in use after regularization
// for one attribute, aggregated over groups.
//
// # Safety
// `r` must be a live result handle; out-pointers may be null to skip.
enum fr_status fr_result_counts(const struct fr_result *r,
                                enum fr_attribute attribute,
                                size_t *detected,
                                size_t *regularized);

// Whether the solver proved optimality (false only after a time-limit hit).
//
// # Safety
// `r` must be a live result handle; `out` valid.
enum fr_status fr_result_proven(const struct fr_result *r, bool *out);

// Number of boxes in the regularized output.
//
// # Safety
// `r` must be a live result handle; `out` valid.
enum fr_status fr_result_len(const struct fr_result *r, size_t *out);

// One regularized box: writes class label index (0 window, 1 door,
// 2 balcony, 3 other), confidence, and x/y/w/h.
//
// # Safety
// `r` must be a live result handle; out-pointers may be null to skip.
enum fr_status fr_result_box(const struct fr_result *r,
                             size_t index,
                             uint32_t *class_index,
                             double *confidence,
                             double *x,
                             double *y,
                             double *w,
                             double *h);

// Serializes the full results file (JSON) for this outcome.
//
// # Safety
// `r` must be a live result handle; `out` valid. Free with
// `fr_string_free`.
enum fr_status fr_result_results_json(const struct fr_result *r, char **out);

// Renders the detected-vs-regularized SVG overlay.
//
// # Safety
// `r` must be a live result handle; `out` valid. Free with
// `fr_string_free`.
enum fr_status fr_result_render_svg(const struct fr_result *r, char **out);

// Releases a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must have come from this library and not be freed twice.
void fr_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
