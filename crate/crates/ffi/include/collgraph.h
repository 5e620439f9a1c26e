#ifndef COLLGRAPH_H
#define COLLGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CgStatus {
  CG_STATUS_OK = 0,
  CG_STATUS_NULL_ARGUMENT = 1,
  CG_STATUS_INVALID_UTF8 = 2,
  CG_STATUS_IO = 3,
  CG_STATUS_PARSE = 4,
  CG_STATUS_INVARIANT = 5,
  CG_STATUS_SPEC = 6,
  CG_STATUS_MSCCL = 7,
  CG_STATUS_MATCH = 8,
  CG_STATUS_SIZE = 9,
  CG_STATUS_STUCK = 10,
  CG_STATUS_DEADLOCK = 11,
  CG_STATUS_UNEXPANDED = 12,
  CG_STATUS_CONFIG = 13,
  CG_STATUS_OTHER = 14,
  CG_STATUS_PANIC = 15,
} CgStatus;

/**
 * Outcome of semantic validation.
 */
typedef enum CgVerdict {
  CG_VERDICT_PASS = 0,
  CG_VERDICT_FAIL = 1,
  CG_VERDICT_SKIPPED = 2,
  CG_VERDICT_STUCK = 3,
} CgVerdict;

/**
 * Opaque simulation report handle.
 */
typedef struct CgReport CgReport;

/**
 * Opaque trace handle.
 */
typedef struct CgTrace CgTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *cg_last_error_message(void);

/**
 * Loads and checks a trace file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CgStatus cg_trace_load(const char *path, struct CgTrace **out);

/**
 * Generates `algo` ("ring-allreduce", "ring-allgather", "rd-allgather").
 *
 * # Safety
 * `algo` must be a NUL-terminated string; `out` must be writable.
 */
enum CgStatus cg_trace_generate(const char *algo,
                                size_t num_ranks,
                                uint64_t comm_size,
                                struct CgTrace **out);

/**
 * Converts an MSCCL-IR XML file at `comm_size` bytes.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CgStatus cg_trace_from_msccl(const char *path, uint64_t comm_size, struct CgTrace **out);

/**
 * Writes the trace in canonical form.
 *
 * # Safety
 * `trace` must come from this library; `path` must be NUL-terminated.
 */
enum CgStatus cg_trace_save(const struct CgTrace *trace, const char *path);

/**
 * Number of ranks, or 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or come from this library.
 */
size_t cg_trace_num_ranks(const struct CgTrace *trace);

/**
 * Total node count over all ranks, or 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or come from this library.
 */
size_t cg_trace_num_nodes(const struct CgTrace *trace);

/**
 * Symbolically validates the trace. A stuck execution reports
 * `CG_VERDICT_STUCK` with status `CG_STATUS_OK`.
 *
 * # Safety
 * `trace` must come from this library; `verdict` must be writable.
 * `json_out` may be NULL; otherwise it receives the verdict document,
 * to be released with `cg_string_free`.
 */
enum CgStatus cg_trace_validate(const struct CgTrace *trace,
                                enum CgVerdict *verdict,
                                char **json_out);

/**
 * Simulates an expanded trace. `net_json` is a network configuration
 * document; `topology` optionally overrides its topology with a token
 * such as "ring" or "mesh2d:8x8" and may be NULL.
 *
 * # Safety
 * Pointers must be valid as described; `out` must be writable.
 */
enum CgStatus cg_simulate(const struct CgTrace *trace,
                          const char *net_json,
                          const char *topology,
                          struct CgReport **out);

/**
 * Total simulated duration in seconds, or NaN for NULL.
 *
 * # Safety
 * `report` must be NULL or come from this library.
 */
double cg_report_total_duration(const struct CgReport *report);

/**
 * The full report as JSON; release with `cg_string_free`.
 *
 * # Safety
 * `report` must come from this library; `out` must be writable.
 */
enum CgStatus cg_report_to_json(const struct CgReport *report, char **out);

/**
 * # Safety
 * `trace` must be NULL or an unfreed handle from this library.
 */
void cg_trace_free(struct CgTrace *trace);

/**
 * # Safety
 * `report` must be NULL or an unfreed handle from this library.
 */
void cg_report_free(struct CgReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void cg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COLLGRAPH_H */
