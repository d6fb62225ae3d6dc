#ifndef QSTACKEL_H
#define QSTACKEL_H

#include <stdbool.h>
#include <stddef.h>

/**
 * Family selector for [`qs_system_solve`].
 */
typedef enum QsFamily {
  QS_FAMILY_GEODESIC = 0,
  QS_FAMILY_ORDINARY = 1,
  QS_FAMILY_MAGNETIC = 2,
} QsFamily;

/**
 * Result code of every fallible call.
 */
typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_UTF8 = 2,
  QS_STATUS_INVALID_CONFIG = 3,
  QS_STATUS_PARSE = 4,
  QS_STATUS_CERTIFICATION_FAILED = 5,
  QS_STATUS_BLOW_UP = 6,
  QS_STATUS_UNSUPPORTED = 7,
  QS_STATUS_INTERNAL = 8,
} QsStatus;

/**
 * Opaque deformed system.
 */
typedef struct QsSystem QsSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *qs_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *qs_status_string(enum QsStatus status);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library and not yet freed.
 */
void qs_string_free(char *s);

/**
 * Solve the deformation of a family over its full exponent range.
 * `gauge` may be null (zero tails), `"solve"`, or a preset name.
 *
 * # Safety
 * `gauge` must be null or a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_system_solve(size_t n,
                              size_t m,
                              enum QsFamily family,
                              const char *gauge,
                              struct QsSystem **out);

/**
 * Load a system from its JSON file format.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_system_from_json(const char *json, struct QsSystem **out);

/**
 * Serialize a system; release the result with [`qs_string_free`].
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum QsStatus qs_system_to_json(const struct QsSystem *sys, char **out);

/**
 * Dimension `n` of a system, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t qs_system_dimension(const struct QsSystem *sys);

/**
 * Substitute an exact value (rational or expression) for a parameter.
 *
 * # Safety
 * `sys` must be a live handle; `name` and `value` NUL-terminated strings.
 */
enum QsStatus qs_system_bind(struct QsSystem *sys, const char *name, const char *value);

/**
 * Certify the Frobenius condition. `passes` reports closability by tails,
 * `exact_zero` that every residual vanishes identically. Either may be null.
 *
 * # Safety
 * `sys` must be a live handle; non-null out pointers must be writable.
 */
enum QsStatus qs_system_certify(const struct QsSystem *sys, bool *passes, bool *exact_zero);

/**
 * Largest endpoint distance over all axis orderings of the box
 * `[lo_r, hi_r]`, starting from `(q, p)` at the corner `lo`. All parameters
 * must be bound. Arrays have length `n`.
 *
 * # Safety
 * `sys` must be a live handle; the arrays must hold `n` doubles; `out` writable.
 */
enum QsStatus qs_path_independence(const struct QsSystem *sys,
                                   const double *q,
                                   const double *p,
                                   const double *lo,
                                   const double *hi,
                                   double h,
                                   double *out);

/**
 * Derive a Painlevé normal form ("PI".."PIV"). `text` receives the final
 * equation (free with [`qs_string_free`]); `matches` whether it equals the
 * canonical form exactly.
 *
 * # Safety
 * `target` must be NUL-terminated; out pointers must be writable.
 */
enum QsStatus qs_painleve(const char *target, char **text, bool *matches);

/**
 * Release a system handle. Null is ignored.
 *
 * # Safety
 * `sys` must be null or a handle from this library not yet freed.
 */
void qs_system_free(struct QsSystem *sys);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSTACKEL_H */
