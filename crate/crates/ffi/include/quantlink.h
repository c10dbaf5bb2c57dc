#ifndef QUANTLINK_H
#define QUANTLINK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum QlStatus {
    QL_STATUS_OK = 0,
    QL_STATUS_NULL_POINTER = 1,
    QL_STATUS_INVALID_ARGUMENT = 2,
    QL_STATUS_DIMENSION_MISMATCH = 3,
    QL_STATUS_NUMERICAL = 4,
    QL_STATUS_CONFIG = 5,
    QL_STATUS_IO = 6,
    QL_STATUS_INVALID_UTF8 = 7,
    QL_STATUS_PANIC = 8,
} QlStatus;

/**
 * Opaque quantizer handle.
 */
typedef struct QlQuantizer QlQuantizer;

/**
 * Hermite coefficients of a quantizer.
 */
typedef struct QlHermite {
    double omega1;
    double omega2;
    double lambda;
} QlHermite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ql_version(void);

/**
 * Length in bytes of the last error message of this thread, including the
 * terminating NUL; 0 if the last call succeeded.
 */
size_t ql_last_error_length(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes). Returns the number of bytes written excluding
 * the NUL, or -1 if `buf` is null or `len` is 0.
 *
 * # Safety
 * `buf` must be valid for writes of `len` bytes.
 */
ptrdiff_t ql_last_error_message(char *buf, size_t len);

/**
 * MSE-optimal mid-rise uniform quantizer with `bits` bits for a
 * unit-variance real input.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum QlStatus ql_quantizer_optimal(uint32_t bits, struct QlQuantizer **out);

/**
 * Mid-rise uniform quantizer with levels `(k + 1/2) step`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum QlStatus ql_quantizer_uniform(uint32_t bits, double step, struct QlQuantizer **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `q` must come from a `ql_quantizer_*` constructor and not be used again.
 */
void ql_quantizer_free(struct QlQuantizer *q);

/**
 * Resolution in bits.
 *
 * # Safety
 * `q` must be a live handle and `out` valid for a write.
 */
enum QlStatus ql_quantizer_bits(const struct QlQuantizer *q, uint32_t *out);

/**
 * Quantizes `len` real samples from `input` into `output`. The two buffers
 * may alias.
 *
 * # Safety
 * `q` must be a live handle; `input` and `output` must be valid for `len`
 * reads and writes respectively.
 */
enum QlStatus ql_quantizer_apply(const struct QlQuantizer *q,
                                 const double *input,
                                 double *output,
                                 size_t len);

/**
 * Distortion factor `E[(x - Q(x))^2]` for a unit-variance Gaussian input.
 *
 * # Safety
 * `q` must be a live handle and `out` valid for a write.
 */
enum QlStatus ql_quantizer_distortion_factor(const struct QlQuantizer *q, double *out);

/**
 * Hermite coefficients. With `design_variance` the quantizer is evaluated
 * at its unit-variance real design input, otherwise at a unit-variance
 * complex input (real variance 1/2) without gain control.
 *
 * # Safety
 * `q` must be a live handle and `out` valid for a write.
 */
enum QlStatus ql_quantizer_hermite(const struct QlQuantizer *q,
                                   bool design_variance,
                                   struct QlHermite *out);

/**
 * Runs the experiment described by the JSON `config` and writes its CSV to
 * `csv_path`. `threads = 0` uses all cores. The row count is stored in
 * `rows` when it is non-null.
 *
 * # Safety
 * `config` and `csv_path` must be NUL-terminated strings; `rows` must be
 * null or valid for a write.
 */
enum QlStatus ql_run_experiment(const char *config,
                                const char *csv_path,
                                size_t threads,
                                size_t *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUANTLINK_H */
