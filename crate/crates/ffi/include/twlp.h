#ifndef TWLP_H
#define TWLP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwlpMultiplier {
  TWLP_MULTIPLIER_THT = 0,
  TWLP_MULTIPLIER_RIESZ1 = 1,
  TWLP_MULTIPLIER_RIESZ2 = 2,
  TWLP_MULTIPLIER_FLAG1 = 3,
  TWLP_MULTIPLIER_FLAG2 = 4,
  TWLP_MULTIPLIER_FLAG3 = 5,
} TwlpMultiplier;

typedef enum TwlpStatus {
  TWLP_STATUS_OK = 0,
  TWLP_STATUS_NULL_POINTER = 1,
  TWLP_STATUS_INVALID_ARGUMENT = 2,
  TWLP_STATUS_INVALID_GRID = 3,
  TWLP_STATUS_SHAPE_MISMATCH = 4,
  TWLP_STATUS_NUMERICAL = 5,
  TWLP_STATUS_IO = 6,
  TWLP_STATUS_PANIC = 7,
} TwlpStatus;

/**
 * Opaque complex signal on a periodic grid.
 */
typedef struct TwlpSignal TwlpSignal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *twlp_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated, always NUL-terminated
 * when `cap > 0`) and returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t twlp_last_error(char *buf, size_t cap);

/**
 * Creates a real signal on an `n1 × n2` grid with spacing `h` from `len = n1·n2` row-major samples.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` to a writable handle slot.
 */
enum TwlpStatus twlp_signal_new(size_t n1,
                                size_t n2,
                                double h,
                                const double *values,
                                size_t len,
                                struct TwlpSignal **out);

/**
 * Releases a handle (null is ignored).
 *
 * # Safety
 * `sig` must be null or a handle from this library that has not been freed.
 */
void twlp_signal_free(struct TwlpSignal *sig);

/**
 * # Safety
 * `sig` must be a live handle; `n1` and `n2` must be writable.
 */
enum TwlpStatus twlp_signal_shape(const struct TwlpSignal *sig, size_t *n1, size_t *n2);

/**
 * Copies the real parts (row-major) into `out`, which must hold exactly `n1·n2` doubles.
 *
 * # Safety
 * `sig` must be a live handle and `out` must point to `len` writable doubles.
 */
enum TwlpStatus twlp_signal_real(const struct TwlpSignal *sig, double *out, size_t len);

/**
 * Imaginary parts, as `twlp_signal_real`.
 *
 * # Safety
 * As `twlp_signal_real`.
 */
enum TwlpStatus twlp_signal_imag(const struct TwlpSignal *sig, double *out, size_t len);

/**
 * Grid L² norm.
 *
 * # Safety
 * `sig` must be a live handle and `out` writable.
 */
enum TwlpStatus twlp_signal_norm_l2(const struct TwlpSignal *sig, double *out);

/**
 * Applies a Fourier multiplier, returning a new handle in `out`.
 *
 * # Safety
 * `sig` must be a live handle and `out` a writable handle slot.
 */
enum TwlpStatus twlp_filter(const struct TwlpSignal *sig,
                            enum TwlpMultiplier mult,
                            struct TwlpSignal **out);

/**
 * Region code of a frequency: 0 on the nodal lines, 1..=6 for sectors I..VI.
 */
int twlp_classify_region(double xi1, double xi2);

/**
 * Runs one verification suite with the default configuration and the given seed.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `value` and `pass` must be writable.
 */
enum TwlpStatus twlp_verify_suite(const char *name, uint64_t seed, double *value, int *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWLP_H */
