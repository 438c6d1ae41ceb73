#ifndef DISPERSED_META_H
#define DISPERSED_META_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DM_OK 0

#define DM_ERR_NULL 1

#define DM_ERR_INVALID_ARGUMENT 2

#define DM_ERR_DOMAIN 3

#define DM_ERR_NUMERIC 4

#define DM_ERR_PANIC 5

/**
 * Exponential forecaster with its own random stream.
 */
typedef struct DmForecaster DmForecaster;

/**
 * Meta-initializer over task-optimum balls.
 */
typedef struct DmMetaInit DmMetaInit;

/**
 * Piecewise-constant function on a closed interval.
 */
typedef struct DmPiecewise DmPiecewise;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dm_last_error_message(char *buf, size_t len);

/**
 * Builds a function from `n_values + 1` breakpoints spanning the domain
 * and `n_values` cell values.
 *
 * # Safety
 * Array arguments must point to the stated number of elements; `out` must
 * be writable.
 */
int32_t dm_pc_new(const double *breakpoints,
                  size_t n_breakpoints,
                  const double *values,
                  size_t n_values,
                  struct DmPiecewise **out);

/**
 * # Safety
 * `pc` must be null or a handle from `dm_pc_new` not yet freed.
 */
void dm_pc_free(struct DmPiecewise *pc);

/**
 * Value at `x` (cells are closed on the left).
 *
 * # Safety
 * `pc` must be a live handle and `out` writable.
 */
int32_t dm_pc_eval(const struct DmPiecewise *pc, double x, double *out);

/**
 * Number of cells, or 0 for a null handle.
 *
 * # Safety
 * `pc` must be null or a live handle.
 */
size_t dm_pc_num_cells(const struct DmPiecewise *pc);

/**
 * Integral over the domain.
 *
 * # Safety
 * `pc` must be a live handle and `out` writable.
 */
int32_t dm_pc_integral(const struct DmPiecewise *pc, double *out);

/**
 * Forecaster started from `init` (a nonnegative function with positive
 * mass; null means uniform on `[lo, hi]`).
 *
 * # Safety
 * `init` must be null or a live handle; `out` writable.
 */
int32_t dm_forecaster_new(double lo,
                          double hi,
                          const struct DmPiecewise *init,
                          double lambda,
                          uint64_t seed,
                          struct DmForecaster **out);

/**
 * # Safety
 * `f` must be null or a live forecaster handle.
 */
void dm_forecaster_free(struct DmForecaster *f);

/**
 * Draws the next parameter.
 *
 * # Safety
 * `f` must be a live handle and `out` writable.
 */
int32_t dm_forecaster_sample(struct DmForecaster *f, double *out);

/**
 * Applies one loss with values in `[0, 1]` on the forecaster's domain.
 *
 * # Safety
 * Both handles must be live.
 */
int32_t dm_forecaster_update(struct DmForecaster *f, const struct DmPiecewise *loss);

/**
 * Rounds applied so far, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t dm_forecaster_round(const struct DmForecaster *f);

/**
 * # Safety
 * `out` must be writable.
 */
int32_t dm_meta_init_new(double lo, double hi, double gamma, double eta, struct DmMetaInit **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
void dm_meta_init_free(struct DmMetaInit *h);

/**
 * Records the optimum ball `[ball_lo, ball_hi]` of a finished task.
 *
 * # Safety
 * `h` must be a live handle.
 */
int32_t dm_meta_init_observe(struct DmMetaInit *h, double ball_lo, double ball_hi);

/**
 * Current initialization as a new function handle (density with mass 1).
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
int32_t dm_meta_init_density(const struct DmMetaInit *h, struct DmPiecewise **out);

/**
 * `sqrt(−log Z / m)` with `Z` the mass fraction of `init` in the ball.
 *
 * # Safety
 * `init` must be a live handle and `out` writable.
 */
int32_t dm_theory_lambda(const struct DmPiecewise *init,
                         double ball_lo,
                         double ball_hi,
                         size_t m,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISPERSED_META_H */
