#ifndef LTP_DDPC_H
#define LTP_DDPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LtpdStatus {
  LTPD_STATUS_OK = 0,
  LTPD_STATUS_NULL_POINTER = 1,
  LTPD_STATUS_INVALID_ARGUMENT = 2,
  LTPD_STATUS_DIMENSION = 3,
  LTPD_STATUS_INSUFFICIENT_DATA = 4,
  LTPD_STATUS_INFEASIBLE = 5,
  LTPD_STATUS_SOLVER = 6,
  LTPD_STATUS_PARSE = 7,
  LTPD_STATUS_IO = 8,
  LTPD_STATUS_PANIC = 9,
} LtpdStatus;

/**
 * Configured predictive controller.
 */
typedef struct LtpdController LtpdController;

/**
 * Offline data matrices, one set per index.
 */
typedef struct LtpdData LtpdData;

/**
 * Periodic state-space model.
 */
typedef struct LtpdSystem LtpdSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Owned by the library.
 */
const char *ltpd_last_error(void);

/**
 * Library version as a static string.
 */
const char *ltpd_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ltpd_string_free(char *s);

/**
 * Parses a system from JSON (`{"T","n","m","p","A","B","C","D"}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LtpdStatus ltpd_system_from_json(const char *json, struct LtpdSystem **out);

/**
 * The spring-damper benchmark plant discretized with step `dt` and period `period`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LtpdStatus ltpd_system_msd(double dt, size_t period, struct LtpdSystem **out);

/**
 * # Safety
 * `sys` must be NULL or a handle from this library that has not been freed.
 */
void ltpd_system_free(struct LtpdSystem *sys);

/**
 * Writes `(n, m, p, T)`.
 *
 * # Safety
 * `sys` must be a live handle and `dims` must point to four writable values.
 */
enum LtpdStatus ltpd_system_dims(const struct LtpdSystem *sys, size_t *dims);

/**
 * Serializes the system; release the result with [`ltpd_string_free`].
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum LtpdStatus ltpd_system_to_json(const struct LtpdSystem *sys, char **out);

/**
 * Simulates `steps` steps from `x0` at time `t1`. `u` is `m x steps` and
 * `y_out` receives `p x steps`, both column-major.
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths.
 */
enum LtpdStatus ltpd_system_simulate(const struct LtpdSystem *sys,
                                     int64_t t1,
                                     const double *x0,
                                     size_t x0_len,
                                     const double *u,
                                     size_t steps,
                                     double *y_out,
                                     size_t y_len);

/**
 * Drives `sys` from rest at time `t_d1` with `length` unit-variance Gaussian
 * inputs (stream `seed`) and builds the data matrices for horizons `l`, `n`.
 *
 * # Safety
 * `sys` must be a live handle and `out` a valid pointer.
 */
enum LtpdStatus ltpd_data_collect(const struct LtpdSystem *sys,
                                  int64_t t_d1,
                                  size_t length,
                                  size_t l,
                                  size_t n,
                                  uint64_t seed,
                                  struct LtpdData **out);

/**
 * Parses data matrices from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LtpdStatus ltpd_data_from_json(const char *json, struct LtpdData **out);

/**
 * # Safety
 * `data` must be NULL or a handle from this library that has not been freed.
 */
void ltpd_data_free(struct LtpdData *data);

/**
 * Index of the data set matching time `t`; fails when the record start is unknown.
 *
 * # Safety
 * `data` must be a live handle and `theta` a valid pointer.
 */
enum LtpdStatus ltpd_data_proper_index(const struct LtpdData *data, int64_t t, size_t *theta);

/**
 * Data-driven controller; `config` is a controller configuration in JSON
 * whose mode is one of `pdeepc`, `pspc`, `reg_pdeepc`, `reg_pspc`.
 *
 * # Safety
 * `data` must be a live handle, `config` a NUL-terminated string, `out` valid.
 */
enum LtpdStatus ltpd_controller_new_data(const struct LtpdData *data,
                                         const char *config,
                                         struct LtpdController **out);

/**
 * Model-based controller (mode `mpc`).
 *
 * # Safety
 * `sys` must be a live handle, `config` a NUL-terminated string, `out` valid.
 */
enum LtpdStatus ltpd_controller_new_model(const struct LtpdSystem *sys,
                                          const char *config,
                                          struct LtpdController **out);

/**
 * # Safety
 * `ctl` must be NULL or a handle from this library that has not been freed.
 */
void ltpd_controller_free(struct LtpdController *ctl);

/**
 * Solves with data set `theta` for the past `[u_p; y_p]` (`(m+p)L` values)
 * and stacked reference `r` (`pN`); writes the optimal inputs (`mN`) and,
 * when `y_out` is non-NULL, the predicted outputs (`pN`).
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths.
 */
enum LtpdStatus ltpd_controller_solve_data(const struct LtpdController *ctl,
                                           size_t theta,
                                           const double *w_past,
                                           size_t w_len,
                                           const double *r,
                                           size_t r_len,
                                           double *u_out,
                                           size_t u_len,
                                           double *y_out,
                                           size_t y_len);

/**
 * Solves from state `x` (`n`) at time `t`; outputs as in [`ltpd_controller_solve_data`].
 *
 * # Safety
 * Pointers must reference arrays of the stated lengths.
 */
enum LtpdStatus ltpd_controller_solve_model(const struct LtpdController *ctl,
                                            int64_t t,
                                            const double *x,
                                            size_t x_len,
                                            const double *r,
                                            size_t r_len,
                                            double *u_out,
                                            size_t u_len,
                                            double *y_out,
                                            size_t y_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LTP_DDPC_H */
