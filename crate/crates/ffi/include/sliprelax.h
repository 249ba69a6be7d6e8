#ifndef SLIPRELAX_H
#define SLIPRELAX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A numerical guard tripped or a smoothing budget was exceeded.
   */
  SR_STATUS_GUARD = 3,
  SR_STATUS_CONFIG = 4,
  SR_STATUS_IO = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SR_STATUS_INTERNAL = 6,
} SrStatus;

/**
 * Scalar field on a cell-centred grid, stored x-fastest.
 */
typedef struct SrScalarField SrScalarField;

/**
 * Slip-plane normal with two Burgers directions.
 */
typedef struct SrSlipSystem SrSlipSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *sr_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void sr_string_free(char *s);

/**
 * Creates a field on the box `[0, extents]` with `resolution` cells per
 * axis; `values` holds `nx·ny·nz` entries, x-fastest.
 *
 * # Safety
 * `extents` and `resolution` point to 3 elements, `values` to `len`.
 */
enum SrStatus sr_scalar_field_new(const double *extents,
                                  const uintptr_t *resolution,
                                  const double *values,
                                  uintptr_t len,
                                  struct SrScalarField **out);

/**
 * # Safety
 * `field` must come from this library and not be freed twice.
 */
void sr_scalar_field_free(struct SrScalarField *field);

/**
 * Number of cells in `field`, or 0 for null.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
uintptr_t sr_scalar_field_len(const struct SrScalarField *field);

/**
 * Copies the values of `field` into `out`, which holds `len` entries.
 *
 * # Safety
 * `field` must be live; `out` must have room for `len` values.
 */
enum SrStatus sr_scalar_field_values(const struct SrScalarField *field, double *out, uintptr_t len);

/**
 * Total variation of one `ny × nz` slice (y-fastest) with replicated
 * boundaries.
 *
 * # Safety
 * `values` must hold `ny·nz` entries; `out` must be writable.
 */
enum SrStatus sr_planar_tv(const double *values,
                           uintptr_t ny,
                           uintptr_t nz,
                           double hy,
                           double hz,
                           double *out);

/**
 * Slice-integrated total variation of `field` along x.
 *
 * # Safety
 * `field` must be live; `out` must be writable.
 */
enum SrStatus sr_curl_norm(const struct SrScalarField *field, double *out);

/**
 * Clamps `field` to `[-level, level]` into a new handle.
 *
 * # Safety
 * `field` must be live; `out` must be writable.
 */
enum SrStatus sr_truncate(const struct SrScalarField *field,
                          double level,
                          struct SrScalarField **out);

/**
 * Convolves `field` with the default kernel of the given radius. With
 * `reflect` every face is an even mirror; otherwise values outside are
 * zero and the support must stay clear of the faces.
 *
 * # Safety
 * `field` must be live; `out` must be writable.
 */
enum SrStatus sr_mollify(const struct SrScalarField *field,
                         double radius,
                         bool reflect,
                         struct SrScalarField **out);

/**
 * # Safety
 * `m`, `b1` and `b2` point to 3 elements; `out` must be writable.
 */
enum SrStatus sr_slip_system_new(const double *m,
                                 const double *b1,
                                 const double *b2,
                                 struct SrSlipSystem **out);

/**
 * # Safety
 * `system` must come from this library and not be freed twice.
 */
void sr_slip_system_free(struct SrSlipSystem *system);

/**
 * Splits an in-plane slip vector `s` into `c1·b1 + c2·b2`.
 *
 * # Safety
 * `system` must be live, `s` point to 3 elements, `c1`/`c2` be writable.
 */
enum SrStatus sr_decompose_slip(const struct SrSlipSystem *system,
                                const double *s,
                                double *c1,
                                double *c2);

/**
 * Runs a command (`energy`, `laminate`, `smooth`, `verify`, `export`) on a
 * JSON scenario. Relative paths in the scenario resolve against
 * `base_dir` (null: current directory); files go to `out_dir` (null: no
 * files). `seed` may be null. On success `report` receives the JSON report
 * and `exit_code` the command-line exit status; on a command failure the
 * status is set and `exit_code` still receives the matching status.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; out-pointers writable.
 */
enum SrStatus sr_run_command(const char *command,
                             const char *config_json,
                             const char *base_dir,
                             const char *out_dir,
                             const uint64_t *seed,
                             bool deterministic,
                             char **report,
                             int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLIPRELAX_H */
