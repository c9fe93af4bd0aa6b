#ifndef VORTEX_H
#define VORTEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VortexStatus {
  VORTEX_STATUS_OK = 0,
  VORTEX_STATUS_NULL_POINTER = 1,
  VORTEX_STATUS_INVALID_INPUT = 2,
  VORTEX_STATUS_SOLVABILITY = 3,
  VORTEX_STATUS_NOT_CONVERGED = 4,
  VORTEX_STATUS_GRID_MISMATCH = 5,
  VORTEX_STATUS_CHECKSUM = 6,
  VORTEX_STATUS_IO = 7,
  VORTEX_STATUS_PANIC = 8,
  VORTEX_STATUS_BUFFER_TOO_SMALL = 9,
} VortexStatus;

typedef struct VortexPlane VortexPlane;

typedef struct VortexProduct VortexProduct;

typedef struct VortexSurface VortexSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message (NUL-terminated, truncated
 * to `cap`) into `buf`. Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
uintptr_t vortex_last_error(char *buf, uintptr_t cap);

/**
 * Modified Bessel function K0.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum VortexStatus vortex_bessel_k0(double r, double *out);

/**
 * Run a TOML config as the `vortex` binary would; returns its exit code
 * (or -1 for a bad path string).
 *
 * # Safety
 * `config_path` must be null or a NUL-terminated string.
 */
int32_t vortex_run_config(const char *config_path);

/**
 * Solve for the plane vortex with zeros `(xs[i], ys[i])` of multiplicity
 * `mult[i]` on `[-radius, radius]^2` with `n` cells per side.
 *
 * # Safety
 * The three arrays must each hold `count` elements; `out` must be valid.
 */
enum VortexStatus vortex_plane_solve(const double *xs,
                                     const double *ys,
                                     const uint32_t *mult,
                                     uintptr_t count,
                                     double radius,
                                     uintptr_t n,
                                     struct VortexPlane **out);

/**
 * Number of grid values (`n * n`).
 *
 * # Safety
 * `h` must be null or a live handle.
 */
uintptr_t vortex_plane_len(const struct VortexPlane *h);

/**
 * Energy (equal to pi times the degree on solutions) and flux.
 *
 * # Safety
 * `h` must be a live handle; the outputs must be null or valid.
 */
enum VortexStatus vortex_plane_energy(const struct VortexPlane *h, double *energy, double *flux);

/**
 * Copy the conformal correction alpha (row-major, `ix * n + iy`).
 *
 * # Safety
 * `h` must be a live handle and `out` must hold `cap` doubles.
 */
enum VortexStatus vortex_plane_alpha(const struct VortexPlane *h, double *out, uintptr_t cap);

/**
 * # Safety
 * `h` must be null or a handle from [`vortex_plane_solve`] not yet freed.
 */
void vortex_plane_free(struct VortexPlane *h);

/**
 * Solve the torus vortex equation for the section with theta-basis
 * coefficients `re[i] + i im[i]`, `i < degree`.
 *
 * # Safety
 * `re` and `im` must hold `degree` elements; `out` must be valid.
 */
enum VortexStatus vortex_surface_solve(double period_u,
                                       double period_v,
                                       uintptr_t n_u,
                                       uintptr_t n_v,
                                       double k0,
                                       uintptr_t degree,
                                       const double *re,
                                       const double *im,
                                       struct VortexSurface **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
uintptr_t vortex_surface_len(const struct VortexSurface *h);

/**
 * Copy `|sigma|^2` (`iu * n_v + iv`).
 *
 * # Safety
 * `h` must be a live handle and `out` must hold `cap` doubles.
 */
enum VortexStatus vortex_surface_sigma_sq(const struct VortexSurface *h,
                                          double *out,
                                          uintptr_t cap);

/**
 * Final residual norm and the solvability constant c.
 *
 * # Safety
 * `h` must be a live handle; the outputs must be null or valid.
 */
enum VortexStatus vortex_surface_info(const struct VortexSurface *h, double *residual, double *c);

/**
 * # Safety
 * `h` must be null or a handle from [`vortex_surface_solve`] not yet freed.
 */
void vortex_surface_free(struct VortexSurface *h);

/**
 * Solve the product problem for `f(z) = sum_k gamma_k z^k` on a degree-`m`
 * bundle over a square torus of the given volume. `re`/`im` hold
 * `(poly_degree + 1) * max(m, 1)` values, coefficient `k` first.
 *
 * # Safety
 * `re` and `im` must hold that many elements; `out` must be valid.
 */
enum VortexStatus vortex_product_solve(double radius,
                                       uintptr_t n,
                                       double volume,
                                       uintptr_t n_torus,
                                       double k0,
                                       uintptr_t m,
                                       uintptr_t poly_degree,
                                       const double *re,
                                       const double *im,
                                       struct VortexProduct **out);

/**
 * # Safety
 * `h` must be null or a live handle.
 */
uintptr_t vortex_product_len(const struct VortexProduct *h);

/**
 * Analytic and topological energy.
 *
 * # Safety
 * `h` must be a live handle; the outputs must be null or valid.
 */
enum VortexStatus vortex_product_energy(const struct VortexProduct *h, double *e_an, double *e_top);

/**
 * Copy alpha (plane index major, torus index minor).
 *
 * # Safety
 * `h` must be a live handle and `out` must hold `cap` doubles.
 */
enum VortexStatus vortex_product_alpha(const struct VortexProduct *h, double *out, uintptr_t cap);

/**
 * # Safety
 * `h` must be null or a handle from [`vortex_product_solve`] not yet freed.
 */
void vortex_product_free(struct VortexProduct *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VORTEX_H */
