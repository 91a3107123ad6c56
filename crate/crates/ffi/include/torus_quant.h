#ifndef TORUS_QUANT_H
#define TORUS_QUANT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TqStatus {
  TQ_STATUS_OK = 0,
  TQ_STATUS_NULL_POINTER = 1,
  TQ_STATUS_INVALID_ARGUMENT = 2,
  TQ_STATUS_DIMENSION_MISMATCH = 3,
  TQ_STATUS_PARSE_ERROR = 4,
  TQ_STATUS_TOO_LARGE = 5,
  TQ_STATUS_NON_CONVERGENCE = 6,
  TQ_STATUS_PANIC = 7,
} TqStatus;

typedef enum TqOrientation {
  TQ_ORIENTATION_STAR = 0,
  TQ_ORIENTATION_CHECK_STAR = 1,
  TQ_ORIENTATION_MOYAL = 2,
} TqOrientation;

typedef enum TqPolarization {
  TQ_POLARIZATION_PT = 0,
  TQ_POLARIZATION_PT_CHECK = 1,
} TqPolarization;

typedef enum TqNormKind {
  TQ_NORM_KIND_L1 = 0,
  TQ_NORM_KIND_LINF = 1,
  TQ_NORM_KIND_L2 = 2,
} TqNormKind;

// Dense operator handle.
typedef struct TqOperator TqOperator;

// Trigonometric polynomial handle.
typedef struct TqTrigPoly TqTrigPoly;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *tq_version(void);

// Message of the last failing call on this thread, or null.
const char *tq_last_error_message(void);

// Creates the zero polynomial on the `2n`-torus.
//
// # Safety
// `out` must be valid for writes.
enum TqStatus tq_trigpoly_new(size_t n, struct TqTrigPoly **out);

// Adds `(re + i im) exp(2 pi i (p.x + q.y))`; `p` and `q` point to `n` integers each.
//
// # Safety
// `poly` must be a live handle; `p` and `q` must point to `n` readable integers.
enum TqStatus tq_trigpoly_add_term(struct TqTrigPoly *poly,
                                   const int64_t *p,
                                   const int64_t *q,
                                   double re,
                                   double im);

// Projects an expression onto frequencies `|p_i|, |q_i| <= bandwidth`; `grid = 0` picks the default grid.
//
// # Safety
// `expr` must be a NUL-terminated string; `out` must be valid for writes.
enum TqStatus tq_trigpoly_from_expr(const char *expr,
                                    size_t n,
                                    size_t bandwidth,
                                    size_t grid,
                                    struct TqTrigPoly **out);

// Number of stored coefficients, 0 for a null handle.
//
// # Safety
// `poly` must be null or a live handle.
size_t tq_trigpoly_len(const struct TqTrigPoly *poly);

// Evaluates at `(x, y)`, each of length `n`.
//
// # Safety
// `poly` must be a live handle; `x`, `y` must point to `n` doubles; outputs must be writable.
enum TqStatus tq_trigpoly_evaluate(const struct TqTrigPoly *poly,
                                   const double *x,
                                   const double *y,
                                   double *out_re,
                                   double *out_im);

// # Safety
// `poly` must be null or a handle not yet freed.
void tq_trigpoly_free(struct TqTrigPoly *poly);

// Untruncated star product at `hbar = 1/k`.
//
// # Safety
// `f`, `g` must be live handles; `out` must be valid for writes.
enum TqStatus tq_star_exact(const struct TqTrigPoly *f,
                            const struct TqTrigPoly *g,
                            uint64_t k,
                            enum TqOrientation o,
                            struct TqTrigPoly **out);

// Dense Toeplitz operator of `f` at level `k`.
//
// # Safety
// `f` must be a live handle; `out` must be valid for writes.
enum TqStatus tq_toeplitz_assemble(const struct TqTrigPoly *f,
                                   size_t k,
                                   enum TqPolarization polarization,
                                   struct TqOperator **out);

// Side length `k^n`, 0 for a null handle.
//
// # Safety
// `op` must be null or a live handle.
size_t tq_operator_dim(const struct TqOperator *op);

// Matrix entry `(row, col)` in the row-major basis order.
//
// # Safety
// `op` must be a live handle; outputs must be writable.
enum TqStatus tq_operator_entry(const struct TqOperator *op,
                                size_t row,
                                size_t col,
                                double *out_re,
                                double *out_im);

// # Safety
// `op` must be a live handle; outputs must be writable.
enum TqStatus tq_operator_trace(const struct TqOperator *op, double *out_re, double *out_im);

// # Safety
// `op` must be a live handle; `out` must be writable.
enum TqStatus tq_operator_norm(const struct TqOperator *op, enum TqNormKind kind, double *out);

// # Safety
// `op` must be null or a handle not yet freed.
void tq_operator_free(struct TqOperator *op);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORUS_QUANT_H */
