/* C interface for the csen support-estimation toolkit.
 *
 * Maintained by hand alongside ../src/lib.rs; tests/abi.rs exercises every
 * function declared here. All fallible calls return csen_status and write
 * results through out-pointers. Handles are opaque and must be released
 * with the matching *_free.
 */

#ifndef CSEN_H
#define CSEN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum csen_status {
  CSEN_OK = 0,
  CSEN_INVALID_ARGUMENT = 1,
  CSEN_NUMERIC_FAILURE = 2,
  CSEN_IO_ERROR = 3,
  CSEN_FORMAT_ERROR = 4,
  CSEN_RANK_DEFICIENT = 5,
  CSEN_GUARD_EXCEEDED = 6,
  CSEN_DIVERGED = 7,
  CSEN_UNDEFINED_SNR = 8,
  CSEN_NULL_POINTER = 9,
  CSEN_PANIC = 10
} csen_status;

typedef struct csen_matrix csen_matrix;
typedef struct csen_proxy csen_proxy;
typedef struct csen_model csen_model;

typedef struct csen_solver_info {
  uint64_t iterations;
  int converged;
  double objective;
} csen_solver_info;

/* Library version, e.g. "0.1.0". Static storage. */
const char *csen_version(void);

/* Message for the last failing call on this thread. Valid until the next
 * failing call on the same thread. */
const char *csen_last_error_message(void);

/* ------------------------------------------------------------ matrices */

/* Row-major rows*cols values. */
csen_status csen_matrix_create(size_t rows, size_t cols, const double *data,
                               csen_matrix **out);
/* Entries i.i.d. N(0, 1/rows); deterministic in the seed. */
csen_status csen_matrix_gaussian(size_t rows, size_t cols, uint64_t seed,
                                 csen_matrix **out);
csen_status csen_matrix_load_csm1(const char *path, csen_matrix **out);
csen_status csen_matrix_save_csm1(const csen_matrix *m, const char *path);
size_t csen_matrix_rows(const csen_matrix *m);
size_t csen_matrix_cols(const csen_matrix *m);
/* Borrow of the row-major data; valid while the handle lives. */
const double *csen_matrix_data(const csen_matrix *m);
void csen_matrix_free(csen_matrix *m);

/* ------------------------------------------------------------- proxies */

/* kind: 0 = maximum correlation (B = D^T), 1 = LMMSE
 * (B = (D^T D + lambda I)^-1 D^T). grid_h*grid_w must equal the column
 * count of d. */
csen_status csen_proxy_build(const csen_matrix *d, int kind, double lambda,
                             size_t grid_h, size_t grid_w, csen_proxy **out);
/* out receives grid_h*grid_w values (row-major). y_len must match the row
 * count of the dictionary. */
csen_status csen_proxy_apply(const csen_proxy *p, const double *y,
                             size_t y_len, double *out);
void csen_proxy_free(csen_proxy *p);

/* ------------------------------------------------------------- solvers */

/* Minimize ||Dx-y||^2 + lambda*||x||_1. x_out receives cols(d) values. */
csen_status csen_solve_lasso(const csen_matrix *d, const double *y,
                             size_t y_len, double lambda, size_t max_iters,
                             double rel_tol, double *x_out,
                             csen_solver_info *info);
/* Weighted variant, weights points to cols(d) positive values. */
csen_status csen_solve_weighted_lasso(const csen_matrix *d, const double *y,
                                      size_t y_len, double lambda,
                                      const double *weights, size_t max_iters,
                                      double rel_tol, double *x_out,
                                      csen_solver_info *info);
/* Greedy pursuit with at most k_max atoms, stopping at ||r|| <= res_tol. */
csen_status csen_solve_omp(const csen_matrix *d, const double *y, size_t y_len,
                           size_t k_max, double res_tol, double *x_out,
                           csen_solver_info *info);
/* Closed-form ridge code (D^T D + lambda I)^-1 D^T y. */
csen_status csen_solve_crc(const csen_matrix *d, const double *y, size_t y_len,
                           double lambda, double *x_out,
                           csen_solver_info *info);
/* w_i = 1/(p_i + epsilon), inputs clamped into [0,1]. */
csen_status csen_weights_from_probability(const double *p, size_t len,
                                          double epsilon, double *w_out);

/* ------------------------------------------------------------- metrics */

/* out4 receives [precision, recall, f1, ce]. Index sets must be sorted,
 * duplicate-free and < n. */
csen_status csen_support_metrics(const size_t *predicted, size_t predicted_len,
                                 const size_t *truth, size_t truth_len,
                                 size_t n, double *out4);
/* *out = 1 iff ||x - x_hat||_2 / ||x||_2 <= tol (boundary inclusive). */
csen_status csen_recovery_success(const double *x_hat, const double *x,
                                  size_t len, double tol, int *out);
/* 10*log10(||x - x_hat||^2 / ||x||^2), floored at -300 dB. */
csen_status csen_nmse_db(const double *x_hat, const double *x, size_t len,
                         double *out);

/* -------------------------------------------------------------- models */

/* arch: 1 = csen1 (three convolutions), 2 = csen2 (adds a down/upsample
 * pair). Weights are seed-deterministic. */
csen_status csen_model_init(int arch, size_t grid_h, size_t grid_w,
                            uint64_t seed, csen_model **out);
csen_status csen_model_load(const char *path, csen_model **out);
csen_status csen_model_save(const csen_model *m, const char *path);
csen_status csen_model_grid(const csen_model *m, size_t *h, size_t *w);
size_t csen_model_parameter_count(const csen_model *m);
/* proxy_plane and p_out hold grid_h*grid_w row-major values; p lands in
 * [0,1]. */
csen_status csen_model_forward(const csen_model *m, const double *proxy_plane,
                               size_t plane_len, double *p_out);
/* Indices with p_i > tau. Writes min(count, cap) indices and the full
 * count. */
csen_status csen_threshold_support(const double *p, size_t len, double tau,
                                   size_t *indices_out, size_t cap,
                                   size_t *count_out);
void csen_model_free(csen_model *m);

#ifdef __cplusplus
}
#endif

#endif /* CSEN_H */
