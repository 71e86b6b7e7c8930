#ifndef SBMQ_H
#define SBMQ_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbmqGreedyMethod {
  SBMQ_GREEDY_METHOD_LOUVAIN = 0,
  SBMQ_GREEDY_METHOD_INFOMAP = 1,
} SbmqGreedyMethod;

typedef enum SbmqMatrix {
  SBMQ_MATRIX_MODULARITY = 0,
  SBMQ_MATRIX_NON_BACKTRACKING = 1,
} SbmqMatrix;

/**
 * Result code of every fallible call.
 */
typedef enum SbmqStatus {
  SBMQ_STATUS_OK = 0,
  SBMQ_STATUS_NULL_POINTER = 1,
  SBMQ_STATUS_INVALID_ARGUMENT = 2,
  SBMQ_STATUS_IO = 3,
  SBMQ_STATUS_PARSE = 4,
  SBMQ_STATUS_EMPTY_GRAPH = 5,
  SBMQ_STATUS_NUMERIC = 6,
  SBMQ_STATUS_UNDEFINED = 7,
  SBMQ_STATUS_BUFFER_TOO_SMALL = 8,
  SBMQ_STATUS_PANIC = 9,
} SbmqStatus;

/**
 * Opaque fitted-state handle.
 */
typedef struct SbmqFit SbmqFit;

/**
 * Opaque graph handle.
 */
typedef struct SbmqGraph SbmqGraph;

/**
 * EM settings; obtain defaults from [`sbmq_em_options_default`].
 */
typedef struct SbmqEmOptions {
  size_t restarts;
  size_t max_sweeps;
  size_t max_total_sweeps;
  size_t max_em_iters;
  double msg_tol;
  double param_tol;
  double noise;
  double damping;
  /**
   * Nonzero keeps alpha = 1 and beta = beta*.
   */
  int32_t frozen_params;
} SbmqEmOptions;

typedef struct SbmqParams {
  double omega_in;
  double omega_out;
  double alpha;
  double beta;
} SbmqParams;

/**
 * Assessment criteria of a fitted state. `bethe_f` is NaN when undefined.
 */
typedef struct SbmqCriteria {
  size_t q_effective;
  double bethe_f;
  double modularity;
  double mdl;
  double e_bayes;
  double e_gibbs;
  double e_map;
  double e_training;
  int32_t factorized;
} SbmqCriteria;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next `sbmq_*` call on the same thread.
 */
const char *sbmq_last_error(void);

/**
 * Builds a graph on vertices `0..n` from `m` edges stored as
 * `edges[2k], edges[2k+1]`. Self-loops and duplicates are dropped.
 *
 * # Safety
 * `edges` must point to `2 * m` readable values; `graph` must be writable.
 */
enum SbmqStatus sbmq_graph_new(size_t n, const size_t *edges, size_t m, struct SbmqGraph **graph);

/**
 * Reads a whitespace-separated edge list.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `graph` must be writable.
 */
enum SbmqStatus sbmq_graph_load(const char *path, struct SbmqGraph **graph);

/**
 * Samples an SBM with `q` equal clusters, average degree `c` and
 * `eps = omega_out / omega_in`. When `labels` is non-null it receives the
 * planted label of each of the `n` vertices.
 *
 * # Safety
 * `graph` must be writable; `labels`, if non-null, must hold `n` values.
 */
enum SbmqStatus sbmq_generate_sbm(size_t n,
                                  size_t q,
                                  double c,
                                  double eps,
                                  uint64_t seed,
                                  struct SbmqGraph **graph,
                                  size_t *labels);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards.
 */
void sbmq_graph_free(struct SbmqGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null (which yields 0).
 */
size_t sbmq_graph_num_vertices(const struct SbmqGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle or null (which yields 0).
 */
size_t sbmq_graph_num_edges(const struct SbmqGraph *graph);

struct SbmqEmOptions sbmq_em_options_default(void);

/**
 * Best-of-restarts EM fit at `q` clusters. `options` may be null for defaults.
 *
 * # Safety
 * `graph` must be live, `options` null or readable, `fit` writable.
 */
enum SbmqStatus sbmq_em_fit(const struct SbmqGraph *graph,
                            size_t q,
                            const struct SbmqEmOptions *options,
                            uint64_t seed,
                            struct SbmqFit **fit);

/**
 * # Safety
 * `fit` must come from this library and not be used afterwards.
 */
void sbmq_fit_free(struct SbmqFit *fit);

/**
 * # Safety
 * `fit` must be live and `params` writable.
 */
enum SbmqStatus sbmq_fit_params(const struct SbmqFit *fit, struct SbmqParams *params);

/**
 * Copies the `n * q` marginals, row-major by vertex.
 *
 * # Safety
 * `fit` must be live and `buf` must hold `len` values.
 */
enum SbmqStatus sbmq_fit_marginals(const struct SbmqFit *fit, double *buf, size_t len);

/**
 * Copies the argmax label of each vertex.
 *
 * # Safety
 * `fit` must be live and `buf` must hold `len` values.
 */
enum SbmqStatus sbmq_fit_labels(const struct SbmqFit *fit, size_t *buf, size_t len);

/**
 * Scores a fit against the graph it was fitted on.
 *
 * # Safety
 * Both handles must be live and `criteria` writable.
 */
enum SbmqStatus sbmq_fit_criteria(const struct SbmqGraph *graph,
                                  const struct SbmqFit *fit,
                                  struct SbmqCriteria *criteria);

/**
 * Number of eigenvalues outside the bulk among the leading `k`.
 *
 * # Safety
 * `graph` must be live and `q_star` writable.
 */
enum SbmqStatus sbmq_spectral_count(const struct SbmqGraph *graph,
                                    enum SbmqMatrix matrix,
                                    size_t k,
                                    size_t *q_star);

/**
 * One greedy run. `labels` may be null; otherwise it receives `n` labels.
 *
 * # Safety
 * `graph` must be live, `q_star` and `objective` writable, `labels` null or
 * able to hold `len` values.
 */
enum SbmqStatus sbmq_greedy(const struct SbmqGraph *graph,
                            enum SbmqGreedyMethod method,
                            double alpha,
                            uint64_t seed,
                            size_t *q_star,
                            double *objective,
                            size_t *labels,
                            size_t len);

/**
 * Inverse temperature where the factorized state loses stability.
 *
 * # Safety
 * `out_beta` must be writable.
 */
enum SbmqStatus sbmq_beta_star(size_t q, double c, double *out_beta);

/**
 * Lower end of the reference band of inverse temperatures.
 *
 * # Safety
 * `out_beta` must be writable.
 */
enum SbmqStatus sbmq_beta_zero(size_t q, double c, double *out_beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBMQ_H */
