/* C interface for the mvkl matrix-valued kernel learning library. */

#ifndef MVKL_H
#define MVKL_H

/* Generated by cbindgen from the mvkl-capi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Scalar kernel family used to build the dictionary.
 */
typedef enum MvklKernelKind {
  /**
   * Gaussian kernels, one per bandwidth-grid entry; each bandwidth is
   * the grid multiplier times the median pairwise distance of the data.
   */
  MVKL_KERNEL_KIND_GAUSSIAN = 0,
  /**
   * A single linear kernel; the bandwidth grid is ignored.
   */
  MVKL_KERNEL_KIND_LINEAR = 1,
} MvklKernelKind;

/**
 * Result code returned by every fallible function. Anything other than
 * `MVKL_STATUS_OK` leaves a human-readable explanation in
 * `mvkl_last_error_message`.
 */
typedef enum MvklStatus {
  MVKL_STATUS_OK = 0,
  MVKL_STATUS_INVALID_INPUT = 1,
  MVKL_STATUS_DIMENSION_MISMATCH = 2,
  MVKL_STATUS_NUMERICAL_FAILURE = 3,
  MVKL_STATUS_INSUFFICIENT_DATA = 4,
  MVKL_STATUS_UNSUPPORTED_PREDICTION = 5,
  MVKL_STATUS_PARSE = 6,
  MVKL_STATUS_CONFIG = 7,
  MVKL_STATUS_IO = 8,
  MVKL_STATUS_NULL_POINTER = 9,
  MVKL_STATUS_INVALID_UTF8 = 10,
  MVKL_STATUS_PANIC = 11,
} MvklStatus;

/**
 * Opaque causal-graph handle.
 */
typedef struct MvklGraph MvklGraph;

/**
 * Opaque fitted-model handle.
 */
typedef struct MvklModel MvklModel;

/**
 * Solver configuration. Initialize with `mvkl_fit_options_default` and
 * override individual fields; a null options pointer means defaults.
 */
typedef struct MvklFitOptions {
  /**
   * Ridge weight shared by both regularization terms.
   */
  double lambda;
  /**
   * Trace budget for the learned output kernel.
   */
  double tau;
  /**
   * Component-norm exponent in [1, 2]; 1 gives the sparsest weights.
   */
  double p;
  /**
   * Elastic-net mixing in [0, 1]; any negative value selects the
   * p-norm regularizer instead.
   */
  double elastic_mu;
  double cg_tol;
  size_t cg_max_iter;
  double fw_tol;
  size_t fw_max_iter;
  size_t outer_max_iter;
  double outer_tol;
  uint64_t seed;
} MvklFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mvkl_version(void);

/**
 * Message describing the most recent failure on the calling thread.
 * The pointer stays valid until the next failing call on that thread.
 */
const char *mvkl_last_error_message(void);

/**
 * Fills `opts` with the default solver configuration.
 */
enum MvklStatus mvkl_fit_options_default(struct MvklFitOptions *opts);

/**
 * Fits a model to training inputs `x` (`rows` × `features`, row-major)
 * and targets `y` (`rows` × `outputs`, row-major). For Gaussian kernels,
 * `bandwidths` holds grid multipliers applied to the median pairwise
 * distance (pass `n_bandwidths = 0` for the built-in grid). On success
 * writes a handle to `out`; free it with `mvkl_model_free`.
 */
enum MvklStatus mvkl_fit(const double *x,
                         size_t rows,
                         size_t features,
                         const double *y,
                         size_t outputs,
                         enum MvklKernelKind kind,
                         const double *bandwidths,
                         size_t n_bandwidths,
                         const struct MvklFitOptions *opts,
                         struct MvklModel **out);

/**
 * Loads a model previously written by `mvkl_model_save_json`.
 */
enum MvklStatus mvkl_model_load_json(const char *path, struct MvklModel **out);

/**
 * Serializes the model to a JSON file at `path`.
 */
enum MvklStatus mvkl_model_save_json(const struct MvklModel *model, const char *path);

/**
 * Predicts targets for `x_new` (`rows` × `features`, row-major). `values`
 * must hold `rows × mvkl_model_outputs(model)` doubles; predictions are
 * written row-major, `values_len` guards the buffer size.
 */
enum MvklStatus mvkl_model_predict(const struct MvklModel *model,
                                   const double *x_new,
                                   size_t rows,
                                   size_t features,
                                   double *values,
                                   size_t values_len);

/**
 * Number of training rows, or 0 for a null handle.
 */
size_t mvkl_model_train_rows(const struct MvklModel *model);

/**
 * Number of input features, or 0 for a null handle.
 */
size_t mvkl_model_features(const struct MvklModel *model);

/**
 * Number of output components, or 0 for a null handle.
 */
size_t mvkl_model_outputs(const struct MvklModel *model);

/**
 * Number of dictionary kernels, or 0 for a null handle.
 */
size_t mvkl_model_kernel_count(const struct MvklModel *model);

/**
 * 1 if the fit converged, 0 if it stopped early, -1 for a null handle.
 */
int32_t mvkl_model_converged(const struct MvklModel *model);

/**
 * Final training objective; NaN for a model loaded from JSON, which
 * carries no optimization trace.
 */
double mvkl_model_objective(const struct MvklModel *model);

/**
 * Copies the learned kernel weights into `weights`
 * (`mvkl_model_kernel_count` doubles).
 */
enum MvklStatus mvkl_model_weights(const struct MvklModel *model,
                                   double *weights,
                                   size_t weights_len);

/**
 * Copies the learned output kernel row-major into `values`
 * (`outputs × outputs` doubles).
 */
enum MvklStatus mvkl_model_output_kernel(const struct MvklModel *model,
                                         double *values,
                                         size_t values_len);

/**
 * Releases a model handle. A null pointer is a no-op.
 */
void mvkl_model_free(struct MvklModel *model);

/**
 * Infers a causal graph from a multivariate time-series panel. `values`
 * is `steps` × `total_dims` row-major with columns grouped by node;
 * `node_dims` gives each node's column count (summing to `total_dims`).
 * `names` may be null for automatic `x1..xN` labels. On success writes a
 * handle to `out`; free it with `mvkl_graph_free`.
 */
enum MvklStatus mvkl_granger(const double *values,
                             size_t steps,
                             size_t total_dims,
                             const size_t *node_dims,
                             size_t n_nodes,
                             const char *const *names,
                             size_t lag,
                             enum MvklKernelKind kind,
                             const double *bandwidths,
                             size_t n_bandwidths,
                             const struct MvklFitOptions *opts,
                             struct MvklGraph **out);

/**
 * Number of nodes, or 0 for a null handle.
 */
size_t mvkl_graph_node_count(const struct MvklGraph *graph);

/**
 * Name of node `index`, or null when out of range. The pointer stays
 * valid until `mvkl_graph_free`.
 */
const char *mvkl_graph_node_name(const struct MvklGraph *graph, size_t index);

/**
 * Copies the adjacency matrix row-major into `values` (`n × n` doubles);
 * entry (i, j) is the influence of node j's history on node i.
 */
enum MvklStatus mvkl_graph_adjacency(const struct MvklGraph *graph,
                                     double *values,
                                     size_t values_len);

/**
 * Copies each node model's held-out root-mean-square error into `values`
 * (`n` doubles).
 */
enum MvklStatus mvkl_graph_holdout_rmse(const struct MvklGraph *graph,
                                        double *values,
                                        size_t values_len);

/**
 * Releases a graph handle. A null pointer is a no-op.
 */
void mvkl_graph_free(struct MvklGraph *graph);

/**
 * Expected-excess-risk complexity bound for a dictionary of `m` kernels
 * with diagonal bound `kappa`, trace budget `tau`, hypothesis radius
 * `norm_budget`, and `l` samples. `p` selects the regularizer exponent
 * and `rank` (0 for unknown) tightens the low-rank case.
 */
enum MvklStatus mvkl_rademacher_bound(double norm_budget,
                                      size_t m,
                                      double kappa,
                                      double tau,
                                      size_t l,
                                      double p,
                                      size_t rank,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVKL_H */
