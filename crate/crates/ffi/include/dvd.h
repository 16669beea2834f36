#ifndef DVD_H
#define DVD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel kinds in the order of their numeric codes.
 */
typedef enum DvdKernelKind {
  DVD_KERNEL_KIND_SQUARED_EXPONENTIAL = 0,
  DVD_KERNEL_KIND_EXPONENTIAL = 1,
  DVD_KERNEL_KIND_LINEAR_NORMALIZED = 2,
  DVD_KERNEL_KIND_RATIONAL_QUADRATIC = 3,
  DVD_KERNEL_KIND_MATERN32 = 4,
  DVD_KERNEL_KIND_MATERN52 = 5,
} DvdKernelKind;

typedef enum DvdStatus {
  DVD_STATUS_OK = 0,
  DVD_STATUS_NULL_POINTER = 1,
  DVD_STATUS_INVALID_ARGUMENT = 2,
  DVD_STATUS_CONFIG = 3,
  DVD_STATUS_NUMERICAL = 4,
  DVD_STATUS_RUNTIME = 5,
  DVD_STATUS_IO = 6,
  DVD_STATUS_PANIC = 7,
} DvdStatus;

/**
 * Opaque Thompson-sampling bandit handle.
 */
typedef struct DvdBandit DvdBandit;

/**
 * Opaque kernel handle.
 */
typedef struct DvdKernel DvdKernel;

/**
 * Opaque single-seed training loop.
 */
typedef struct DvdTrainer DvdTrainer;

/**
 * One iteration's summary as returned by [`dvd_trainer_step`].
 */
typedef struct DvdStepResult {
  uint64_t iteration;
  double best_reward;
  double lambda_used;
  double diversity;
  /**
   * 0 or 1, or -1 when no bandit update happened.
   */
  int32_t bandit_signal;
} DvdStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, excluding
 * the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t dvd_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum DvdStatus dvd_kernel_new(enum DvdKernelKind kind,
                              double length_scale,
                              double rq_alpha,
                              struct DvdKernel **out);

/**
 * # Safety
 * `kernel` must be null or a handle from [`dvd_kernel_new`] not yet freed.
 */
void dvd_kernel_free(struct DvdKernel *kernel);

/**
 * `k(x, y)` for two vectors of length `dim`.
 *
 * # Safety
 * `x` and `y` must point to `dim` doubles; `out` must be writable.
 */
enum DvdStatus dvd_kernel_eval(const struct DvdKernel *kernel,
                               const double *x,
                               const double *y,
                               size_t dim,
                               double *out);

/**
 * Determinant of the kernel matrix of `m` embeddings stored row-major.
 *
 * # Safety
 * `embeddings` must point to `m * dim` doubles; `out` must be writable.
 */
enum DvdStatus dvd_diversity(const struct DvdKernel *kernel,
                             const double *embeddings,
                             size_t m,
                             size_t dim,
                             double *out);

/**
 * Gradient of `log det K` with respect to every embedding, written
 * row-major into `out` (`m * dim` doubles).
 *
 * # Safety
 * `embeddings` and `out` must each point to `m * dim` doubles.
 */
enum DvdStatus dvd_grad_logdet(const struct DvdKernel *kernel,
                               const double *embeddings,
                               size_t m,
                               size_t dim,
                               double *out);

/**
 * # Safety
 * `lambdas` must point to `n` doubles; `out` must be writable.
 */
enum DvdStatus dvd_bandit_new(const double *lambdas,
                              size_t n,
                              uint64_t seed,
                              struct DvdBandit **out);

/**
 * # Safety
 * `bandit` must be null or a handle from [`dvd_bandit_new`] not yet freed.
 */
void dvd_bandit_free(struct DvdBandit *bandit);

/**
 * Samples an arm; writes its index and trade-off value.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DvdStatus dvd_bandit_sample(struct DvdBandit *bandit, size_t *arm, double *lambda);

/**
 * Updates the most recently sampled arm.
 *
 * # Safety
 * `bandit` must be a live handle.
 */
enum DvdStatus dvd_bandit_update(struct DvdBandit *bandit, size_t arm, bool success);

/**
 * Reads the Beta posterior of one arm.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DvdStatus dvd_bandit_posterior(const struct DvdBandit *bandit,
                                    size_t arm,
                                    double *alpha,
                                    double *beta);

/**
 * Builds a training loop from config text for one seed. Worker count
 * follows `DVD_THREADS`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be writable.
 */
enum DvdStatus dvd_trainer_new(const char *config, uint64_t seed, struct DvdTrainer **out);

/**
 * # Safety
 * `trainer` must be null or a handle from [`dvd_trainer_new`] not yet freed.
 */
void dvd_trainer_free(struct DvdTrainer *trainer);

/**
 * Runs one iteration.
 *
 * # Safety
 * `trainer` must be a live handle; `out` must be writable.
 */
enum DvdStatus dvd_trainer_step(struct DvdTrainer *trainer, struct DvdStepResult *out);

/**
 * Number of policy parameters per agent.
 *
 * # Safety
 * `trainer` must be a live handle; `out` must be writable.
 */
enum DvdStatus dvd_trainer_param_count(const struct DvdTrainer *trainer, size_t *out);

/**
 * Copies agent `agent`'s parameters into `out` (`len` doubles, which must
 * equal the parameter count).
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum DvdStatus dvd_trainer_params(const struct DvdTrainer *trainer,
                                  size_t agent,
                                  double *out,
                                  size_t len);

/**
 * Runs every seed in the config, writing logs to `out_dir` (or the config's
 * own `out` when null).
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out_dir` null or one.
 */
enum DvdStatus dvd_run_config(const char *config, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DVD_H */
