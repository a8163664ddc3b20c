/* Generated by cbindgen; do not edit. */

#ifndef PRIVFAIR_H
#define PRIVFAIR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_DOMAIN = 3,
  PF_STATUS_SHAPE = 4,
  PF_STATUS_NOT_POSITIVE_DEFINITE = 5,
  PF_STATUS_DEGENERATE = 6,
  PF_STATUS_CALIBRATION = 7,
  PF_STATUS_CONFIG = 8,
  PF_STATUS_INGESTION = 9,
  PF_STATUS_DIVERGENCE = 10,
  PF_STATUS_IO = 11,
  PF_STATUS_PANIC = 12,
} PfStatus;

/**
 * A labeled dataset with a trailing bias feature.
 */
typedef struct PfDataset PfDataset;

/**
 * A linear model `theta`.
 */
typedef struct PfModel PfModel;

/**
 * A noise law `sigma * N(0, Sigma)`.
 */
typedef struct PfNoise PfNoise;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pf_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * Valid until the next library call on the same thread.
 */
const char *pf_last_error_message(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 */
void pf_string_free(char *s);

enum PfStatus pf_std_normal_cdf(double x, double *out);

enum PfStatus pf_std_normal_quantile(double q, double *out);

/**
 * Smallest `sigma` meeting the `(epsilon, delta)` budget at the given
 * sensitivity.
 */
enum PfStatus pf_calibrate_sigma(double epsilon,
                                 double delta,
                                 double sensitivity,
                                 double *sigma_out);

/**
 * Left-hand side of the privacy condition at `sigma`.
 */
enum PfStatus pf_privacy_condition(double sigma,
                                   double epsilon,
                                   double delta,
                                   double sensitivity,
                                   double *out);

enum PfStatus pf_model_new(const double *weights, size_t len, struct PfModel **out);

/**
 * Reads a model file `{"weights": [...]}`.
 */
enum PfStatus pf_model_load_json(const char *path, struct PfModel **out);

enum PfStatus pf_model_dim(const struct PfModel *model, size_t *out);

/**
 * Copies the weights into `buffer`, which must hold exactly `len` values.
 */
enum PfStatus pf_model_weights(const struct PfModel *model, double *buffer, size_t len);

void pf_model_free(struct PfModel *model);

enum PfStatus pf_noise_isotropic(double sigma, size_t dim, struct PfNoise **out);

/**
 * Noise with a `dim x dim` SPD covariance given row-major.
 */
enum PfStatus pf_noise_new(double sigma,
                           const double *covariance,
                           size_t dim,
                           struct PfNoise **out);

void pf_noise_free(struct PfNoise *noise);

/**
 * Draws one private model `theta + sigma * xi` from stream `seed`.
 */
enum PfStatus pf_perturb(const struct PfModel *model,
                         const struct PfNoise *noise,
                         uint64_t seed,
                         struct PfModel **out);

/**
 * Loads a CSV file; `schema_json` is the column-role schema as JSON.
 */
enum PfStatus pf_dataset_load_csv(const char *path,
                                  const char *schema_json,
                                  struct PfDataset **out);

/**
 * Built-in two-group synthetic population.
 */
enum PfStatus pf_dataset_synthetic(size_t n,
                                   size_t p,
                                   double proportion_a,
                                   double separation,
                                   uint64_t seed,
                                   struct PfDataset **out);

enum PfStatus pf_dataset_len(const struct PfDataset *dataset, size_t *out);

/**
 * Feature dimension including the bias.
 */
enum PfStatus pf_dataset_dim(const struct PfDataset *dataset, size_t *out);

void pf_dataset_free(struct PfDataset *dataset);

/**
 * High-probability bounds on the norm of the private model.
 */
enum PfStatus pf_norm_bounds(const struct PfModel *model,
                             const struct PfNoise *noise,
                             double zeta,
                             double *lower,
                             double *upper);

/**
 * Probability that the private model flips the prediction on `x`;
 * `label` is +1 or -1.
 */
enum PfStatus pf_disagreement_probability(const struct PfModel *model,
                                          const struct PfNoise *noise,
                                          const double *x,
                                          size_t len,
                                          int label,
                                          double *out);

enum PfStatus pf_expected_accuracy(const struct PfModel *model,
                                   const struct PfNoise *noise,
                                   const struct PfDataset *dataset,
                                   double *out);

enum PfStatus pf_accuracy_variance_bound(const struct PfModel *model,
                                         const struct PfNoise *noise,
                                         const struct PfDataset *dataset,
                                         double *out);

/**
 * Every bound report (norm, disagreement, accuracy, all fairness measures)
 * at each confidence level, as a JSON array. Free with [`pf_string_free`].
 */
enum PfStatus pf_audit_json(const struct PfModel *model,
                            const struct PfNoise *noise,
                            const struct PfDataset *dataset,
                            const double *zetas,
                            size_t n_zetas,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIVFAIR_H */
