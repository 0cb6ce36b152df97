#ifndef QSFUSE_H
#define QSFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsStatus {
  QS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  QS_STATUS_ERR_NULL = 1,
  QS_STATUS_ERR_INVALID_ARGUMENT = 2,
  /**
   * Malformed input text or file.
   */
  QS_STATUS_ERR_PARSE = 3,
  QS_STATUS_ERR_IO = 4,
  /**
   * An upstream pipeline stage has not been run.
   */
  QS_STATUS_ERR_MISSING_STAGE = 5,
  /**
   * Kernel matrix not positive definite, or non-finite values.
   */
  QS_STATUS_ERR_NUMERIC = 6,
  QS_STATUS_ERR_CONFIG = 7,
  /**
   * No weigh-in rule matched, or the matched value was not positive.
   */
  QS_STATUS_ERR_NO_MATCH = 8,
  /**
   * The series is excluded or empty, so no reference weight exists.
   */
  QS_STATUS_ERR_NO_REFERENCE = 9,
  QS_STATUS_ERR_PANIC = 10,
} QsStatus;

typedef enum QsUnit {
  QS_UNIT_KG = 0,
  QS_UNIT_LB = 1,
} QsUnit;

typedef enum QsSourceClass {
  QS_SOURCE_CLASS_WEIGH_IN = 0,
  QS_SOURCE_CLASS_OTHER_WEIGHT_LOSS = 1,
  QS_SOURCE_CLASS_FITNESS = 2,
  QS_SOURCE_CLASS_NORMAL = 3,
} QsSourceClass;

typedef enum QsExclusion {
  QS_EXCLUSION_NONE = 0,
  QS_EXCLUSION_VIOLATIONS = 1,
  QS_EXCLUSION_LOW_AVG = 2,
  QS_EXCLUSION_HIGH_AVG = 3,
} QsExclusion;

/**
 * Loaded lexicon. Opaque.
 */
typedef struct QsLexicon QsLexicon;

/**
 * Fitted regression model. Opaque.
 */
typedef struct QsModel QsModel;

/**
 * Weigh-in series under construction. Opaque.
 */
typedef struct QsSeries QsSeries;

typedef struct QsThresholds {
  size_t max_violations;
  double low_lb;
  double high_lb;
} QsThresholds;

/**
 * `r` is only meaningful when `r_defined` is true.
 */
typedef struct QsMetrics {
  double r;
  bool r_defined;
  double mae;
  double rmse;
} QsMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default cleaning thresholds.
 */
struct QsThresholds qs_thresholds_default(void);

/**
 * Message for the last failing call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *qs_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qs_version(void);

/**
 * Converts a weight to pounds. Fails on non-finite or negative input.
 */
enum QsStatus qs_to_pounds(double value, enum QsUnit unit, double *out_lb);

double qs_pounds_to_kg(double lb);

/**
 * Extracts a weigh-in value with the default grammar.
 *
 * # Safety
 * `text` must be a NUL-terminated string; the out pointers must be writable.
 */
enum QsStatus qs_parse_weighin(const char *text, double *out_value, enum QsUnit *out_unit);

/**
 * Classifies a tweet's source label with the default pattern table.
 *
 * # Safety
 * `label` must be a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_classify_source(const char *label, enum QsSourceClass *out);

/**
 * Keyword prefilter for raw stream captures.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_keyword_prefilter(const char *text, bool *out);

/**
 * Pearson r, MAE and RMSE over `n` pairs.
 *
 * # Safety
 * Both arrays must hold `n` doubles; `out` must be writable.
 */
enum QsStatus qs_metrics(const double *y_true,
                         const double *y_pred,
                         size_t n,
                         struct QsMetrics *out);

/**
 * Starts an empty series for `user_id`.
 *
 * # Safety
 * `user_id` must be a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_series_new(const char *user_id, struct QsSeries **out);

/**
 * # Safety
 * `series` must come from [`qs_series_new`] and not have been freed.
 */
enum QsStatus qs_series_push(struct QsSeries *series, int64_t day_index, double weight_lb);

/**
 * Number of implausible consecutive transitions (after sorting by day).
 *
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
enum QsStatus qs_series_violations(const struct QsSeries *series, size_t *out);

/**
 * Applies the exclusion rules. A null `thresholds` means the defaults.
 *
 * # Safety
 * `series` must be a live handle; `thresholds` null or valid; `out` writable.
 */
enum QsStatus qs_series_exclusion(const struct QsSeries *series,
                                  const struct QsThresholds *thresholds,
                                  enum QsExclusion *out);

/**
 * Mean weight of a series that passes the default exclusion rules.
 *
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
enum QsStatus qs_series_reference_weight(const struct QsSeries *series, double *out);

/**
 * # Safety
 * `series` must be null or a handle from [`qs_series_new`], freed once.
 */
void qs_series_free(struct QsSeries *series);

/**
 * Loads a `.dic` lexicon file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QsStatus qs_lexicon_load(const char *path, struct QsLexicon **out);

/**
 * # Safety
 * `lexicon` must be a live handle.
 */
size_t qs_lexicon_category_count(const struct QsLexicon *lexicon);

/**
 * Per-category token rates of `text`, in the lexicon's category order.
 * `out` must have room for `cap` values; `written` receives the category
 * count, and the call fails if `cap` is smaller.
 *
 * # Safety
 * Pointers must be valid; `out` must hold `cap` doubles.
 */
enum QsStatus qs_lexicon_rates(const struct QsLexicon *lexicon,
                               const char *text,
                               double *out,
                               size_t cap,
                               size_t *written);

/**
 * # Safety
 * `lexicon` must be null or a handle from [`qs_lexicon_load`], freed once.
 */
void qs_lexicon_free(struct QsLexicon *lexicon);

/**
 * Fits a squared-exponential GP on a row-major `n x d` matrix. Non-positive
 * `length_scale` or `noise_var` mean "use the default"; `grid_search`
 * selects both by marginal likelihood instead.
 *
 * # Safety
 * `x` must hold `n * d` doubles, `y` `n` doubles; `out` must be writable.
 */
enum QsStatus qs_gp_fit(const double *x,
                        size_t n,
                        size_t d,
                        const double *y,
                        double length_scale,
                        double noise_var,
                        bool grid_search,
                        struct QsModel **out);

/**
 * Fits an epsilon-insensitive linear SVR on a row-major `n x d` matrix.
 *
 * # Safety
 * `x` must hold `n * d` doubles, `y` `n` doubles; `out` must be writable.
 */
enum QsStatus qs_svr_fit(const double *x,
                         size_t n,
                         size_t d,
                         const double *y,
                         double c,
                         double epsilon,
                         struct QsModel **out);

/**
 * Predicts `n` rows of a row-major matrix with the fitted width.
 *
 * # Safety
 * `model` must be live; `x` must hold `n * d` doubles and `out` `n` doubles.
 */
enum QsStatus qs_model_predict(const struct QsModel *model,
                               const double *x,
                               size_t n,
                               size_t d,
                               double *out);

/**
 * # Safety
 * `model` must be null or a handle from a `_fit` call, freed once.
 */
void qs_model_free(struct QsModel *model);

/**
 * Runs one pipeline stage (`"synth"`, `"ingest"`, ..., `"report"`) in
 * `out_dir`. `config_path` may be null for the default configuration. A
 * report with missing sections returns `ErrMissingStage`.
 *
 * # Safety
 * String arguments must be NUL-terminated (or null where allowed).
 */
enum QsStatus qs_run_stage(const char *config_path, const char *out_dir, const char *stage);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSFUSE_H */
