#ifndef FAIRSEL_H
#define FAIRSEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_POINTER = 1,
  FS_STATUS_INVALID_INPUT = 2,
  FS_STATUS_NUMERIC = 3,
  FS_STATUS_PARSE = 4,
  FS_STATUS_IO = 5,
  FS_STATUS_COVERAGE = 6,
  FS_STATUS_UNAVAILABLE = 7,
  FS_STATUS_FAILED = 8,
  FS_STATUS_PANIC = 9,
} FsStatus;

/**
 * Opaque proxy-model handle.
 */
typedef struct FsProxy FsProxy;

/**
 * Opaque dataset handle.
 */
typedef struct FsTable FsTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next fallible call on the same thread.
 */
const char *fs_last_error(void);

/**
 * Loads a dataset CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
FsStatus fs_table_load(const char *path, FsTable **out);

/**
 * Writes a table as CSV.
 *
 * # Safety
 * `table` must come from this library and `path` be NUL-terminated.
 */
FsStatus fs_table_save(const FsTable *table, const char *path);

/**
 * Releases a table. Null is ignored.
 *
 * # Safety
 * `table` must come from this library and not be used afterwards.
 */
void fs_table_free(FsTable *table);

/**
 * Number of rows in a table.
 *
 * # Safety
 * `table` must come from this library and `out` be valid.
 */
FsStatus fs_table_len(const FsTable *table, size_t *out);

/**
 * Number of rows whose observed label differs from the clean one.
 *
 * # Safety
 * `table` must come from this library and `out` be valid.
 */
FsStatus fs_table_flipped(const FsTable *table, size_t *out);

/**
 * Flips labels of `target_group` in both directions with probability
 * `rho`, returning a new table.
 *
 * # Safety
 * `table` must come from this library and `out` be valid.
 */
FsStatus fs_table_inject_bias(const FsTable *table,
                              double rho,
                              uint32_t target_group,
                              uint64_t seed,
                              FsTable **out);

/**
 * Trains a linear proxy on a clean holdout table.
 *
 * # Safety
 * `holdout` must come from this library and `out` be valid.
 */
FsStatus fs_proxy_train(const FsTable *holdout,
                        bool include_sensitive,
                        uint32_t epochs,
                        uint64_t seed,
                        FsProxy **out);

/**
 * Loads per-example proxy predictions from CSV.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid.
 */
FsStatus fs_proxy_load(const char *path, FsProxy **out);

/**
 * Releases a proxy. Null is ignored.
 *
 * # Safety
 * `proxy` must come from this library and not be used afterwards.
 */
void fs_proxy_free(FsProxy *proxy);

/**
 * Class probabilities of the proxy for row `row` of `table`, written to
 * `out` which must hold `capacity >= num_classes` values.
 *
 * # Safety
 * Handles must come from this library; `out` must hold `capacity` doubles.
 */
FsStatus fs_proxy_predict(const FsProxy *proxy,
                          const FsTable *table,
                          size_t row,
                          double *out,
                          size_t capacity);

/**
 * Fair selection score `train + (1 - alpha) * proxy - gamma * peer`.
 */
double fs_fair_score(double train_loss,
                     double proxy_loss,
                     double peer_term,
                     double alpha,
                     double gamma);

/**
 * Demographic-parity gap between the two groups.
 *
 * # Safety
 * Arrays must hold `n` values; `out` must be valid.
 */
FsStatus fs_delta_dp(const uint32_t *predictions, const uint32_t *groups, size_t n, double *out);

/**
 * Equal-opportunity gap between the two groups.
 *
 * # Safety
 * Arrays must hold `n` values; `out` must be valid.
 */
FsStatus fs_delta_deo(const uint32_t *predictions,
                      const uint32_t *labels_in,
                      const uint32_t *groups,
                      size_t n,
                      double *out);

/**
 * Ratio of the smaller to the larger group positive rate.
 *
 * # Safety
 * Arrays must hold `n` values; `out` must be valid.
 */
FsStatus fs_p_percent(const uint32_t *predictions, const uint32_t *groups, size_t n, double *out);

/**
 * Runs a full training job described by a TOML config. `out_dir` may be
 * null to use the directory named in the config.
 *
 * # Safety
 * `config` must be NUL-terminated; `out_dir` null or NUL-terminated.
 */
FsStatus fs_train_from_config(const char *config, const char *out_dir);

/**
 * Runs the analytical self-checks.
 */
FsStatus fs_verify(uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRSEL_H */
