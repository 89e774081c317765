#ifndef USP_H
#define USP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UspStatus {
  USP_STATUS_OK = 0,
  USP_STATUS_NULL_POINTER = 1,
  USP_STATUS_INVALID_TABLE = 2,
  USP_STATUS_INVALID_ARGUMENT = 3,
  USP_STATUS_UNDEFINED_STATISTIC = 4,
  USP_STATUS_PANIC = 5,
} UspStatus;

typedef enum UspMethod {
  USP_METHOD_USP = 0,
  USP_METHOD_PEARSON = 1,
  USP_METHOD_G = 2,
} UspMethod;

typedef enum UspMode {
  USP_MODE_PERMUTATION = 0,
  USP_MODE_CLASSIC = 1,
} UspMode;

typedef enum UspStatistic {
  USP_STATISTIC_PEARSON = 0,
  USP_STATISTIC_G = 1,
  USP_STATISTIC_USP = 2,
  USP_STATISTIC_DHAT = 3,
} UspStatistic;

typedef enum UspClassicTest {
  USP_CLASSIC_TEST_PEARSON = 0,
  USP_CLASSIC_TEST_G = 1,
} UspClassicTest;

typedef enum UspDataset {
  USP_DATASET_MARITAL = 0,
  USP_DATASET_EYE_COLOUR = 1,
} UspDataset;

/*
 Opaque contingency table handle.
 */
typedef struct UspTable UspTable;

/*
 Outcome of `usp_run_test`. `permutations` is 0 in classic mode and `df`
 is 0 in permutation mode.
 */
typedef struct UspTestResult {
  double statistic;
  double p_value;
  bool reject;
  double alpha;
  uint64_t permutations;
  uint64_t df;
  uint64_t seed;
} UspTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a table from `rows * cols` row-major counts.

 # Safety
 `counts` must point to `rows * cols` readable values and `out` must be
 writable. The handle written to `out` must be released with
 `usp_table_free`.
 */
enum UspStatus usp_table_new(size_t rows,
                             size_t cols,
                             const uint64_t *counts,
                             struct UspTable **out);

/*
 Creates a handle holding one of the built-in tables.

 # Safety
 `out` must be writable.
 */
enum UspStatus usp_table_from_dataset(uint32_t dataset, struct UspTable **out);

/*
 Releases a table handle. Null is ignored.

 # Safety
 `table` must be null or a handle not yet freed.
 */
void usp_table_free(struct UspTable *table);

/*
 Number of rows, or 0 for a null handle.

 # Safety
 `table` must be null or a live handle.
 */
size_t usp_table_rows(const struct UspTable *table);

/*
 Number of columns, or 0 for a null handle.

 # Safety
 `table` must be null or a live handle.
 */
size_t usp_table_cols(const struct UspTable *table);

/*
 Total count `n`, or 0 for a null handle.

 # Safety
 `table` must be null or a live handle.
 */
uint64_t usp_table_total(const struct UspTable *table);

/*
 Evaluates a statistic (`USP_STATISTIC_*`) on a table.

 # Safety
 `table` must be a live handle and `out` writable.
 */
enum UspStatus usp_statistic(const struct UspTable *table, uint32_t kind, double *out);

/*
 Runs an independence test. `permutations` is ignored in classic mode.
 With `conservative_ties` false, ties are broken at random.

 # Safety
 `table` must be a live handle and `out` writable.
 */
enum UspStatus usp_run_test(const struct UspTable *table,
                            uint32_t method,
                            uint32_t mode,
                            uint64_t permutations,
                            double alpha,
                            uint64_t seed,
                            bool conservative_ties,
                            struct UspTestResult *out);

/*
 Limiting size of a classic test (`USP_CLASSIC_TEST_*`) in the sparse 2x2
 regime with scale `lambda`.

 # Safety
 `out` must be writable.
 */
enum UspStatus usp_asymptotic_size(uint32_t test, double lambda, double alpha, double *out);

/*
 Static description of a status code.
 */
const char *usp_status_message(enum UspStatus status);

/*
 Message for the last failed call on this thread, or null if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *usp_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USP_H */
