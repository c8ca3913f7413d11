#ifndef ROUGHFLOW_ROUGHFLOW_H
#define ROUGHFLOW_ROUGHFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(ROUGHFLOW_BUILDING)
#define ROUGHFLOW_API __attribute__((visibility("default")))
#else
#define ROUGHFLOW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call that can fail returns one; rf_last_error() then holds the message
   for the calling thread until its next failing call. */
typedef enum rf_status {
  RF_OK = 0,
  RF_ERR_INVALID_ARGUMENT = 1,
  RF_ERR_OUT_OF_DOMAIN = 2,
  RF_ERR_NON_FINITE = 3,
  RF_ERR_STENCIL_OUTSIDE_DOMAIN = 4,
  RF_ERR_UNKNOWN_EXAMPLE = 5,
  RF_ERR_INVALID_PARAM = 6,
  RF_ERR_OUT_OF_RANGE = 7,
  RF_ERR_OVERFLOW = 8,
  RF_ERR_INVALID_THRESHOLD = 9,
  RF_ERR_INVERSE_DOMAIN = 10,
  RF_ERR_QUADRATURE_FAILURE = 11,
  RF_ERR_DIVERGENT_INTEGRAL = 12,
  RF_ERR_NO_FINITE_NORM = 13,
  RF_ERR_DOMAIN_EXIT = 14,
  RF_ERR_TOO_COARSE = 15,
  RF_ERR_ZERO_JACOBIAN = 16,
  RF_ERR_INCONSISTENT_GRIDS = 17,
  RF_ERR_SUPPORT_VIOLATION = 18,
  RF_ERR_SCHEMA = 19,
  RF_ERR_IO = 20,
  RF_ERR_NULL_POINTER = 21,
  RF_ERR_INTERNAL = 22
} rf_status;

typedef struct rf_spec rf_spec;     /* parsed experiment description */
typedef struct rf_result rf_result; /* outcome of one experiment run */
typedef struct rf_field rf_field;   /* gallery vector field */

ROUGHFLOW_API const char* rf_version(void);
ROUGHFLOW_API const char* rf_status_name(rf_status status);
ROUGHFLOW_API const char* rf_last_error(void);

/* Worker count for every parallel loop in the process (>= 1). */
ROUGHFLOW_API rf_status rf_set_workers(int workers);
ROUGHFLOW_API int rf_workers(void);

ROUGHFLOW_API size_t rf_preset_count(void);
/* Name of preset i, or NULL when i is out of range. */
ROUGHFLOW_API const char* rf_preset_name(size_t index);

ROUGHFLOW_API rf_status rf_spec_parse(const char* yaml, rf_spec** out);
ROUGHFLOW_API rf_status rf_spec_load(const char* path, rf_spec** out);
ROUGHFLOW_API rf_status rf_spec_preset(const char* name, rf_spec** out);
ROUGHFLOW_API void rf_spec_free(rf_spec* spec);
ROUGHFLOW_API const char* rf_spec_name(const rf_spec* spec);
/* Output directory named in the spec; empty when absent. */
ROUGHFLOW_API const char* rf_spec_output(const rf_spec* spec);
/* 64 hex digits plus the terminator. */
ROUGHFLOW_API const char* rf_spec_hash(const rf_spec* spec);
ROUGHFLOW_API size_t rf_spec_operation_count(const rf_spec* spec);

/* Runs every operation. tol_scale multiplies all tolerances; seed overrides the spec seed when
   has_seed is non-zero. A failing check is not an error: inspect rf_result_exit_code. */
ROUGHFLOW_API rf_status rf_run(const rf_spec* spec, double tol_scale, int has_seed, uint64_t seed, rf_result** out);
ROUGHFLOW_API void rf_result_free(rf_result* result);
/* 0 when every check passed, 2 when a check failed, 1 when an operation could not run. */
ROUGHFLOW_API int rf_result_exit_code(const rf_result* result);
ROUGHFLOW_API size_t rf_result_check_count(const rf_result* result);
ROUGHFLOW_API size_t rf_result_failed_checks(const rf_result* result);
/* report.json text, owned by the result. */
ROUGHFLOW_API const char* rf_result_json(const rf_result* result);
/* One line per check: "<operation id>\t<PASS|FAIL>\t<check name>", plus "<id>\tERROR\t<message>"
   for operations that failed to run. Owned by the result. */
ROUGHFLOW_API const char* rf_result_summary(const rf_result* result);
/* Writes report.json, CSV tables, plot files and sidecars into directory (created if missing). */
ROUGHFLOW_API rf_status rf_result_write(const rf_result* result, const char* directory);

typedef struct rf_example_params {
  double alpha;
  double beta;
  int level;
  double lambda;
  int dim;
  const double* drift; /* dim entries, or NULL for the zero drift */
} rf_example_params;

/* Defaults matching the gallery: alpha = beta = lambda = 1, level 12, dim 1, no drift. */
ROUGHFLOW_API rf_example_params rf_example_defaults(void);
ROUGHFLOW_API rf_status rf_field_create(const char* example, const rf_example_params* params, rf_field** out);
ROUGHFLOW_API void rf_field_free(rf_field* field);
ROUGHFLOW_API int rf_field_dim(const rf_field* field);
/* b(t, x) into out (dim entries). */
ROUGHFLOW_API rf_status rf_field_eval(const rf_field* field, double t, const double* x, double* out);
/* X(t, s, x) into out with default solver settings. reached is set to 0 when the maximal curve
   ends before t; out is then left untouched. */
ROUGHFLOW_API rf_status rf_flow_point(const rf_field* field, double t, double s, const double* x, double* out,
                                      int* reached);

#ifdef __cplusplus
}
#endif

#endif
