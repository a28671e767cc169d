#ifndef SWJD_SWJD_H
#define SWJD_SWJD_H

#include <stddef.h>
#include <stdint.h>

#if defined(SWJD_BUILDING_LIBRARY)
#define SWJD_API __attribute__((visibility("default")))
#else
#define SWJD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum swjd_status {
  SWJD_OK = 0,
  SWJD_INVALID_ARGUMENT = 1,
  SWJD_UNKNOWN_MODEL = 2,
  SWJD_TRUNCATION = 3,
  SWJD_NUMERIC = 4,
  SWJD_IO = 5,
  SWJD_INTERNAL = 6
} swjd_status;

typedef struct swjd_model swjd_model;
typedef struct swjd_result swjd_result;

SWJD_API const char* swjd_version(void);
SWJD_API const char* swjd_status_string(swjd_status status);
/* Message of the last failed call on this thread; "" when none. */
SWJD_API const char* swjd_last_error(void);

/* Space-separated lists. */
SWJD_API const char* swjd_builtin_names(void);
SWJD_API const char* swjd_command_names(void);

/* Worker count for all estimators; 0 selects the available parallelism. Results do not depend on it. */
SWJD_API swjd_status swjd_set_threads(int n);
SWJD_API int swjd_get_threads(void);

/* A built-in name ("example51", "example52:0.5", ...) or a path to a JSON config. */
SWJD_API swjd_status swjd_model_load(const char* name_or_path, swjd_model** out);
/* A JSON config held in memory. */
SWJD_API swjd_status swjd_model_from_json(const char* json_text, swjd_model** out);
SWJD_API void swjd_model_free(swjd_model* model);
SWJD_API int swjd_model_dim(const swjd_model* model);
SWJD_API const char* swjd_model_name(const swjd_model* model);
/* Resolved config as compact JSON. */
SWJD_API const char* swjd_model_config(const swjd_model* model);

/* Runs a subcommand with a JSON object of parameters (NULL or "" for defaults).
   On SWJD_OK *out owns the result; a failed check still returns SWJD_OK with passed = 0. */
SWJD_API swjd_status swjd_run(const swjd_model* model, const char* command, const char* params_json,
                              swjd_result** out);
SWJD_API const char* swjd_result_json(const swjd_result* result);
SWJD_API const char* swjd_result_summary(const swjd_result* result);
SWJD_API int swjd_result_passed(const swjd_result* result);
SWJD_API size_t swjd_result_artifact_count(const swjd_result* result);
SWJD_API const char* swjd_result_artifact_name(const swjd_result* result, size_t index);
SWJD_API const void* swjd_result_artifact_data(const swjd_result* result, size_t index, size_t* size);
SWJD_API void swjd_result_free(swjd_result* result);

/* One path from (x, k) to time t with step h. x and x_out hold swjd_model_dim(model) values.
   *exited is set to 1 when the path left the exit ball (x_out is then the exit state). */
SWJD_API swjd_status swjd_simulate(const swjd_model* model, const double* x, int k, double t, double h,
                                   uint64_t seed, double* x_out, int* k_out, int* exited);

#ifdef __cplusplus
}
#endif

#endif
