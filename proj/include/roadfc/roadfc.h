/*
 * roadfc: yearly road-fatality forecasting with LSTM and self-regulating
 * LSTM (SR-LSTM) models.
 *
 * C interface to the forecasting engine. Objects are opaque handles created
 * and destroyed through this API. Every fallible call returns an rf_status;
 * on failure a human-readable message is available from rf_last_error(),
 * which is thread-local and valid until the next failing call on the same
 * thread.
 *
 * Status values double as the CLI exit codes.
 */
#ifndef ROADFC_ROADFC_H
#define ROADFC_ROADFC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(ROADFC_BUILDING_DLL)
#define RF_API __declspec(dllexport)
#else
#define RF_API __declspec(dllimport)
#endif
#else
#define RF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rf_status {
  RF_OK = 0,
  RF_ERR_INTERNAL = 1,
  RF_ERR_INPUT = 2,    /* unreadable file, missing artifact, schema mismatch */
  RF_ERR_DIVERGED = 3, /* non-finite loss or gradient */
  RF_ERR_CONFIG = 4,   /* invalid configuration */
  RF_ERR_ARGUMENT = 5  /* bad call: null pointer, shape mismatch, domain error */
} rf_status;

typedef struct rf_config rf_config;
typedef struct rf_model rf_model;

RF_API const char* rf_version(void);
RF_API const char* rf_last_error(void);
RF_API const char* rf_status_name(rf_status status);

/* Log lines from the pipeline commands; NULL disables logging. */
typedef void (*rf_log_fn)(const char* line, void* user);
RF_API void rf_set_log_callback(rf_log_fn fn, void* user);

/* ---- run configuration ------------------------------------------------ */

RF_API rf_status rf_config_create(rf_config** out);
RF_API void rf_config_destroy(rf_config* cfg);
/* Merges a JSON configuration file over the current values. */
RF_API rf_status rf_config_load_file(rf_config* cfg, const char* path);
/* Merges a JSON object given as text. */
RF_API rf_status rf_config_merge_json(rf_config* cfg, const char* json_text);
/* Sets one key. `value` is parsed as JSON when possible, otherwise taken as
 * a string, so both "42" and "lstm" work. */
RF_API rf_status rf_config_set(rf_config* cfg, const char* key, const char* value);
/* Resolved configuration as JSON; free with rf_string_free. */
RF_API rf_status rf_config_to_json(const rf_config* cfg, char** out);
RF_API void rf_string_free(char* s);

/* ---- pipeline commands ------------------------------------------------ */

RF_API rf_status rf_cmd_prep(const rf_config* cfg);
RF_API rf_status rf_cmd_train(const rf_config* cfg);
RF_API rf_status rf_cmd_eval(const rf_config* cfg);
RF_API rf_status rf_cmd_baseline(const rf_config* cfg);
RF_API rf_status rf_cmd_analyze(const rf_config* cfg);
RF_API rf_status rf_cmd_pipeline(const rf_config* cfg);

/* ---- trained models --------------------------------------------------- */

/* Loads the model section of a checkpoint.json (or a bare model document). */
RF_API rf_status rf_model_load(const char* path, rf_model** out);
RF_API void rf_model_destroy(rf_model* model);
RF_API size_t rf_model_input_size(const rf_model* model);
RF_API size_t rf_model_parameter_count(const rf_model* model);

/* Inference-mode predictions. `windows` holds `count` windows of
 * `lookback` rows by `features` columns, row-major and contiguous; one
 * scaled-space prediction per window is written to `out`. */
RF_API rf_status rf_model_predict(const rf_model* model, const double* windows, size_t count,
                                  size_t lookback, size_t features, double* out);

/* Finite-difference check of the analytic gradient on one window. */
RF_API rf_status rf_model_grad_check(const rf_model* model, const double* window,
                                     size_t lookback, size_t features, double target,
                                     double step, double* max_relative_error);

/* ---- metrics ---------------------------------------------------------- */

RF_API rf_status rf_rmse(const double* y, const double* yhat, size_t n, double* out);
RF_API rf_status rf_mae(const double* y, const double* yhat, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ROADFC_ROADFC_H */
