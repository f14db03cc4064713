/* C interface to the obsmatch library.
 *
 * Every fallible call returns an om_status; on failure the message is kept
 * per thread and read back with om_last_error(). Handles are opaque and owned
 * by the caller, who releases them with the matching *_destroy function.
 * Strings returned through char** are released with om_string_free().
 */
#ifndef OBSMATCH_H
#define OBSMATCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  define OM_API __declspec(dllexport)
#elif defined(__GNUC__)
#  define OM_API __attribute__((visibility("default")))
#else
#  define OM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum om_status {
    OM_OK = 0,
    OM_ERR_INVALID_ARGUMENT = 1,
    OM_ERR_VALIDATION = 2,
    OM_ERR_DIVERGED_ORBIT = 3,
    OM_ERR_BASIN_CONFIGURATION = 4,
    OM_ERR_EVALUATION = 5,
    OM_ERR_BREAKPOINT = 6,
    OM_ERR_DATA_QUALITY = 7,
    OM_ERR_INSUFFICIENT_TAIL = 8,
    OM_ERR_DEGENERATE_SAMPLE = 9,
    OM_ERR_FIT_FAILURE = 10,
    OM_ERR_INFINITE_H = 11,
    OM_ERR_MODEL = 12,
    OM_ERR_UNSUPPORTED_ORDER = 13,
    OM_ERR_UNKNOWN_NAME = 14,
    OM_ERR_IO = 15,
    OM_ERR_INTERNAL = 99
} om_status;

typedef struct om_system om_system;
typedef struct om_observable om_observable;
typedef struct om_series om_series;
typedef struct om_interval_model om_interval_model;
typedef struct om_experiment om_experiment;

OM_API const char* om_version(void);
OM_API const char* om_status_string(om_status status);
/* Message of the last failed call on this thread, "" if none. */
OM_API const char* om_last_error(void);
OM_API void om_string_free(char* s);

/* Systems: "doubling", "henon", "gasket"; params is a JSON object or NULL. */
OM_API om_status om_system_create(const char* name, const char* params_json, om_system** out);
OM_API void om_system_destroy(om_system* system);
OM_API int om_system_dim(const om_system* system);

/* spec is a catalog name or a JSON observable spec (as in the config). */
OM_API om_status om_observable_create(const char* spec, int in_dim, om_observable** out);
OM_API void om_observable_destroy(om_observable* obs);
OM_API int om_observable_in_dim(const om_observable* obs);
OM_API int om_observable_out_dim(const om_observable* obs);
OM_API om_status om_observable_evaluate(const om_observable* obs, const double* x, double* y);

/* Matching series of length n for q trajectories; metric is "sup" or "euclidean". */
OM_API om_status om_series_generate(const om_system* system, const om_observable* obs, int q, long long n,
                                    uint64_t master_seed, uint64_t run, const char* metric, om_series** out);
OM_API om_status om_series_from_values(const double* values, size_t n, om_series** out);
OM_API om_status om_series_load(const char* path, om_series** out);
OM_API om_status om_series_dump(const om_series* series, const char* path);
OM_API void om_series_destroy(om_series* series);
OM_API size_t om_series_length(const om_series* series);
OM_API const double* om_series_data(const om_series* series);
/* Maxima of the complete blocks; a trailing partial block is dropped. */
OM_API om_status om_series_block_maxima(const om_series* series, long long block_size, om_series** out);

typedef struct om_gumbel {
    double location;
    double scale;
    double loglik;
    long long n_samples;
    int iterations;
} om_gumbel;

OM_API om_status om_fit_gumbel(const double* data, size_t n, om_gumbel* out);
OM_API om_status om_dq_from_gumbel(const om_gumbel* fit, int q, double* out);
OM_API om_status om_theta_from_gumbel(const om_gumbel* fit, int q, long long block_size, double dq, double* out);

typedef struct om_ei {
    double theta_hat;
    double theta_hat_raw;
    double threshold;
    long long exceedances;
    int low_exceedances;
} om_ei;

/* p_hat receives K values when not NULL. */
OM_API om_status om_estimate_ei(const double* data, size_t n, double quantile, int K, double* p_hat, om_ei* out);
OM_API om_status om_hq_from_theta(double theta, int q, double* out);

/* Doubling map observed through a piecewise observable. */
OM_API om_status om_interval_model_doubling(const om_observable* obs, om_interval_model** out);
OM_API void om_interval_model_destroy(om_interval_model* model);
OM_API om_status om_theta_interval(const om_interval_model* model, int q, int resolution, double* out);
/* h2_rates receives k_max values when not NULL. */
OM_API om_status om_genericity(const om_interval_model* model, long long samples, int k_max, uint64_t seed,
                               double* h1_rate, double* h2_rates);
OM_API om_status om_dq_self_similar(const double* weights, size_t n, double ratio, double q, double* out);
OM_API om_status om_hk_projection(double dq, int m, double* out);

OM_API om_status om_experiment_load(const char* config_path, om_experiment** out);
OM_API om_status om_experiment_from_json(const char* config_json, om_experiment** out);
OM_API om_status om_experiment_from_manifest(const char* manifest_path, om_experiment** out);
OM_API void om_experiment_destroy(om_experiment* exp);
OM_API om_status om_experiment_set_seed(om_experiment* exp, uint64_t master_seed);
/* "estimate_dq", "estimate_ei", "analytic", "genericity" or "all". */
OM_API om_status om_experiment_set_mode(om_experiment* exp, const char* mode);
OM_API om_status om_experiment_validate(const om_experiment* exp);
OM_API om_status om_experiment_config_json(const om_experiment* exp, char** out);
/* threads < 0 keeps the config value. */
OM_API om_status om_experiment_run(om_experiment* exp, const char* out_dir, int threads, int quiet);
/* Results of the last run. */
OM_API om_status om_experiment_results_csv(const om_experiment* exp, char** out);
OM_API const char* om_experiment_csv_path(const om_experiment* exp);
OM_API const char* om_experiment_manifest_path(const om_experiment* exp);
OM_API int om_experiment_failed_cells(const om_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif
