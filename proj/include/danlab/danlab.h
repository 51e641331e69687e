#ifndef DANLAB_H
#define DANLAB_H

/* C interface to the danlab library. Every call returns a danlab_status;
 * on failure danlab_last_error() describes the problem (thread-local, valid
 * until the next failing call on the same thread). Strings returned through
 * char** outputs are owned by the caller and released with danlab_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DANLAB_API __declspec(dllexport)
#else
#define DANLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum danlab_status {
    DANLAB_OK = 0,
    DANLAB_ERR_VALIDATION = 1,
    DANLAB_ERR_DIMENSION = 2,
    DANLAB_ERR_EMPTY_INPUT = 3,
    DANLAB_ERR_CONTRACT = 4,
    DANLAB_ERR_NON_FINITE = 5,
    DANLAB_ERR_IO = 6,
    DANLAB_ERR_LOAD = 7,
    DANLAB_ERR_INTERNAL = 8
} danlab_status;

typedef struct danlab_experiment danlab_experiment;
typedef struct danlab_analysis danlab_analysis;
typedef struct danlab_sweep danlab_sweep;

typedef struct danlab_eval_report {
    size_t n_samples;
    size_t n_modes;
    size_t modes_captured;
    double entropy;
    double tv_to_target;
    double hq_fraction;
    double mmd2;
    int no_assigned;
} danlab_eval_report;

typedef struct danlab_region_summary {
    double missing_max_abs_weight;
    double approach_max_abs_weight;
    double ratio;
} danlab_region_summary;

typedef void (*danlab_progress_fn)(int64_t iteration, int64_t total, void* user);
typedef void (*danlab_log_fn)(const char* line, void* user);

DANLAB_API const char* danlab_last_error(void);
DANLAB_API const char* danlab_status_name(danlab_status s);
DANLAB_API void danlab_string_free(char* s);

/* Built-in profile names, newline separated. */
DANLAB_API danlab_status danlab_profile_names(char** out);
DANLAB_API danlab_status danlab_profile_json(const char* name, char** out);

/* Experiments. path_or_profile is a JSON file or a built-in profile name. */
DANLAB_API danlab_status danlab_experiment_load(const char* path_or_profile, danlab_experiment** out);
DANLAB_API danlab_status danlab_experiment_parse(const char* json_text, danlab_experiment** out);
DANLAB_API void danlab_experiment_free(danlab_experiment* e);
DANLAB_API danlab_status danlab_experiment_set_seed(danlab_experiment* e, uint64_t seed);
DANLAB_API danlab_status danlab_experiment_seed(const danlab_experiment* e, uint64_t* out);
/* eval.n_samples from the config. */
DANLAB_API danlab_status danlab_experiment_eval_samples(const danlab_experiment* e, size_t* out);
DANLAB_API danlab_status danlab_experiment_to_json(const danlab_experiment* e, char** out);
/* Output root: out_dir if non-NULL, else the config's output_dir, else $DAN_LAB_OUT, else "runs". */
DANLAB_API danlab_status danlab_output_root(const danlab_experiment* e, const char* out_dir, char** out);

/* Trains and writes a run directory under out_root; its path goes to run_dir.
 * A non-finite abort still writes artifacts and returns DANLAB_ERR_NON_FINITE. */
DANLAB_API danlab_status danlab_train(const danlab_experiment* e, const char* out_root, danlab_progress_fn progress,
                                      void* user, char** run_dir);

/* Evaluates a generator checkpoint against the experiment's mixture.
 * csv_out (nullable) receives the header line and one CSV row. */
DANLAB_API danlab_status danlab_eval(const danlab_experiment* e, const char* checkpoint, size_t n_samples,
                                     danlab_eval_report* report, char** csv_out);

/* Analyses (1-D weighting curve). */
DANLAB_API danlab_status danlab_analysis_load(const char* path_or_profile, danlab_analysis** out);
DANLAB_API void danlab_analysis_free(danlab_analysis* a);
DANLAB_API danlab_status danlab_analysis_name(const danlab_analysis* a, char** out);
DANLAB_API danlab_status danlab_analyze(const danlab_analysis* a, const char* csv_path, danlab_region_summary* out);

/* Sweeps. n_samples = 0 keeps each run's configured eval.n_samples. */
DANLAB_API danlab_status danlab_sweep_load(const char* path, danlab_sweep** out);
DANLAB_API void danlab_sweep_free(danlab_sweep* s);
DANLAB_API danlab_status danlab_sweep_set_parallelism(danlab_sweep* s, size_t parallelism);
DANLAB_API danlab_status danlab_sweep_run(const danlab_sweep* s, const char* out_root, size_t n_samples,
                                          danlab_log_fn log, void* user, char** aggregate_path,
                                          size_t* n_aborted);

#ifdef __cplusplus
}
#endif

#endif
