#ifndef NEEDSCOPE_NEEDSCOPE_H
#define NEEDSCOPE_NEEDSCOPE_H

/*
 * needscope C API.
 *
 * Every function returning ns_status leaves a message retrievable with
 * ns_last_error() on failure (per thread). Strings returned through char**
 * out-parameters are owned by the caller and released with ns_string_free().
 * Reports are JSON documents.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(NEEDSCOPE_BUILDING)
#define NS_API __declspec(dllexport)
#else
#define NS_API __declspec(dllimport)
#endif
#else
#define NS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ns_status {
  NS_OK = 0,
  NS_E_INVALID_ARGUMENT = 1,
  NS_E_CONFIG = 2,
  NS_E_IO = 3,
  NS_E_PARSE = 4,
  NS_E_VALIDATION = 5,
  NS_E_UNDEFINED = 6,
  NS_E_OUT_OF_RANGE = 7,
  NS_E_INSUFFICIENT_DATA = 8,
  NS_E_INTERNAL = 9
} ns_status;

NS_API const char* ns_version(void);
NS_API const char* ns_status_name(ns_status status);
NS_API const char* ns_last_error(void);
/* Process exit code for a status: 0 success, 2 configuration error, 1 otherwise. */
NS_API int ns_exit_code(ns_status status);
NS_API void ns_string_free(char* s);

/* Caps worker threads for all stages; 0 restores the hardware default. */
NS_API ns_status ns_set_threads(unsigned threads);
/* Recorded in every manifest written afterwards. */
NS_API ns_status ns_set_command_line(int argc, const char* const* argv);

/* ---- taxonomy and matching ---- */

typedef struct ns_taxonomy ns_taxonomy;
typedef struct ns_matcher ns_matcher;

NS_API ns_status ns_taxonomy_load(const char* path, ns_taxonomy** out);
NS_API ns_status ns_taxonomy_parse(const char* text, size_t length, ns_taxonomy** out);
NS_API void ns_taxonomy_free(ns_taxonomy* taxonomy);
NS_API size_t ns_taxonomy_size(const ns_taxonomy* taxonomy);
/* Version, detector counts per category and logic, compiled automaton sizes. */
NS_API ns_status ns_taxonomy_stats(const ns_taxonomy* taxonomy, char** report);
/* Examples that miss their own detector or also match others. */
NS_API ns_status ns_taxonomy_self_check(const ns_taxonomy* taxonomy, char** report);

NS_API ns_status ns_matcher_compile(const ns_taxonomy* taxonomy, ns_matcher** out);
NS_API void ns_matcher_free(ns_matcher* matcher);
/* Semicolon-joined ids of matching detectors; clicked_url may be NULL. The
 * query and URL are normalized the same way log records are. */
NS_API ns_status ns_matcher_classify(const ns_matcher* matcher, const char* query,
                                     const char* clicked_url, char** detector_ids);

/* ---- estimator primitives ---- */

NS_API ns_status ns_relative_change(double e_t2_2020, double e_t1_2020, double e_t2_2019,
                                    double e_t1_2019, double* c);
NS_API double ns_percent_change(double c);
/* out receives an ISO date ("YYYY-MM-DD") and must hold 11 bytes. */
NS_API ns_status ns_align_to_prior_year(const char* date, char* out);
NS_API ns_status ns_pearson(const double* x, const double* y, size_t n, double* r, double* p);

/* ---- stages ----
 * Each stage writes its outputs atomically, records itself in manifest.json
 * of the output directory and returns a JSON report. NULL or zero fields take
 * the documented defaults. Dates are ISO strings, ranges "first:last". */

typedef struct ns_observation {
  const char* range_2019;      /* default 2019-01-01:2019-08-02 */
  const char* range_2020;      /* default 2020-01-01:2020-08-02 */
  int64_t anonymity_threshold; /* default 100 */
} ns_observation;

typedef struct ns_windows {
  const char* baseline;       /* default 2020-01-06:2020-02-23 */
  const char* pandemic_start; /* default 2020-03-16 */
  const char* initial;        /* default 2020-03-16:2020-04-12 */
  const char* longterm;       /* default 2020-07-06:2020-08-02 */
} ns_windows;

typedef struct ns_gen_options {
  const char* config;
  const char* out_dir;
  int override_seed;
  uint64_t seed;
} ns_gen_options;
NS_API ns_status ns_stage_gen(const ns_gen_options* options, char** report);

typedef struct ns_classify_options {
  const char* taxonomy;
  const char* const* inputs;
  size_t n_inputs;
  ns_observation observation;
  const char* output;
} ns_classify_options;
NS_API ns_status ns_stage_classify(const ns_classify_options* options, char** report);

typedef struct ns_aggregate_options {
  const char* taxonomy;
  const char* const* tagged;
  size_t n_tagged;
  const char* crosswalk; /* required for county and state cubes */
  const char* geo;       /* zip (default), county, state or national */
  const char* time;      /* day (default) or week */
  const char* output;
} ns_aggregate_options;
NS_API ns_status ns_stage_aggregate(const ns_aggregate_options* options, char** report);

typedef struct ns_trend_options {
  const char* cube;
  const char* crosswalk;
  const char* need;
  const char* geo; /* default "US" */
  ns_observation observation;
  ns_windows windows;
  int smooth;      /* moving-average half width; negative selects the default 3 */
  int n_boot;      /* negative selects the default 500 */
  double level;    /* default 0.95 */
  uint64_t seed;
  double laplace;
  const char* scheme; /* "window+baseline" (default) or "window" */
  const char* output;
} ns_trend_options;
NS_API ns_status ns_stage_trend(const ns_trend_options* options, char** report);

typedef struct ns_policy_options {
  const char* cube;
  const char* crosswalk;
  const char* policies;
  const char* need;
  ns_observation observation;
  ns_windows windows;
  double laplace;
  const char* output;
} ns_policy_options;
NS_API ns_status ns_stage_policy(const ns_policy_options* options, char** report);

typedef struct ns_external_options {
  const char* cube;
  const char* crosswalk;
  const char* external;
  const char* need;
  const char* geo;  /* default "US" */
  const char* mode; /* "auto" (default) or "relative" */
  ns_observation observation;
  ns_windows windows;
  const char* output;
} ns_external_options;
NS_API ns_status ns_stage_external(const ns_external_options* options, char** report);

typedef struct ns_precision_options {
  const char* taxonomy;
  const char* corpus;
  const char* output;
} ns_precision_options;
NS_API ns_status ns_stage_eval_precision(const ns_precision_options* options, char** report);

typedef struct ns_trend_agreement_options {
  const char* table;
  const char* output;
} ns_trend_agreement_options;
NS_API ns_status ns_stage_eval_trends(const ns_trend_agreement_options* options, char** report);

typedef struct ns_clientrate_options {
  const char* const* inputs;
  size_t n_inputs;
  const char* demographics;
  const char* output;
} ns_clientrate_options;
NS_API ns_status ns_stage_eval_clientrate(const ns_clientrate_options* options, char** report);

NS_API ns_status ns_pipeline_run(const char* config, const char* out_dir, char** report);

#ifdef __cplusplus
}
#endif

#endif
