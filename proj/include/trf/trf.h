#ifndef TRF_TRF_H
#define TRF_TRF_H

/* C interface to the grey-box trust-region filter solver.
 *
 * Handles are opaque and owned by the caller; free each with its *_free
 * function. Every call that can fail returns a trf_status; on failure
 * trf_last_error() describes the problem (per thread, valid until the next
 * failing call on that thread). Strings returned through char** are heap
 * copies released with trf_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TRF_API __declspec(dllexport)
#else
#define TRF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum trf_status {
  TRF_OK = 0,
  TRF_ERR_ARGUMENT = 1, /* null handle or pointer, bad size */
  TRF_ERR_CONFIG = 2,   /* unknown key, bad value, invalid configuration */
  TRF_ERR_NOT_FOUND = 3,
  TRF_ERR_IO = 4,
  TRF_ERR_SOLVER = 5,
  TRF_ERR_INTERNAL = 6
} trf_status;

/* Final status of a solve; mirrors the solver's termination kinds. */
typedef enum trf_termination {
  TRF_CRITICAL_POINT = 0,
  TRF_FEASIBLE_POINT = 1,
  TRF_RESIDUAL_OPTIMAL = 2,
  TRF_ITER_LIMIT = 3,
  TRF_RESTORATION_FAIL = 4,
  TRF_SUBSOLVER_FAIL = 5
} trf_termination;

typedef struct trf_problem trf_problem;
typedef struct trf_config trf_config;
typedef struct trf_report trf_report;
typedef struct trf_campaign trf_campaign;

TRF_API const char* trf_version(void);
TRF_API const char* trf_last_error(void);
TRF_API const char* trf_status_message(trf_status status);
TRF_API void trf_string_free(char* s);

/* ---- problems ---------------------------------------------------------- */

/* Callbacks return 0 on success. Arrays use the layout x = (w, y, z).
 * grad may be NULL when only the value is wanted; jacobian (row-major,
 * count x dim) likewise. */
typedef int (*trf_blackbox_fn)(const double* w, double* y, void* user);
typedef int (*trf_objective_fn)(const double* x, double* f, double* grad, void* user);
typedef int (*trf_constraint_fn)(const double* x, double* values, double* jacobian, void* user);

/* A member of the benchmark library ("toy", an engineering or synthetic
 * problem name), with its oracle optimum. */
TRF_API trf_status trf_problem_from_benchmark(const char* name, uint64_t seed, trf_problem** out);

/* A user problem with n_w black-box inputs, n_y outputs and n_z further
 * variables. The objective must be set before solving; bounds default to
 * +-1e20 and the start to zero. */
TRF_API trf_status trf_problem_create(int n_w, int n_y, int n_z, trf_blackbox_fn blackbox, void* user,
                                      trf_problem** out);
TRF_API trf_status trf_problem_set_objective(trf_problem* p, trf_objective_fn f, void* user);
TRF_API trf_status trf_problem_set_equalities(trf_problem* p, int count, trf_constraint_fn h, void* user);
TRF_API trf_status trf_problem_set_inequalities(trf_problem* p, int count, trf_constraint_fn g, void* user);
TRF_API trf_status trf_problem_set_bounds(trf_problem* p, const double* lower, const double* upper);
TRF_API trf_status trf_problem_set_start(trf_problem* p, const double* x0);

TRF_API trf_status trf_problem_dims(const trf_problem* p, int* n_w, int* n_y, int* n_z);
/* TRF_ERR_NOT_FOUND for user problems. */
TRF_API trf_status trf_problem_oracle(const trf_problem* p, double* f);
TRF_API void trf_problem_free(trf_problem* p);

/* ---- configuration ----------------------------------------------------- */

/* variant "A0".."A4"; surrogate a short tag (l, q, sq, gp, ts, h) or long name. */
TRF_API trf_status trf_config_create(const char* variant, const char* surrogate, trf_config** out);
TRF_API trf_status trf_config_set(trf_config* c, const char* key, const char* value);
TRF_API trf_status trf_config_get(const trf_config* c, const char* key, char** value);
/* Newline-separated list of accepted keys. */
TRF_API trf_status trf_config_keys(char** keys);
TRF_API void trf_config_free(trf_config* c);

/* ---- solving ----------------------------------------------------------- */

/* Runs the method on a fresh copy of the problem (zeroed call counter).
 * A run that ends badly is still TRF_OK; inspect trf_report_status. */
TRF_API trf_status trf_solve(const trf_problem* p, const trf_config* c, trf_report** out);

TRF_API trf_termination trf_report_status(const trf_report* r);
TRF_API const char* trf_report_status_name(const trf_report* r);
TRF_API const char* trf_report_message(const trf_report* r);
TRF_API double trf_report_f(const trf_report* r);
TRF_API double trf_report_theta(const trf_report* r);
TRF_API int trf_report_iterations(const trf_report* r);
TRF_API uint64_t trf_report_blackbox_calls(const trf_report* r);
TRF_API double trf_report_wall_time(const trf_report* r);
/* 1 solved, 0 not solved, -1 no oracle to compare against. */
TRF_API int trf_report_solved(const trf_report* r);
/* Copies min(len, dim) entries; *dim receives the full length when non-NULL. */
TRF_API trf_status trf_report_x(const trf_report* r, double* x, size_t len, size_t* dim);
TRF_API trf_status trf_report_trace_csv(const trf_report* r, char** csv);
TRF_API trf_status trf_report_write_trace(const trf_report* r, const char* path);
TRF_API void trf_report_free(trf_report* r);

/* ---- benchmark library ------------------------------------------------- */

/* Manifest CSV of a suite selector: engineering, synthetic, all, toy or a
 * comma-separated list of names. */
TRF_API trf_status trf_suite_manifest(const char* suite, uint64_t seed, char** csv);

/* ---- campaigns --------------------------------------------------------- */

typedef void (*trf_progress_fn)(const char* variant, const char* surrogate, const char* problem,
                                const char* status, int solved, size_t done, size_t total, void* user);

TRF_API trf_status trf_campaign_from_spec_text(const char* text, trf_campaign** out);
TRF_API trf_status trf_campaign_from_spec_file(const char* path, trf_campaign** out);
/* A finished campaign read back from its summary.json. */
TRF_API trf_status trf_campaign_from_summary(const char* path, trf_campaign** out);
TRF_API trf_status trf_campaign_set_workers(trf_campaign* c, int workers);
TRF_API trf_status trf_campaign_set_traces(trf_campaign* c, int enabled);
TRF_API trf_status trf_campaign_run(trf_campaign* c, trf_progress_fn progress, void* user);
TRF_API trf_status trf_campaign_counts(const trf_campaign* c, size_t* runs, size_t* solved);
TRF_API trf_status trf_campaign_matrix_csv(const trf_campaign* c, char** csv);
/* summary.json, runs.csv, profile and matrix CSVs (and traces when enabled). */
TRF_API trf_status trf_campaign_write(const trf_campaign* c, const char* out_dir);
/* Only the matrix and profile CSVs. */
TRF_API trf_status trf_campaign_emit_profiles(const trf_campaign* c, const char* out_dir);
TRF_API void trf_campaign_free(trf_campaign* c);

#ifdef __cplusplus
}
#endif

#endif
