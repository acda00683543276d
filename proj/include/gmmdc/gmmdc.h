/*
 *   Copyright 2026 The gmmdc Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */
/*
 * C interface to the gmmdc library.
 *
 * Objects are opaque handles created by *_new functions and released with the
 * matching *_free. Every fallible call returns a gmmdc_status; on failure the
 * message (and, for numerical failures, the offending condition number) can
 * be read back with gmmdc_last_error() on the same thread.
 *
 * Matrices cross the boundary as row-major double arrays. Undefined scalar
 * results (e.g. the Windmeijer variance of a one-step fit) are NaN.
 */
#ifndef GMMDC_GMMDC_H
#define GMMDC_GMMDC_H

#include <stddef.h>
#include <stdint.h>

#if defined(GMMDC_BUILDING)
#define GMMDC_API __attribute__((visibility("default")))
#else
#define GMMDC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gmmdc_status {
    GMMDC_OK = 0,
    GMMDC_E_INVALID_ARGUMENT = 1,
    GMMDC_E_DIMENSION_MISMATCH = 2,
    GMMDC_E_RANK_DEFICIENT = 3,
    GMMDC_E_UNBALANCED = 4,
    GMMDC_E_SINGULAR_WEIGHT = 5,
    GMMDC_E_SINGULAR_NORMAL_MATRIX = 6,
    GMMDC_E_ILL_CONDITIONED_CORRECTION = 7,
    GMMDC_E_DEGENERATE_STANDARD_ERROR = 8,
    GMMDC_E_J_NOT_DEFINED = 9,
    GMMDC_E_TOO_FEW_UNITS = 10,
    GMMDC_E_ALL_RESAMPLES_FAILED = 11,
    GMMDC_E_ALL_REPLICATIONS_FAILED = 12,
    GMMDC_E_NOT_AVAILABLE = 13,
    GMMDC_E_INTERNAL = 99
} gmmdc_status;

typedef struct gmmdc_system gmmdc_system;
typedef struct gmmdc_fit gmmdc_fit;
typedef struct gmmdc_report gmmdc_report;

GMMDC_API const char* gmmdc_version(void);
GMMDC_API const char* gmmdc_status_name(gmmdc_status status);
/* Non-zero for failures caused by the data's numerics (singular matrices,
 * degenerate standard errors) rather than by invalid input. */
GMMDC_API int gmmdc_status_is_numerical(gmmdc_status status);
GMMDC_API const char* gmmdc_last_error(void);
GMMDC_API double gmmdc_last_error_condition(void);

/* ---- moment systems ---------------------------------------------------- */

typedef enum gmmdc_panel_mode {
    GMMDC_PANEL_PREDETERMINED = 0,
    GMMDC_PANEL_AR1 = 1
} gmmdc_panel_mode;

/* Linear IV moments Z_i (y_i - X_i' theta). X is n x k, Z is n x q. */
GMMDC_API gmmdc_status gmmdc_system_iv(const double* y, const double* X, const double* Z, size_t n, size_t k,
                                       size_t q, gmmdc_system** out);

/* First-differenced panel moments. y and x are N x T; x may be NULL in AR(1)
 * mode. */
GMMDC_API gmmdc_status gmmdc_system_panel(const double* y, const double* x, size_t N, size_t T,
                                          gmmdc_panel_mode mode, gmmdc_system** out);

/* Generic system g_i(theta) = h_i + G_i theta. h is n x q, jacobians is
 * (n*q) x k (blocks of q rows), obs_weights is (n*q) x q or NULL,
 * cluster_id has n entries or is NULL. */
GMMDC_API gmmdc_status gmmdc_system_new(const double* h, const double* jacobians, const double* obs_weights,
                                        const int* cluster_id, size_t n, size_t q, size_t k, gmmdc_system** out);

GMMDC_API void gmmdc_system_free(gmmdc_system* sys);
GMMDC_API gmmdc_status gmmdc_system_dims(const gmmdc_system* sys, size_t* n, size_t* q, size_t* k);

/* ---- estimation -------------------------------------------------------- */

typedef enum gmmdc_estimator {
    GMMDC_ONE_STEP = 0,
    GMMDC_TWO_STEP = 1,
    GMMDC_ITERATED = 2
} gmmdc_estimator;

typedef enum gmmdc_weight {
    GMMDC_WEIGHT_DATA_AVERAGE = 0, /* n^{-1} sum W_i: Z'Z/n for IV, H-weight for panels */
    GMMDC_WEIGHT_IDENTITY = 1
} gmmdc_weight;

typedef struct gmmdc_plan {
    gmmdc_estimator estimator;
    gmmdc_weight weight;
    int centered;
    double tol;
    int max_iter;
} gmmdc_plan;

/* Two-step, data-average initial weight, uncentered, tol 1e-8, 1000 iterations. */
GMMDC_API void gmmdc_plan_default(gmmdc_plan* plan);

GMMDC_API gmmdc_status gmmdc_fit_new(const gmmdc_system* sys, const gmmdc_plan* plan, gmmdc_fit** out);
GMMDC_API void gmmdc_fit_free(gmmdc_fit* fit);
GMMDC_API size_t gmmdc_fit_k(const gmmdc_fit* fit);
GMMDC_API gmmdc_status gmmdc_fit_theta(const gmmdc_fit* fit, double* out, size_t len);
GMMDC_API gmmdc_status gmmdc_fit_g_n(const gmmdc_fit* fit, double* out, size_t len);
GMMDC_API int gmmdc_fit_converged(const gmmdc_fit* fit);
GMMDC_API int gmmdc_fit_iterations(const gmmdc_fit* fit);

/* ---- variance ---------------------------------------------------------- */

typedef enum gmmdc_matrix_id {
    GMMDC_V_CONV = 0,
    GMMDC_V_W = 1,
    GMMDC_V_DC = 2,
    GMMDC_D_HAT = 3,
    GMMDC_SIGMA_N = 4,
    GMMDC_C_HAT = 5
} gmmdc_matrix_id;

typedef enum gmmdc_se_kind {
    GMMDC_SE_CONV = 0,
    GMMDC_SE_W = 1,
    GMMDC_SE_DC = 2
} gmmdc_se_kind;

GMMDC_API gmmdc_status gmmdc_report_new(const gmmdc_system* sys, const gmmdc_fit* fit, gmmdc_report** out);
GMMDC_API void gmmdc_report_free(gmmdc_report* report);
/* Non-zero when the matrix is defined for this fit (V_w: not one-step;
 * C_hat: two-step only). */
GMMDC_API int gmmdc_report_has(const gmmdc_report* report, gmmdc_matrix_id id);
/* k*k entries, row-major. GMMDC_E_NOT_AVAILABLE when undefined. */
GMMDC_API gmmdc_status gmmdc_report_matrix(const gmmdc_report* report, gmmdc_matrix_id id, double* out, size_t len);
GMMDC_API gmmdc_status gmmdc_report_se(const gmmdc_report* report, gmmdc_se_kind kind, double* out, size_t len);
GMMDC_API size_t gmmdc_report_warning_count(const gmmdc_report* report);
GMMDC_API const char* gmmdc_report_warning(const gmmdc_report* report, size_t i);

/* ---- inference --------------------------------------------------------- */

typedef struct gmmdc_test_result {
    double statistic;
    int df; /* -1 for t tests */
    double p_value;
    int reject_5pct;
    double ci_lower; /* NaN for J */
    double ci_upper;
} gmmdc_test_result;

GMMDC_API gmmdc_status gmmdc_t_test(const gmmdc_fit* fit, const gmmdc_report* report, gmmdc_se_kind kind,
                                    size_t coef, double null_value, gmmdc_test_result* out);
GMMDC_API gmmdc_status gmmdc_j_test(const gmmdc_system* sys, const gmmdc_fit* fit, gmmdc_test_result* out);

typedef struct gmmdc_bootstrap_result {
    int B;
    double crit_abs;
    double t_original;
    int reject_5pct;
    int failures;
    int reliability_warning;
} gmmdc_bootstrap_result;

/* t_star may be NULL; otherwise it receives B entries (NaN for skipped
 * resamples). */
GMMDC_API gmmdc_status gmmdc_bootstrap(const gmmdc_system* sys, const gmmdc_plan* plan, size_t coef, int B,
                                       uint64_t seed, double null_value, int threads, gmmdc_bootstrap_result* out,
                                       double* t_star);

/* ---- simulation studies ------------------------------------------------ */

typedef enum gmmdc_design {
    GMMDC_DESIGN_IV = 0,
    GMMDC_DESIGN_PANEL_RC = 1,
    GMMDC_DESIGN_PANEL_LAG = 2
} gmmdc_design;

typedef struct gmmdc_study_config {
    gmmdc_design design;
    size_t n; /* observations (IV) or individuals (panels) */
    size_t T;
    double alpha0;
    int replications;
    int estimators[3]; /* one-step, two-step, iterated */
    int bootstrap_B;   /* 0 disables the bootstrap */
    int bootstrap_estimators[3];
    uint64_t seed;
    int fixed_misspec;
    int centered;
} gmmdc_study_config;

typedef struct gmmdc_estimator_summary {
    int present;
    double mean_theta;
    double sd_theta;
    double mean_se_conv;
    double mean_se_w;
    double mean_se_dc;
    double rej_conv;
    double rej_w;
    double rej_dc;
    double rej_boot;
    double rej_j;
} gmmdc_estimator_summary;

typedef struct gmmdc_study_summary {
    double truth;
    int completed;
    int failures;
    int sd_defined;
    int failure_flag;
    gmmdc_estimator_summary estimators[3];
} gmmdc_study_summary;

typedef void (*gmmdc_progress_fn)(int done, int total, void* user);

GMMDC_API void gmmdc_study_config_default(gmmdc_study_config* cfg);
GMMDC_API gmmdc_status gmmdc_run_study(const gmmdc_study_config* cfg, int threads, gmmdc_progress_fn progress,
                                       void* user, gmmdc_study_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* GMMDC_GMMDC_H */
