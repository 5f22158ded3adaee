/* C interface for the nelson-eff effective-dispersion library.
 *
 * All functions returning int use these codes:
 *   0  ok
 *   2  usage (null handle / bad argument shape)
 *   3  domain (input outside the mathematical domain)
 *   4  accuracy (requested tolerance not reached)
 *   5  resource (memory budget exceeded)
 *   70 internal
 * Constructors return NULL on failure. nelson_eff_last_error() describes the
 * most recent failure on the calling thread.
 */

#ifndef NELSON_EFF_H
#define NELSON_EFF_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct NelsonEffParams NelsonEffParams;
typedef struct NelsonEffTable NelsonEffTable;

#define NELSON_EFF_OK 0
#define NELSON_EFF_ERR_USAGE 2
#define NELSON_EFF_ERR_DOMAIN 3
#define NELSON_EFF_ERR_ACCURACY 4
#define NELSON_EFF_ERR_RESOURCE 5
#define NELSON_EFF_ERR_INTERNAL 70

/* Last error message for this thread; valid until the next failing call. */
const char *nelson_eff_last_error(void);

/* Parameter handles. epsilon must lie in [0, 1/2); lambda is the momentum
 * cutoff of the form factor. */
NelsonEffParams *nelson_eff_params_new_nelson(double mu, double mass,
                                              double epsilon, double lambda);
NelsonEffParams *nelson_eff_params_new_powerlaw(double mu, double mass,
                                                double epsilon, double a,
                                                double lambda);
void nelson_eff_params_free(NelsonEffParams *params);

/* || omega_mu^{-s} V ||_{L2}. */
int nelson_eff_mu_norm(const NelsonEffParams *params, double s, double *out);

/* Self-consistent generator g(p); 0 for p >= mu/2. */
int nelson_eff_solve_g(const NelsonEffParams *params, double p_abs, double tol,
                       double *out);

/* Explicit generator g_eff(p) with g0 = g(0). */
int nelson_eff_g_eff(const NelsonEffParams *params, double p_abs, double g0,
                     double *out);

/* Power-series coefficient alpha_j(mu); j must be even. */
int nelson_eff_alpha_coeff(const NelsonEffParams *params, int j, double g0,
                           double *out);

/* Generator tables: solve g on `nodes` Chebyshev points over [0, p_max]. */
NelsonEffTable *nelson_eff_table_build(const NelsonEffParams *params, int nodes,
                                       double p_max, double tol);
void nelson_eff_table_free(NelsonEffTable *table);
int nelson_eff_table_eval_g(const NelsonEffTable *table, double p_abs,
                            double *out);
int nelson_eff_table_eval_h(const NelsonEffTable *table, double p_abs,
                            double *out);

/* Membership of (a, b) in the scaling region I_N; writes 0 or 1. */
int nelson_eff_region_member(double a, double b, int n, int *out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NELSON_EFF_H */
