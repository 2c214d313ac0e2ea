"""Statistical acceptance thresholds, in one place.

Monte Carlo checks run at fixed seeds, so each verdict is reproducible; the
margins below keep the false-failure probability of a fresh seed small.
"""

# goodness of fit
CHI2_ALPHA = 1e-4
NEGATIVE_CONTROL_ALPHA = 1e-6
EQUIVALENCE_REPLICATES = 1_000_000
EQUIVALENCE_BLOCK = 50_000

# mean-vs-oracle comparisons, in standard errors
ORACLE_SE_MULT = 4.0
VARIANCE_SE_MULT = 4.0
BIRTH_MEAN_SE_MULT = 3.0
# degree classes compared against E[N_k(n)]/n need at least this expected count
MIN_EXPECTED_COUNT = 1.0

# limit tolerances
LINEAR_PK_MAX_DEV = 0.01
INVERSE_TV_MAX = 0.02
D_OVER_N_ABS_TOL = 0.02
FIXED_VERTEX_REL_TOL = 0.10
C_N_REL_TOL = 0.05
C_N_M2_RANGE = (0.9, 2.1)
BIRTH_SQRT2_REL_TOL = 0.02
SIZE_BIASED_LINEAR_TOL = 0.01
SIZE_BIASED_INVERSE_TOL = 0.02
EXPECTED_DEGREE_RATIO_RANGE = (0.85, 1.15)
NK_EPSILON_C1 = 10.0

# central limit diagnostics
KS_MAX = 0.15
CLT_VARIANCE_RANGE = (0.7, 1.3)

# tightness of d_i(n) / (m sqrt(log n)) for m > 1
QUANTILE_BAND = (0.01, 0.99)
QUANTILE_BAND_MAX_DRIFT = 0.20

# malthusian-limits
RHO_AT_ONE_TOL = 1e-12
LAMBDA_STABILITY_TOL = 1e-10
PMF_MASS_TOL = 1e-10
PMF_MEAN_TOL = 1e-8
TAIL_GAMMA_REL_TOL = 1e-10

# exact-oracle float/rational crossover
CROSSOVER_REL_TOL = 1e-9

# wall-clock budgets per criterion, seconds
RUNTIME_LIMITS = {
    1: 10.0,
    2: 120.0,
    4: 1.0,
    5: 60.0,
    6: 300.0,
    7: 600.0,
    8: 600.0,
    9: 60.0,
}
