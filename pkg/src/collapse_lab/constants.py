"""Centralized numeric tolerances and model defaults.

All comparison thresholds used across the package live here so that test
expectations and library behaviour cannot drift apart.
"""

# Algebraic tolerances: single linear-algebra operations (hermiticity,
# idempotence, norms after one normalization).
ATOL_ALGEBRAIC = 1e-12

# Accumulated tolerances: quantities summed over many terms (probability
# totals, norm drift over long unitary runs).
ATOL_ACCUMULATED = 1e-10

# Relative energy drift allowed over a unitary-only evolution segment.
RTOL_ENERGY_DRIFT = 1e-8

# Squared norms at or below this are treated as the zero vector.
NORM_FLOOR = 1e-30

# Branch weights at or below this cannot be projected onto.
NULL_OUTCOME_FLOOR = 1e-15

# Amplitude-shift magnitudes above this trigger a calibration warning:
# nonrelativistic interactions should sit around 1e-4 or below.
SHIFT_WARN_THRESHOLD = 1e-3

# Reduction cadence: a completed interaction (integrated timing parameter
# close to 1) yields about 64 stochastic reduction steps.
TAU_STEP = 1.0 / 64.0

# Default per-step weight transfer used by the experiment harness.
DEFAULT_DELTA = 0.01

# Statistical pass thresholds are fixed at this many binomial/multinomial
# standard deviations.
SIGMA_MULTIPLIER = 3.0

# Largest matrix side propagated by exact eigendecomposition; larger
# separable systems use the split-step propagator.
EIGEN_PROPAGATOR_MAX_DIM = 1024

# hbar in eV*s, used only for documentation-level unit arithmetic.
HBAR_EV_S = 6.582119569e-16
