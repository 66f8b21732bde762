"""Numerical tolerances shared across the package.

Every solver and validator reads from this one record so that a tolerance is
never silently redefined in two places.
"""

# Feasibility: max-norm residual allowed on equality constraints and bounds.
FEASIBILITY = 1e-8

# Optimality: reduced-cost / stationarity slack treated as zero.
OPTIMALITY = 1e-9

# Threshold below which a decision coordinate counts as inactive (zero).
ACTIVE = 1e-9

# Residual allowed when checking that a stored decision matches its instance.
DATA_FEASIBILITY = 1e-7

# Slack under which a converged QP constraint is treated as active (polish).
POLISH_ACTIVE = 1e-7

# Max asymmetry tolerated before a matrix is rejected as non-symmetric.
SYMMETRY = 1e-12
