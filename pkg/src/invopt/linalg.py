"""Dense linear-algebra helpers and input validation.

Thin, contract-checked wrappers over LAPACK (via numpy). Centralizing them
keeps minimum-norm conventions and symmetry handling identical everywhere.
"""

from __future__ import annotations

import numpy as np

from . import tolerances


def check_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    out = np.asarray(m, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def check_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries."""
    out = np.asarray(v, dtype=float)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def least_squares(m, y) -> np.ndarray:
    """Minimum-norm solution of min ||M w - y||_2.

    Accepts a vector or a matrix of stacked right-hand-side columns; the
    minimum-norm convention matters only when M is rank deficient.
    """
    m = check_matrix(m, "m")
    y_arr = np.asarray(y, dtype=float)
    if y_arr.shape[0] != m.shape[0]:
        raise ValueError(
            f"shape mismatch: m has {m.shape[0]} rows, y has {y_arr.shape[0]}"
        )
    if not np.all(np.isfinite(y_arr)):
        raise ValueError("y contains non-finite entries")
    w, *_ = np.linalg.lstsq(m, y_arr, rcond=None)
    return w


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse."""
    return np.linalg.pinv(check_matrix(m, "m"))


def smallest_eigenvalue(s) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Tiny asymmetry (below the shared tolerance) is symmetrized away; anything
    larger is rejected rather than silently averaged.
    """
    s = check_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"s must be square, got shape {s.shape}")
    if s.size and np.max(np.abs(s - s.T)) > tolerances.SYMMETRY:
        raise ValueError("s is not symmetric")
    sym = 0.5 * (s + s.T)
    return float(np.linalg.eigvalsh(sym)[0])
