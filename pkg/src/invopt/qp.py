"""Convex quadratic programs via ADMM operator splitting.

Problems are min 1/2 x' P x + q' x subject to l <= G x <= u with P positive
semidefinite. The splitting follows the usual over-relaxed scheme: one linear
solve against the (fixed) matrix P + sigma I + rho G' G per iteration, a box
projection, and a dual update. On a fixed schedule the solver attempts a
"polish": it guesses the active rows from the current iterate, solves the
equality-constrained KKT system exactly, and accepts the result only if all
residuals, bound violations, and multiplier signs check out. Polish usually
lands within a few hundred iterations and returns a near-machine-precision
point, which downstream finite-difference checks rely on.

Everything here is deterministic: cold start at zero, fixed parameters, no
randomized steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import tolerances
from .errors import NumericalFailure
from .linalg import check_matrix, check_vector

SOLVED = "solved"
MAX_ITERS = "max_iters"


@dataclass(frozen=True)
class QpConfig:
    eps_abs: float = 1e-8
    rho: float = 1.0
    sigma: float = 1e-6
    max_iters: int = 20000
    alpha: float = 1.6
    # Residuals are checked (and polish attempted) every this many iterations.
    check_every: int = 25


@dataclass(frozen=True)
class QpProblem:
    p: np.ndarray
    q: np.ndarray
    g: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        p = check_matrix(self.p, "p")
        q = check_vector(self.q, "q")
        g = np.asarray(self.g, dtype=float).reshape(-1, p.shape[0])
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if p.shape[0] != p.shape[1]:
            raise ValueError("p must be square")
        if np.max(np.abs(p - p.T), initial=0.0) > 1e-8:
            raise ValueError("p must be symmetric")
        if q.shape[0] != p.shape[0]:
            raise ValueError("q length does not match p")
        if lower.shape[0] != g.shape[0] or upper.shape[0] != g.shape[0]:
            raise ValueError("bound lengths do not match the rows of g")
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "p", 0.5 * (p + p.T))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)


@dataclass
class QpResult:
    x: np.ndarray
    y: np.ndarray
    primal_residual: float
    dual_residual: float
    iterations: int
    status: str
    polished: bool = False


class PreparedQp:
    """A QP with fixed (P, G, l, u) and a pre-factored iteration matrix.

    The linear term q varies per solve; reusing the factorization is what
    makes repeated projections onto one constraint set cheap.
    """

    def __init__(self, p, g, lower, upper, config: QpConfig | None = None):
        self.config = config or QpConfig()
        probe = QpProblem(
            p=p, q=np.zeros(np.asarray(p).shape[0]), g=g, lower=lower, upper=upper
        )
        self.p = probe.p
        self.g = probe.g
        self.lower = probe.lower
        self.upper = probe.upper
        cfg = self.config
        kkt = self.p + cfg.sigma * np.eye(self.p.shape[0])
        if self.g.shape[0]:
            kkt = kkt + cfg.rho * (self.g.T @ self.g)
        self._chol = scipy.linalg.cho_factor(kkt, lower=True)
        self._equality = (self.upper - self.lower) <= tolerances.POLISH_ACTIVE

    def _residuals(self, x, y, q, z=None):
        """Splitting residuals: ||Gx - z||_inf against the feasible copy z
        (constraint violation of x when z is not supplied) and the
        stationarity residual ||Px + q + G'y||_inf."""
        if self.g.shape[0]:
            gx = self.g @ x
            if z is None:
                gap = np.maximum(self.lower - gx, 0.0) + np.maximum(
                    gx - self.upper, 0.0
                )
            else:
                gap = np.abs(gx - z)
            r_prim = float(np.max(gap, initial=0.0))
            dual_vec = self.p @ x + q + self.g.T @ y
        else:
            r_prim = 0.0
            dual_vec = self.p @ x + q
        return r_prim, float(np.max(np.abs(dual_vec), initial=0.0))

    def _polish(self, x, z, q):
        """Exact KKT solve on the rows the iterate says are active."""
        g, lower, upper = self.g, self.lower, self.upper
        n = self.p.shape[0]
        if g.shape[0]:
            low_active = (z - lower) <= tolerances.POLISH_ACTIVE
            up_active = (upper - z) <= tolerances.POLISH_ACTIVE
            active = low_active | up_active | self._equality
            idx = np.nonzero(active)[0]
        else:
            idx = np.zeros(0, dtype=int)
        ga = g[idx]
        target = np.where(
            (upper[idx] - z[idx]) <= (z[idx] - lower[idx]), upper[idx], lower[idx]
        )
        target[self._equality[idx]] = lower[idx][self._equality[idx]]
        k = idx.shape[0]
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = self.p
        kkt[:n, n:] = ga.T
        kkt[n:, :n] = ga
        rhs = np.concatenate([-q, target])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        x_pol = sol[:n]
        y_pol = np.zeros(g.shape[0])
        y_pol[idx] = sol[n:]
        # Wrong-signed multipliers disqualify the guess (an inactive row was
        # included); fold the violation into the acceptance test.
        sign_viol = 0.0
        if k:
            at_lower = (z[idx] - lower[idx]) < (upper[idx] - z[idx])
            free = ~self._equality[idx]
            sign_viol = max(
                float(np.max(np.maximum(sol[n:][at_lower & free], 0.0), initial=0.0)),
                float(np.max(np.maximum(-sol[n:][~at_lower & free], 0.0), initial=0.0)),
            )
        r_prim, r_dual = self._residuals(x_pol, y_pol, q)
        return x_pol, y_pol, max(r_prim, sign_viol), r_dual

    def solve(self, q) -> QpResult:
        q = check_vector(q, "q")
        if q.shape[0] != self.p.shape[0]:
            raise ValueError("q length does not match p")
        cfg = self.config
        n = self.p.shape[0]
        r = self.g.shape[0]
        x = np.zeros(n)
        z = np.zeros(r)
        y = np.zeros(r)
        gt = self.g.T
        eps = cfg.eps_abs
        it = 0
        while it < cfg.max_iters:
            stop = min(it + cfg.check_every, cfg.max_iters)
            while it < stop:
                rhs = cfg.sigma * x - q
                if r:
                    rhs = rhs + gt @ (cfg.rho * z - y)
                x_tilde = scipy.linalg.cho_solve(self._chol, rhs)
                x = cfg.alpha * x_tilde + (1.0 - cfg.alpha) * x
                if r:
                    z_tilde = self.g @ x_tilde
                    z_relaxed = cfg.alpha * z_tilde + (1.0 - cfg.alpha) * z
                    z_new = np.clip(z_relaxed + y / cfg.rho, self.lower, self.upper)
                    y = y + cfg.rho * (z_relaxed - z_new)
                    z = z_new
                it += 1
            x_pol, y_pol, rp_pol, rd_pol = self._polish(x, z, q)
            if max(rp_pol, rd_pol) <= eps:
                return QpResult(
                    x=x_pol,
                    y=y_pol,
                    primal_residual=rp_pol,
                    dual_residual=rd_pol,
                    iterations=it,
                    status=SOLVED,
                    polished=True,
                )
            r_prim, r_dual = self._residuals(x, y, q, z)
            if r_prim <= eps and r_dual <= eps:
                return QpResult(
                    x=x,
                    y=y,
                    primal_residual=r_prim,
                    dual_residual=r_dual,
                    iterations=it,
                    status=SOLVED,
                )
        r_prim, r_dual = self._residuals(x, y, q, z)
        return QpResult(
            x=x,
            y=y,
            primal_residual=r_prim,
            dual_residual=r_dual,
            iterations=it,
            status=MAX_ITERS,
        )


@dataclass(frozen=True)
class PortfolioSpec:
    """Forward-problem data for the risk-regularized allocation QP."""

    q_matrix: np.ndarray
    gamma: float

    def __post_init__(self):
        qm = check_matrix(self.q_matrix, "q_matrix")
        if qm.shape[0] != qm.shape[1]:
            raise ValueError("q_matrix must be square")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "q_matrix", qm)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_vars(self) -> int:
        return self.q_matrix.shape[0]


def solve_qp(problem: QpProblem, config: QpConfig | None = None) -> QpResult:
    prepared = PreparedQp(
        problem.p, problem.g, problem.lower, problem.upper, config=config
    )
    return prepared.solve(problem.q)


def solve_portfolio(q_matrix, gamma: float, c, config: QpConfig | None = None) -> np.ndarray:
    """Risk-regularized allocation: min -<c, x> + (gamma/2) x' Q x on the
    probability simplex. Raises on solver failure."""
    qm = check_matrix(q_matrix, "q_matrix")
    c = check_vector(c, "c")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if qm.shape[0] != qm.shape[1] or qm.shape[0] != c.shape[0]:
        raise ValueError("q_matrix and c shapes do not match")
    m = c.shape[0]
    p = 0.5 * gamma * (qm + qm.T)
    g = np.vstack([np.ones((1, m)), np.eye(m)])
    lower = np.concatenate([[1.0], np.zeros(m)])
    upper = np.concatenate([[1.0], np.full(m, np.inf)])
    result = solve_qp(QpProblem(p=p, q=-c, g=g, lower=lower, upper=upper), config)
    if result.status != SOLVED:
        raise NumericalFailure(
            f"portfolio solve stalled: residuals "
            f"({result.primal_residual:.2e}, {result.dual_residual:.2e})"
        )
    return result.x
