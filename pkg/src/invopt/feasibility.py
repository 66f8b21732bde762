"""Projections onto the set of cost vectors that make a decision optimal.

For a standard-form LP min <c, x> s.t. a x = b, x >= 0 with observed solution
x*, the costs under which x* is optimal are exactly those admitting KKT
certificates:

    c = a' nu + lam,   lam_j = 0 where x*_j > 0,   lam_j >= margin elsewhere.

A positive margin asks for strictly positive reduced costs on the inactive
coordinates, i.e. costs under which x* wins by a quantifiable amount rather
than by a tie. For the risk-regularized allocation QP the same construction
applies to its stationarity condition

    c = (gamma/2)(Q + Q') x* - nu 1 - lam,

with lam supported on the zero coordinates of x*.

Either way the set is parameterized affinely by free certificate variables
(nu and the supported part of lam), so projecting a query cost onto it is a
bound-constrained least-squares problem. The certificate variables are
eliminated into a small QP solved by the ADMM solver; the expensive
factorization depends only on (instance, x*, margin) and is done once per
projector, which matters because training projects onto the same sets every
epoch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances
from .errors import NumericalFailure
from .linalg import check_matrix, check_vector, least_squares
from .lp import LpInstance
from .qp import PortfolioSpec, PreparedQp, QpConfig, SOLVED


@dataclass
class Projection:
    """Closest member of the cost set, with its KKT certificate.

    `lam` is the full-length multiplier on x >= 0 (zeros off the support);
    `nu` is the equality-row dual (length 1 for the allocation QP).
    """

    point: np.ndarray
    distance_sq: float
    lam: np.ndarray
    nu: np.ndarray


class KktProjector:
    """Projector onto one decision's feasible-cost set.

    Instances are built by `make_projector` / `make_portfolio_projector`;
    the constructor takes the eliminated-variable parameterization
    c = offset + span @ w with the trailing `n_bounded` entries of w
    constrained to >= margin.
    """

    def __init__(
        self,
        problem,
        x_star: np.ndarray,
        margin: float,
        offset: np.ndarray,
        span: np.ndarray,
        n_bounded: int,
        support: np.ndarray,
        config: QpConfig | None = None,
    ):
        self.problem = problem
        self.x_star = x_star
        self.margin = float(margin)
        self._offset = offset
        self._span = span
        self._n_free = span.shape[1] - n_bounded
        self._support = support  # indices of x where lam may be nonzero
        if n_bounded:
            g = np.zeros((n_bounded, span.shape[1]))
            g[:, self._n_free :] = np.eye(n_bounded)
            lower = np.full(n_bounded, self.margin)
            upper = np.full(n_bounded, np.inf)
        else:
            g = np.zeros((0, span.shape[1]))
            lower = np.zeros(0)
            upper = np.zeros(0)
        self._qp = PreparedQp(
            p=span.T @ span, g=g, lower=lower, upper=upper, config=config
        )

    @property
    def n_costs(self) -> int:
        return self._offset.shape[0]

    def project(self, query) -> Projection:
        query = check_vector(query, "query")
        if query.shape[0] != self.n_costs:
            raise ValueError(
                f"query length {query.shape[0]} does not match {self.n_costs} costs"
            )
        result = self._qp.solve(self._span.T @ (self._offset - query))
        if result.status != SOLVED:
            raise NumericalFailure(
                f"cost-set projection stalled: residuals "
                f"({result.primal_residual:.2e}, {result.dual_residual:.2e})"
            )
        w = result.x
        point = self._offset + self._span @ w
        lam = np.zeros(self.n_costs)
        lam[self._support] = w[self._n_free :]
        gap = point - query
        return Projection(
            point=point,
            distance_sq=float(gap @ gap),
            lam=lam,
            nu=w[: self._n_free].copy(),
        )

    def distance_sq(self, query) -> float:
        return self.project(query).distance_sq

    def contains(self, query, tol: float = tolerances.DATA_FEASIBILITY) -> bool:
        return self.distance_sq(query) <= tol * tol


def _check_margin(margin: float) -> float:
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return float(margin)


def make_projector(
    problem, x_star, margin: float = 0.0, config: QpConfig | None = None
) -> KktProjector:
    """Build the feasible-cost projector for one observed decision.

    Dispatches on the problem type; `margin` is the reduced-cost floor
    demanded on the inactive coordinates.
    """
    if isinstance(problem, LpInstance):
        return _make_lp_projector(problem, x_star, margin, config)
    if isinstance(problem, PortfolioSpec):
        return make_portfolio_projector(
            problem.q_matrix, problem.gamma, x_star, margin, config
        )
    raise TypeError(f"unsupported problem type: {type(problem).__name__}")


def _make_lp_projector(
    inst: LpInstance, x_star, margin: float, config: QpConfig | None
) -> KktProjector:
    margin = _check_margin(margin)
    x_star = check_vector(x_star, "x_star")
    if x_star.shape[0] != inst.n_vars:
        raise ValueError("x_star length does not match the instance")
    residual = np.max(np.abs(inst.a @ x_star - inst.b), initial=0.0)
    if residual > tolerances.DATA_FEASIBILITY or np.any(x_star < -tolerances.ACTIVE):
        raise ValueError(
            f"x_star is not feasible for the instance (residual {residual:.2e})"
        )
    inactive = np.nonzero(x_star <= tolerances.ACTIVE)[0]
    # c = a' nu + lam with lam supported on the inactive coordinates.
    span = np.zeros((inst.n_vars, inst.n_rows + inactive.shape[0]))
    span[:, : inst.n_rows] = inst.a.T
    span[inactive, inst.n_rows :] = np.eye(inactive.shape[0])
    return KktProjector(
        problem=inst,
        x_star=x_star,
        margin=margin,
        offset=np.zeros(inst.n_vars),
        span=span,
        n_bounded=inactive.shape[0],
        support=inactive,
        config=config,
    )


def make_portfolio_projector(
    q_matrix, gamma: float, x_star, margin: float = 0.0, config: QpConfig | None = None
) -> KktProjector:
    margin = _check_margin(margin)
    spec = PortfolioSpec(q_matrix=q_matrix, gamma=gamma)
    x_star = check_vector(x_star, "x_star")
    if x_star.shape[0] != spec.n_vars:
        raise ValueError("x_star length does not match q_matrix")
    if (
        abs(float(np.sum(x_star)) - 1.0) > tolerances.DATA_FEASIBILITY
        or np.any(x_star < -tolerances.ACTIVE)
    ):
        raise ValueError("x_star is not on the probability simplex")
    m = spec.n_vars
    inactive = np.nonzero(x_star <= tolerances.ACTIVE)[0]
    # c = (gamma/2)(Q + Q') x* - nu 1 - lam, lam supported on the zeros of x*.
    offset = 0.5 * spec.gamma * (spec.q_matrix + spec.q_matrix.T) @ x_star
    span = np.zeros((m, 1 + inactive.shape[0]))
    span[:, 0] = -1.0
    span[inactive, 1:] = -np.eye(inactive.shape[0])
    return KktProjector(
        problem=spec,
        x_star=x_star,
        margin=margin,
        offset=offset,
        span=span,
        n_bounded=inactive.shape[0],
        support=inactive,
        config=config,
    )


def fit_cost_model(features, targets) -> np.ndarray:
    """Exact minimizer theta of (1/2N) sum_i ||targets_i - z_i theta||^2.

    This is the projection of per-sample target costs onto what the linear
    model can realize; column-wise minimum-norm least squares.
    """
    features = check_matrix(features, "features")
    targets = check_matrix(targets, "targets")
    if features.shape[0] != targets.shape[0]:
        raise ValueError("features and targets disagree on the sample count")
    return least_squares(features, targets)


def build_projectors(
    problem, decisions, margin: float, config: QpConfig | None = None
) -> list[KktProjector]:
    """One projector per row of `decisions`, sharing the problem and margin."""
    projectors = []
    for i, x_star in enumerate(np.asarray(decisions, dtype=float)):
        try:
            projectors.append(make_projector(problem, x_star, margin, config))
        except ValueError as exc:
            raise ValueError(f"sample {i}: {exc}") from exc
    return projectors
