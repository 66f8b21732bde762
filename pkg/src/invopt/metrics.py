"""Evaluation metrics for learned cost models.

Two regret-style losses compare the decision induced by a predicted cost
against the observed one under the TRUE cost: `estimate_loss` in objective
value, `decision_loss` in squared distance. `suboptimality` is a
per-sample certificate computable WITHOUT the true cost: the induced
decision's objective gap under the projected cost direction. It is bounded
by sqrt(2 m h) / delta, where h is that sample's squared-distance loss and
delta (see `cost_norm_lower_bound`) is a geometry constant of the instance,
so driving h down provably drives the decision gap down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tolerances
from .data import Dataset, solve_decision
from .feasibility import KktProjector, Projection, build_projectors
from .linalg import check_matrix, check_vector, pseudo_inverse, smallest_eigenvalue
from .lp import LpInstance
from .qp import QpConfig


@dataclass
class MetricsRecord:
    split: str
    h: float
    estimate_loss: float | None
    decision_loss: float
    subopt_mean: float
    mu: float


def predicted_decisions(dataset: Dataset, theta: np.ndarray) -> np.ndarray:
    """Forward-solve every sample's predicted cost."""
    theta = check_matrix(theta, "theta")
    return np.array(
        [solve_decision(dataset.problem, s.z @ theta) for s in dataset.samples]
    )


def regret_losses(
    dataset: Dataset, decisions: np.ndarray
) -> tuple[float | None, float]:
    """(estimate_loss, decision_loss) of precomputed induced decisions.

    estimate_loss is None when any sample lacks its true cost.
    """
    estimate: float | None = 0.0
    decision = 0.0
    for sample, xhat in zip(dataset.samples, decisions):
        gap = xhat - sample.x_star
        decision += float(gap @ gap)
        if estimate is not None and sample.c_star is not None:
            estimate += float(sample.c_star @ gap)
        else:
            estimate = None
    return estimate, decision


def estimate_loss(dataset: Dataset, theta: np.ndarray) -> float:
    """Total true-cost regret of the induced decisions,
    sum_i <c*_i, xhat(z_i theta) - x*_i>. Requires true costs."""
    if dataset.costs() is None:
        raise ValueError("estimate_loss needs every sample's true cost")
    value, _ = regret_losses(dataset, predicted_decisions(dataset, theta))
    return value


def decision_loss(dataset: Dataset, theta: np.ndarray) -> float:
    """Total squared decision gap, sum_i ||xhat(z_i theta) - x*_i||^2."""
    _, value = regret_losses(dataset, predicted_decisions(dataset, theta))
    return value


def suboptimality(
    projector: KktProjector,
    c_pred,
    x_star,
    projection: Projection | None = None,
    decision: np.ndarray | None = None,
) -> float:
    """Decision gap certificate <p/||p||, xhat(c_pred) - x*> with p the
    projection of c_pred onto the feasible-cost set. NaN when the projected
    cost has no direction (possible only at margin 0)."""
    c_pred = check_vector(c_pred, "c_pred")
    x_star = check_vector(x_star, "x_star")
    if projection is None:
        projection = projector.project(c_pred)
    norm = float(np.linalg.norm(projection.point))
    if norm <= 1e-12:
        return float("nan")
    if decision is None:
        decision = solve_decision(projector.problem, c_pred)
    return float(projection.point @ (decision - x_star)) / norm


def cost_norm_lower_bound(inst: LpInstance, x_star, margin: float) -> float:
    """Lower bound on the norm of any feasible cost with this margin.

    With B the support of x* and tau = pinv(A_B) A_M, the bound is
    (margin / sqrt(m)) * max_{j in M} min(1, min_{p} 1 / |tau_pj|).
    Infinite when x* has full support (no inactive coordinate is
    constrained, so no margin requirement exists).
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    x_star = check_vector(x_star, "x_star")
    if x_star.shape[0] != inst.n_vars:
        raise ValueError("x_star length does not match the instance")
    support = x_star > tolerances.ACTIVE
    inactive = np.nonzero(~support)[0]
    if inactive.shape[0] == 0:
        return float("inf")
    a_b = inst.a[:, np.nonzero(support)[0]]
    tau = np.abs(pseudo_inverse(a_b) @ inst.a[:, inactive])  # (|B|, |M|)
    with np.errstate(divide="ignore"):
        inverses = np.where(tau > 0.0, 1.0 / np.where(tau > 0.0, tau, 1.0), np.inf)
    per_column = (
        np.min(inverses, axis=0) if inverses.shape[0] else np.full(inactive.shape[0], np.inf)
    )
    best = float(np.max(np.minimum(1.0, per_column)))
    return margin / np.sqrt(inst.n_vars) * best


def pl_constant(features) -> float:
    """Curvature floor of the loss: smallest eigenvalue of Z'Z/N."""
    z = check_matrix(features, "features")
    if z.shape[0] == 0:
        raise ValueError("need at least one sample")
    value = smallest_eigenvalue(z.T @ z / z.shape[0])
    return max(value, 0.0)


def evaluate(
    dataset: Dataset,
    theta: np.ndarray,
    margin: float,
    split: str = "eval",
    qp_config: QpConfig | None = None,
) -> MetricsRecord:
    """Full metrics pass over one dataset split."""
    theta = check_matrix(theta, "theta")
    projectors = build_projectors(
        dataset.problem, dataset.decisions(), margin, qp_config
    )
    h = 0.0
    subopt_values = []
    estimate: float | None = 0.0
    decision = 0.0
    for sample, projector in zip(dataset.samples, projectors):
        c_pred = sample.z @ theta
        projection = projector.project(c_pred)
        h += projection.distance_sq
        xhat = solve_decision(dataset.problem, c_pred)
        gap = xhat - sample.x_star
        decision += float(gap @ gap)
        if estimate is not None and sample.c_star is not None:
            estimate += float(sample.c_star @ gap)
        else:
            estimate = None
        value = suboptimality(
            projector, c_pred, sample.x_star, projection=projection, decision=xhat
        )
        if np.isfinite(value):
            subopt_values.append(value)
    h /= 2.0 * len(dataset)
    return MetricsRecord(
        split=split,
        h=h,
        estimate_loss=estimate,
        decision_loss=decision,
        subopt_mean=float(np.mean(subopt_values)) if subopt_values else float("nan"),
        mu=pl_constant(dataset.features()),
    )
