"""Fitting the linear cost model to observed decisions.

The model is a matrix theta mapping a context row z (1 x d) to a predicted
cost row z theta (1 x m). Training minimizes the mean squared distance from
the predicted costs to each sample's feasible-cost set,

    loss(theta) = (1/2N) sum_i  dist(z_i theta, C_i)^2,

whose gradient is (1/N) Z' (Z theta - Q) with Q the stacked projections of
the current predictions (the projection being the argmin makes the distance
differentiable with exactly that gradient). Four update rules are provided:

* "pocs":       project every prediction, then refit theta exactly by least
                squares; classic alternating projections.
* "gd":         full-batch gradient descent.
* "precond-gd": gradient descent preconditioned by (Z'Z/N)^-1; with step 1
                this reproduces "pocs" exactly.
* "sgd":        per-sample steps in a (optionally shuffled) epoch sweep.

With contexts normalized to max norm 1 the loss is convex with 1-Lipschitz
gradients, so Armijo backtracking from step 1 accepts nearly always.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass

import numpy as np

from .data import Dataset, solve_decision
from .errors import NumericalFailure
from .feasibility import KktProjector, Projection, build_projectors, fit_cost_model
from .metrics import pl_constant, regret_losses, suboptimality
from .qp import QpConfig

METHODS = ("pocs", "gd", "sgd", "precond-gd")
STEPS = ("constant", "armijo", "inverse-t")


@dataclass(frozen=True)
class TrainConfig:
    method: str = "pocs"
    step: str = "constant"
    step_size: float = 1.0
    armijo_c1: float = 1e-4
    armijo_backtrack: float = 0.5
    armijo_init: float = 1.0
    inverse_t_mu: float | None = None
    epochs: int = 50
    margin: float = 1.0
    seed: int = 0
    shuffle: bool = True
    # Per-epoch regret metrics need one forward solve per sample; skip them
    # when only the loss trajectory matters.
    eval_decisions: bool = True


@dataclass
class EpochRecord:
    epoch: int
    split: str
    h: float
    estimate_loss: float | None
    decision_loss: float | None
    subopt_mean: float | None
    wall_ms: float


@dataclass
class TrainResult:
    theta: np.ndarray
    log: list[EpochRecord]


@dataclass
class TrainingData:
    """A dataset bound to its per-sample feasible-cost projectors."""

    dataset: Dataset
    projectors: list[KktProjector]
    features: np.ndarray
    margin: float

    def __len__(self) -> int:
        return len(self.projectors)

    @property
    def n_costs(self) -> int:
        return self.projectors[0].n_costs


def prepare(
    dataset: Dataset, margin: float, qp_config: QpConfig | None = None
) -> TrainingData:
    if len(dataset) == 0:
        raise ValueError("dataset has no samples")
    projectors = build_projectors(
        dataset.problem, dataset.decisions(), margin, qp_config
    )
    return TrainingData(
        dataset=dataset,
        projectors=projectors,
        features=dataset.features(),
        margin=margin,
    )


def project_costs(theta: np.ndarray, data: TrainingData) -> list[Projection]:
    """Project every sample's predicted cost onto its feasible set."""
    predicted = data.features @ theta
    projections = []
    for i, projector in enumerate(data.projectors):
        try:
            projections.append(projector.project(predicted[i]))
        except NumericalFailure as exc:
            raise NumericalFailure(str(exc), sample_index=i) from exc
    return projections


def loss(theta: np.ndarray, data: TrainingData) -> tuple[float, list[Projection]]:
    """Mean squared projection distance and the projections themselves."""
    projections = project_costs(theta, data)
    value = sum(p.distance_sq for p in projections) / (2.0 * len(data))
    return value, projections


def targets(projections: list[Projection]) -> np.ndarray:
    return np.array([p.point for p in projections])


def grad(
    theta: np.ndarray, data: TrainingData, projections: list[Projection]
) -> np.ndarray:
    """Gradient of `loss` at theta, reusing the projections computed there.

    The projections must belong to this theta; one sample (picked by a
    deterministic hash of theta) is re-projected as a staleness probe.
    """
    if len(projections) != len(data):
        raise ValueError("projection count does not match the sample count")
    probe = zlib.crc32(np.ascontiguousarray(theta).tobytes()) % len(data)
    fresh = data.projectors[probe].project(data.features[probe] @ theta)
    if abs(fresh.distance_sq - projections[probe].distance_sq) > 1e-6:
        raise ValueError(
            f"stale projections: sample {probe} distance differs by "
            f"{abs(fresh.distance_sq - projections[probe].distance_sq):.2e}"
        )
    residual = data.features @ theta - targets(projections)
    return data.features.T @ residual / len(data)


def step_gd(
    theta: np.ndarray,
    data: TrainingData,
    eta: float,
    projections: list[Projection] | None = None,
) -> np.ndarray:
    if projections is None:
        projections = project_costs(theta, data)
    return theta - eta * grad(theta, data, projections)


def step_sgd(theta: np.ndarray, data: TrainingData, index: int, eta: float) -> np.ndarray:
    """One stochastic step on sample `index` (projects at the current theta)."""
    z = data.features[index]
    projection = data.projectors[index].project(z @ theta)
    return theta - eta * np.outer(z, z @ theta - projection.point)


def step_precond_gd(
    theta: np.ndarray,
    data: TrainingData,
    eta: float,
    projections: list[Projection] | None = None,
) -> np.ndarray:
    """Gradient step preconditioned by (Z'Z/N)^-1 (minimum-norm on rank
    deficiency). Step size 1 reproduces the alternating-projection update."""
    if projections is None:
        projections = project_costs(theta, data)
    grad(theta, data, projections)  # staleness probe + shape checks
    direction = np.linalg.lstsq(
        data.features, data.features @ theta - targets(projections), rcond=None
    )[0]
    return theta - eta * direction


def pocs_step(theta: np.ndarray, data: TrainingData, projections: list[Projection]) -> np.ndarray:
    """Alternating-projection update: refit theta to the projected costs."""
    return fit_cost_model(data.features, targets(projections))


def run_pocs(
    data: TrainingData, iters: int, theta0: np.ndarray | None = None
) -> tuple[np.ndarray, list[float]]:
    """Alternating projections for `iters` rounds; returns the final theta
    and the loss after each round."""
    theta = _initial_theta(data, theta0)
    _, projections = loss(theta, data)
    history = []
    for _ in range(iters):
        theta = pocs_step(theta, data, projections)
        value, projections = loss(theta, data)
        history.append(value)
    return theta, history


def _initial_theta(data: TrainingData, theta0) -> np.ndarray:
    d = data.features.shape[1]
    if theta0 is None:
        return np.zeros((d, data.n_costs))
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (d, data.n_costs):
        raise ValueError(f"theta0 must have shape {(d, data.n_costs)}")
    return theta0.copy()


def _validate(cfg: TrainConfig) -> None:
    if cfg.method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.step not in STEPS:
        raise ValueError(f"step must be one of {STEPS}, got {cfg.step!r}")
    if cfg.method == "sgd" and cfg.step == "armijo":
        raise ValueError("armijo line search is defined on the full-batch loss; "
                         "use constant or inverse-t steps with sgd")
    if cfg.epochs < 1:
        raise ValueError("epochs must be at least 1")
    if cfg.step_size <= 0:
        raise ValueError("step_size must be positive")
    if cfg.margin < 0:
        raise ValueError("margin must be non-negative")


def _armijo(theta, data, grad_mat, direction, h_val, cfg: TrainConfig):
    """Backtracking line search; falls back to no movement if even the
    smallest trial step fails sufficient decrease (only happens at the
    numerical floor of the loss)."""
    slope = float(np.sum(grad_mat * direction))
    eta = cfg.armijo_init
    for _ in range(60):
        trial = theta - eta * direction
        h_trial, projections = loss(trial, data)
        if h_trial <= h_val - cfg.armijo_c1 * eta * slope:
            return trial, h_trial, projections
        eta *= cfg.armijo_backtrack
    return theta, h_val, None


def _step_size(cfg: TrainConfig, mu: float, t: int) -> float:
    if cfg.step == "inverse-t":
        if mu <= 0:
            raise ValueError(
                "inverse-t steps need a positive curvature constant; the "
                "feature Gram matrix is singular"
            )
        return 1.0 / (mu * (t + 1))
    return cfg.step_size


def run_trainer(
    dataset: Dataset,
    cfg: TrainConfig,
    eval_splits: dict[str, Dataset] | None = None,
    theta0: np.ndarray | None = None,
    qp_config: QpConfig | None = None,
) -> TrainResult:
    """Train on `dataset` and log per-epoch metrics for the train split and
    every entry of `eval_splits`."""
    _validate(cfg)
    data = prepare(dataset, cfg.margin, qp_config)
    evals = {
        name: prepare(ds, cfg.margin, qp_config)
        for name, ds in (eval_splits or {}).items()
    }
    theta = _initial_theta(data, theta0)
    rng = np.random.default_rng(cfg.seed)
    mu = cfg.inverse_t_mu
    if mu is None and cfg.step == "inverse-t":
        mu = pl_constant(data.features)

    log: list[EpochRecord] = []
    h_val, projections = None, None
    if cfg.method in ("pocs", "gd", "precond-gd"):
        h_val, projections = loss(theta, data)
    t_global = 0
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        if cfg.method == "pocs":
            theta = pocs_step(theta, data, projections)
            h_val, projections = loss(theta, data)
        elif cfg.method in ("gd", "precond-gd"):
            grad_mat = grad(theta, data, projections)
            if cfg.method == "gd":
                direction = grad_mat
            else:
                direction = np.linalg.lstsq(
                    data.features,
                    data.features @ theta - targets(projections),
                    rcond=None,
                )[0]
            if cfg.step == "armijo":
                theta, h_val, projections = _armijo(
                    theta, data, grad_mat, direction, h_val, cfg
                )
                if projections is None:  # no acceptable step; theta unchanged
                    h_val, projections = loss(theta, data)
            else:
                theta = theta - _step_size(cfg, mu, t_global) * direction
                h_val, projections = loss(theta, data)
            t_global += 1
        else:  # sgd
            order = rng.permutation(len(data)) if cfg.shuffle else np.arange(len(data))
            for index in order:
                theta = step_sgd(
                    theta, data, int(index), _step_size(cfg, mu, t_global)
                )
                t_global += 1
            h_val, projections = loss(theta, data)

        log.append(_epoch_record(epoch, "train", data, theta, h_val, projections,
                                 cfg.eval_decisions, started))
        for name, eval_data in evals.items():
            eval_started = time.perf_counter()
            eval_h, eval_projs = loss(theta, eval_data)
            log.append(_epoch_record(epoch, name, eval_data, theta, eval_h,
                                     eval_projs, cfg.eval_decisions, eval_started))
    return TrainResult(theta=theta, log=log)


def _epoch_record(
    epoch: int,
    split: str,
    data: TrainingData,
    theta: np.ndarray,
    h_val: float,
    projections: list[Projection],
    eval_decisions: bool,
    started: float,
) -> EpochRecord:
    estimate = decision = subopt = None
    if eval_decisions:
        predicted = data.features @ theta
        decisions = np.array(
            [solve_decision(data.dataset.problem, c) for c in predicted]
        )
        estimate, decision = regret_losses(data.dataset, decisions)
        values = [
            suboptimality(
                proj, predicted[i], data.dataset.samples[i].x_star,
                projection=projections[i], decision=decisions[i],
            )
            for i, proj in enumerate(data.projectors)
        ]
        finite = [v for v in values if np.isfinite(v)]
        subopt = float(np.mean(finite)) if finite else float("nan")
    wall_ms = (time.perf_counter() - started) * 1000.0
    return EpochRecord(
        epoch=epoch,
        split=split,
        h=h_val,
        estimate_loss=estimate,
        decision_loss=decision,
        subopt_mean=subopt,
        wall_ms=wall_ms,
    )
