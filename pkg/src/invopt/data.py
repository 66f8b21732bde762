"""Synthetic decision datasets and their JSON serialization.

A sample couples a context vector z with the decision x* an agent took; when
the true cost vector c* behind that decision is known (always, for synthetic
data) it is stored too so evaluation can compute regret. Contexts carry a
constant intercept coordinate and the pool is rescaled so the largest context
norm is 1; the scale is recorded so raw features can be mapped back. Costs
are produced AFTER normalization, so decisions are a function of the stored
contexts and no information rides on the scaling.

Cost generators follow the usual polynomial benchmark recipe: a fixed 0/1
mask B per instance, c_j = (((B z)_j / sqrt(d) + 3)^degree + 1) * eps with
eps uniform on [1 - noise, 1 + noise). degree=1 with zero noise makes c*
exactly linear in z, the regime interpolation tests rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tolerances
from .errors import NumericalFailure
from .lp import (
    OPTIMAL,
    LpInstance,
    build_grid_shortest_path,
    build_knapsack,
    build_perfect_matching,
    knapsack_cost,
    solve_lp,
)
from .qp import PortfolioSpec, solve_portfolio

SCHEMA_VERSION = 1


@dataclass
class DecisionSample:
    z: np.ndarray
    x_star: np.ndarray
    c_star: np.ndarray | None = None


@dataclass
class Dataset:
    problem: LpInstance | PortfolioSpec
    samples: list[DecisionSample]
    feature_scale: float = 1.0
    split_sizes: tuple[int, ...] | None = None
    generator: dict | None = None

    def __post_init__(self) -> None:
        n_vars = self.problem.n_vars
        d = None
        for i, s in enumerate(self.samples):
            if d is None:
                d = s.z.shape[0]
            if s.z.shape != (d,):
                raise ValueError(
                    f"samples[{i}]: context has shape {s.z.shape}, expected ({d},)"
                )
            if s.x_star.shape != (n_vars,):
                raise ValueError(
                    f"samples[{i}]: decision has shape {s.x_star.shape}, "
                    f"expected ({n_vars},)"
                )
            if s.c_star is not None and s.c_star.shape != (n_vars,):
                raise ValueError(
                    f"samples[{i}]: cost has shape {s.c_star.shape}, "
                    f"expected ({n_vars},)"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def features(self) -> np.ndarray:
        return np.array([s.z for s in self.samples])

    def decisions(self) -> np.ndarray:
        return np.array([s.x_star for s in self.samples])

    def costs(self) -> np.ndarray | None:
        if any(s.c_star is None for s in self.samples):
            return None
        return np.array([s.c_star for s in self.samples])

    def split(self, sizes: tuple[int, ...]) -> tuple["Dataset", ...]:
        """Partition the samples in order into consecutive blocks."""
        if sum(sizes) > len(self.samples):
            raise ValueError(
                f"split sizes {sizes} exceed the {len(self.samples)} samples"
            )
        parts = []
        start = 0
        for size in sizes:
            parts.append(
                Dataset(
                    problem=self.problem,
                    samples=self.samples[start : start + size],
                    feature_scale=self.feature_scale,
                    split_sizes=tuple(sizes),
                    generator=self.generator,
                )
            )
            start += size
        return tuple(parts)


def solve_decision(problem, c) -> np.ndarray:
    """Forward map: the decision an agent with cost vector c would take."""
    if isinstance(problem, LpInstance):
        result = solve_lp(problem, c)
        if result.status != OPTIMAL:
            raise NumericalFailure(f"forward LP ended {result.status}")
        return result.x
    if isinstance(problem, PortfolioSpec):
        return solve_portfolio(problem.q_matrix, problem.gamma, c)
    raise TypeError(f"unsupported problem type: {type(problem).__name__}")


def normalize_features(z: np.ndarray) -> tuple[np.ndarray, float]:
    """Rescale rows so the largest row norm is 1; returns (scaled, scale)."""
    norms = np.linalg.norm(z, axis=1)
    scale = float(norms.max(initial=0.0))
    if scale < 1e-12:
        return z.copy(), 1.0
    return z / scale, scale


def _contexts(rng: np.random.Generator, n: int, d: int) -> tuple[np.ndarray, float]:
    """Intercept + gaussian contexts, pool-normalized to max norm 1."""
    if d < 2:
        raise ValueError("need at least an intercept plus one feature")
    raw = np.hstack([np.ones((n, 1)), rng.standard_normal((n, d - 1))])
    return normalize_features(raw)


def _polynomial_costs(
    rng: np.random.Generator, z: np.ndarray, m: int, degree: int, noise: float
) -> np.ndarray:
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if not 0.0 <= noise < 1.0:
        raise ValueError("noise width must be in [0, 1)")
    d = z.shape[1]
    mask = rng.integers(0, 2, size=(m, d)).astype(float)
    base = ((z @ mask.T) / np.sqrt(d) + 3.0) ** degree + 1.0
    if noise > 0.0:
        base = base * rng.uniform(1.0 - noise, 1.0 + noise, size=base.shape)
    return base


def _solve_all(problem, costs: np.ndarray) -> list[np.ndarray]:
    decisions = []
    for i, c in enumerate(costs):
        try:
            decisions.append(solve_decision(problem, c))
        except NumericalFailure as exc:
            raise NumericalFailure(str(exc), sample_index=i) from exc
    return decisions


def gen_shortest_path(
    n: int,
    seed: int,
    grid_size: int = 5,
    d: int = 6,
    degree: int = 4,
    noise: float = 0.25,
) -> Dataset:
    """Grid shortest-path dataset (edge costs from the polynomial recipe)."""
    rng = np.random.default_rng(seed)
    inst = build_grid_shortest_path(grid_size)
    z, scale = _contexts(rng, n, d)
    costs = _polynomial_costs(rng, z, inst.n_vars, degree, noise)
    decisions = _solve_all(inst, costs)
    samples = [
        DecisionSample(z=z[i], x_star=decisions[i], c_star=costs[i]) for i in range(n)
    ]
    return Dataset(
        problem=inst,
        samples=samples,
        feature_scale=scale,
        generator={
            "name": "shortest-path",
            "n": n,
            "seed": seed,
            "grid_size": grid_size,
            "d": d,
            "degree": degree,
            "noise": noise,
        },
    )


def gen_knapsack(
    n: int,
    seed: int,
    items: int = 10,
    d: int = 5,
    degree: int = 2,
    noise: float = 0.25,
) -> Dataset:
    """Fractional-knapsack dataset. Stored costs are in min-form (negated
    returns, zero on slacks), so stored c* solves to stored x* directly."""
    rng = np.random.default_rng(seed)
    weights = rng.uniform(1.0, 2.0, size=items)
    inst = build_knapsack(weights, capacity=0.5 * float(weights.sum()))
    z, scale = _contexts(rng, n, d)
    returns = _polynomial_costs(rng, z, items, degree, noise)
    costs = np.array([knapsack_cost(r) for r in returns])
    decisions = _solve_all(inst, costs)
    samples = [
        DecisionSample(z=z[i], x_star=decisions[i], c_star=costs[i]) for i in range(n)
    ]
    return Dataset(
        problem=inst,
        samples=samples,
        feature_scale=scale,
        generator={
            "name": "knapsack",
            "n": n,
            "seed": seed,
            "items": items,
            "d": d,
            "degree": degree,
            "noise": noise,
        },
    )


def gen_perfect_matching(
    n: int,
    seed: int,
    grid_size: int = 4,
    d: int = 5,
    degree: int = 2,
    noise: float = 0.25,
) -> Dataset:
    """Grid perfect-matching dataset (edge costs, same polynomial recipe)."""
    rng = np.random.default_rng(seed)
    inst = build_perfect_matching(grid_size)
    z, scale = _contexts(rng, n, d)
    costs = _polynomial_costs(rng, z, inst.n_vars, degree, noise)
    decisions = _solve_all(inst, costs)
    samples = [
        DecisionSample(z=z[i], x_star=decisions[i], c_star=costs[i]) for i in range(n)
    ]
    return Dataset(
        problem=inst,
        samples=samples,
        feature_scale=scale,
        generator={
            "name": "perfect-matching",
            "n": n,
            "seed": seed,
            "grid_size": grid_size,
            "d": d,
            "degree": degree,
            "noise": noise,
        },
    )


def gen_portfolio(
    n: int = 200,
    seed: int = 0,
    m: int = 10,
    d: int = 5,
    gamma: float = 0.1,
    noise: float = 0.25,
) -> Dataset:
    """Allocation dataset: Q from a random factor model (fixed per seed),
    expected returns affine in the context with multiplicative noise."""
    rng = np.random.default_rng(seed)
    factors = rng.standard_normal((m, m))
    q_matrix = factors @ factors.T / m + 0.05 * np.eye(m)
    spec = PortfolioSpec(q_matrix=q_matrix, gamma=gamma)
    z, scale = _contexts(rng, n, d)
    theta_true = rng.standard_normal((d, m))
    costs = z @ theta_true
    if noise > 0.0:
        costs = costs * rng.uniform(1.0 - noise, 1.0 + noise, size=costs.shape)
    decisions = _solve_all(spec, costs)
    samples = [
        DecisionSample(z=z[i], x_star=decisions[i], c_star=costs[i]) for i in range(n)
    ]
    return Dataset(
        problem=spec,
        samples=samples,
        feature_scale=scale,
        generator={
            "name": "portfolio",
            "n": n,
            "seed": seed,
            "m": m,
            "d": d,
            "gamma": gamma,
            "noise": noise,
        },
    )


# ---------------------------------------------------------------------------
# Serialization. Builder-backed problems store their parameters; anything
# else stores explicit constraint data.


def _problem_to_json(problem) -> dict:
    if isinstance(problem, PortfolioSpec):
        return {
            "kind": "portfolio",
            "q_matrix": problem.q_matrix.tolist(),
            "gamma": problem.gamma,
        }
    if isinstance(problem, LpInstance):
        if problem.kind == "sp-grid":
            return {"kind": "sp-grid", "grid_size": problem.params["grid_size"]}
        if problem.kind == "knapsack":
            return {
                "kind": "knapsack",
                "items": problem.params["items"],
                "weights": problem.params["weights"],
                "capacity": problem.params["capacity"],
            }
        if problem.kind == "perfect-matching":
            return {
                "kind": "perfect-matching",
                "grid_size": problem.params["grid_size"],
            }
        return {"kind": "generic", "a": problem.a.tolist(), "b": problem.b.tolist()}
    raise TypeError(f"unsupported problem type: {type(problem).__name__}")


def _problem_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "portfolio":
        return PortfolioSpec(
            q_matrix=np.asarray(obj["q_matrix"], dtype=float), gamma=obj["gamma"]
        )
    if kind == "sp-grid":
        return build_grid_shortest_path(int(obj["grid_size"]))
    if kind == "knapsack":
        inst = build_knapsack(obj["weights"], float(obj["capacity"]))
        if inst.params["items"] != int(obj["items"]):
            raise ValueError("problem.items does not match problem.weights")
        return inst
    if kind == "perfect-matching":
        return build_perfect_matching(int(obj["grid_size"]))
    if kind == "generic":
        return LpInstance(
            a=np.asarray(obj["a"], dtype=float), b=np.asarray(obj["b"], dtype=float)
        )
    raise ValueError(f"problem.kind: unknown kind {kind!r}")


def _check_decision(problem, x_star: np.ndarray, where: str) -> None:
    if isinstance(problem, LpInstance):
        if x_star.shape[0] != problem.n_vars:
            raise ValueError(f"{where}: x_star has wrong length")
        residual = float(
            np.max(np.abs(problem.a @ x_star - problem.b), initial=0.0)
        )
        if residual > tolerances.DATA_FEASIBILITY or np.any(
            x_star < -tolerances.ACTIVE
        ):
            raise ValueError(f"{where}: x_star infeasible (residual {residual:.2e})")
    else:
        if x_star.shape[0] != problem.n_vars:
            raise ValueError(f"{where}: x_star has wrong length")
        if abs(float(np.sum(x_star)) - 1.0) > tolerances.DATA_FEASIBILITY or np.any(
            x_star < -tolerances.ACTIVE
        ):
            raise ValueError(f"{where}: x_star is not on the probability simplex")


def dataset_to_json(ds: Dataset) -> dict:
    out = {
        "schema": SCHEMA_VERSION,
        "problem": _problem_to_json(ds.problem),
        "feature_scale": float(ds.feature_scale),
        "samples": [
            {
                "z": s.z.tolist(),
                "x_star": s.x_star.tolist(),
                "c_star": None if s.c_star is None else s.c_star.tolist(),
            }
            for s in ds.samples
        ],
    }
    if ds.generator is not None:
        out["generator"] = ds.generator
    return out


def dataset_from_json(obj: dict) -> Dataset:
    if not isinstance(obj, dict):
        raise ValueError("dataset: expected a JSON object")
    if obj.get("schema") != SCHEMA_VERSION:
        raise ValueError(
            f"schema: expected version {SCHEMA_VERSION}, got {obj.get('schema')!r}"
        )
    for key in ("problem", "feature_scale", "samples"):
        if key not in obj:
            raise ValueError(f"{key}: missing field")
    problem = _problem_from_json(obj["problem"])
    n_vars = problem.n_vars
    samples = []
    for i, raw in enumerate(obj["samples"]):
        where = f"samples[{i}]"
        for key in ("z", "x_star"):
            if key not in raw:
                raise ValueError(f"{where}.{key}: missing field")
        z = np.asarray(raw["z"], dtype=float)
        x_star = np.asarray(raw["x_star"], dtype=float)
        if z.ndim != 1 or not np.all(np.isfinite(z)):
            raise ValueError(f"{where}.z: expected a finite vector")
        if x_star.ndim != 1 or not np.all(np.isfinite(x_star)):
            raise ValueError(f"{where}.x_star: expected a finite vector")
        _check_decision(problem, x_star, where)
        c_star = raw.get("c_star")
        if c_star is not None:
            c_star = np.asarray(c_star, dtype=float)
            if c_star.shape[0] != n_vars or not np.all(np.isfinite(c_star)):
                raise ValueError(f"{where}.c_star: expected {n_vars} finite entries")
        samples.append(DecisionSample(z=z, x_star=x_star, c_star=c_star))
    return Dataset(
        problem=problem,
        samples=samples,
        feature_scale=float(obj["feature_scale"]),
        generator=obj.get("generator"),
    )


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_json(ds), indent=2) + "\n")


def load_dataset(path) -> Dataset:
    return dataset_from_json(json.loads(Path(path).read_text()))


def save_model(theta: np.ndarray, feature_scale: float, path) -> None:
    obj = {"theta": np.asarray(theta, dtype=float).tolist(), "feature_scale": float(feature_scale)}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def load_model(path) -> tuple[np.ndarray, float]:
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict) or "theta" not in obj:
        raise ValueError("theta: missing field")
    theta = np.asarray(obj["theta"], dtype=float)
    if theta.ndim != 2 or not np.all(np.isfinite(theta)):
        raise ValueError("theta: expected a finite matrix")
    return theta, float(obj.get("feature_scale", 1.0))
