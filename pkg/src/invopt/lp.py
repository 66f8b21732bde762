"""Standard-form linear programs: revised simplex and instance builders.

Instances are min <c, x> subject to a x = b, x >= 0 with the cost vector
supplied per solve. The solver is a dense two-phase revised simplex with
Bland's pivoting rule, so ties are broken deterministically and cycling is
impossible. Besides the optimal point it reports the optimal basis, the row
duals, and the reduced costs; downstream code leans on that certificate data,
which is why an off-the-shelf solver is not used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg

from . import tolerances
from .linalg import check_matrix, check_vector

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"

# Pivot elements smaller than this are treated as zero in ratio tests and
# when driving artificial variables out of the basis.
_PIVOT = 1e-10


@dataclass(frozen=True)
class LpInstance:
    """Constraint data a x = b, x >= 0 plus a tag describing its origin.

    `params` holds whatever the builder needs to reconstruct the instance
    (JSON-serializable scalars and lists only).
    """

    a: np.ndarray
    b: np.ndarray
    kind: str = "generic"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        a = check_matrix(self.a, "a")
        b = check_vector(self.b, "b")
        if a.shape[0] != b.shape[0]:
            raise ValueError(
                f"a has {a.shape[0]} rows but b has {b.shape[0]} entries"
            )
        if a.shape[0] > a.shape[1]:
            raise ValueError(
                f"more equality rows than variables ({a.shape[0]} > {a.shape[1]})"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_vars(self) -> int:
        return self.a.shape[1]


@dataclass
class SimplexResult:
    """Solve certificate. `x`, `basis`, `duals`, `reduced_costs` and
    `objective` are populated only when status is "optimal". `basis` lists
    the basic column indices (one per independent row of a); `duals` has one
    entry per original row, zero on rows found linearly dependent."""

    status: str
    x: np.ndarray | None = None
    basis: tuple[int, ...] | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0


def _bland_iterate(a: np.ndarray, b: np.ndarray, c: np.ndarray, basis: list[int]):
    """Run simplex pivots from a feasible basis until optimal or unbounded.

    Mutates `basis` in place and returns (status, iteration count). Entering:
    lowest-index column with reduced cost below -OPTIMALITY. Leaving: among
    the minimum-ratio rows, the one whose basic variable has the lowest
    index. Both choices are Bland's rule, which rules out cycling.
    """
    n = a.shape[0]
    # Bland's rule terminates; the cap only guards against numerical stalls.
    cap = 1000 * (a.shape[1] + n + 10)
    for it in range(cap):
        bmat = a[:, basis]
        xb = np.linalg.solve(bmat, b)
        nu = np.linalg.solve(bmat.T, c[basis])
        reduced = c - a.T @ nu
        reduced[basis] = 0.0
        entering_candidates = np.nonzero(reduced < -tolerances.OPTIMALITY)[0]
        if entering_candidates.size == 0:
            return OPTIMAL, it
        j = int(entering_candidates[0])
        d = np.linalg.solve(bmat, a[:, j])
        positive = d > _PIVOT
        if not np.any(positive):
            return UNBOUNDED, it
        ratios = np.full(n, np.inf)
        ratios[positive] = np.maximum(xb[positive], 0.0) / d[positive]
        best = float(ratios.min())
        ties = np.nonzero(ratios <= best + 1e-12)[0]
        leave = min(ties, key=lambda i: basis[i])
        basis[leave] = j
    raise ArithmeticError("simplex did not terminate within the pivot cap")


def _independent_rows(a: np.ndarray) -> list[int]:
    """Indices of a maximal linearly independent subset of rows."""
    if a.shape[0] == 0:
        return []
    _, r, piv = scipy.linalg.qr(a.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return []
    rank = int(np.sum(diag > diag[0] * 1e-12))
    return sorted(int(p) for p in piv[:rank])


def solve_lp(inst: LpInstance, c) -> SimplexResult:
    """Two-phase revised simplex. Deterministic for fixed inputs."""
    c = check_vector(c, "c")
    if c.shape[0] != inst.n_vars:
        raise ValueError(
            f"cost length {c.shape[0]} does not match {inst.n_vars} variables"
        )
    n, m = inst.a.shape
    if n == 0:
        # Only the origin is a vertex; optimal there iff no cost is negative.
        if np.any(c < -tolerances.OPTIMALITY):
            return SimplexResult(status=UNBOUNDED)
        return SimplexResult(
            status=OPTIMAL,
            x=np.zeros(m),
            basis=(),
            objective=0.0,
            duals=np.zeros(0),
            reduced_costs=c.copy(),
        )

    # Orient rows so the right-hand side is non-negative, and drop linearly
    # dependent rows up front (their consistency is re-checked on exit).
    sign = np.where(inst.b < 0, -1.0, 1.0)
    kept = _independent_rows(inst.a)
    a = inst.a[kept] * sign[kept, None]
    b = inst.b[kept] * sign[kept]
    nk = len(kept)

    # Phase 1: artificial identity basis, minimize the artificial mass.
    a1 = np.hstack([a, np.eye(nk)])
    c1 = np.concatenate([np.zeros(m), np.ones(nk)])
    basis = list(range(m, m + nk))
    status1, it1 = _bland_iterate(a1, b, c1, basis)
    assert status1 == OPTIMAL  # phase 1 is bounded below by zero
    xb = np.linalg.solve(a1[:, basis], b)
    if float(c1[basis] @ xb) > tolerances.FEASIBILITY:
        return SimplexResult(status=INFEASIBLE, iterations=it1)

    # Drive any remaining artificial out of the basis. Rows were reduced to
    # full rank, so a replacement column always exists.
    cleanup = 0
    for pos in range(nk):
        if basis[pos] < m:
            continue
        tableau_row = np.linalg.solve(a1[:, basis], a)[pos]
        in_basis = set(basis)
        for j in range(m):
            if j not in in_basis and abs(tableau_row[j]) > _PIVOT:
                basis[pos] = j
                cleanup += 1
                break
        else:
            raise ArithmeticError("stuck artificial variable on full-rank rows")

    status2, it2 = _bland_iterate(a, b, c, basis)
    iterations = it1 + cleanup + it2
    if status2 != OPTIMAL:
        return SimplexResult(status=status2, iterations=iterations)

    bmat = a[:, basis]
    x = np.zeros(m)
    x[basis] = np.linalg.solve(bmat, b)
    nu_kept = np.linalg.solve(bmat.T, c[basis])
    duals = np.zeros(n)
    duals[kept] = nu_kept * sign[kept]
    residual = inst.a @ x - inst.b
    scale = 1.0 + float(np.max(np.abs(inst.b), initial=0.0))
    if float(np.max(np.abs(residual), initial=0.0)) > tolerances.FEASIBILITY * scale:
        # A dropped row was inconsistent with the rest of the system.
        return SimplexResult(status=INFEASIBLE, iterations=iterations)
    reduced = c - inst.a.T @ duals
    reduced[list(basis)] = 0.0
    return SimplexResult(
        status=OPTIMAL,
        x=x,
        basis=tuple(sorted(int(j) for j in basis)),
        objective=float(c @ x),
        duals=duals,
        reduced_costs=reduced,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Instance builders. Edge orderings are part of the contract: cost vectors
# generated for these instances index edges in exactly the order below.


def grid_edges(k: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Edges of the k x k grid: all rightward edges in row-major order, then
    all downward edges in row-major order. 2k(k-1) total."""
    edges = []
    for i in range(k):
        for j in range(k - 1):
            edges.append(((i, j), (i, j + 1)))
    for i in range(k - 1):
        for j in range(k):
            edges.append(((i, j), (i + 1, j)))
    return edges


def build_grid_shortest_path(k: int) -> LpInstance:
    """Unit-flow shortest path on the k x k grid with right/down edges.

    Source is the top-left vertex, target the bottom-right. Rows are net-flow
    balances (+1 at the source, -1 at the target, 0 elsewhere); the target
    row is dropped since the balances sum to zero, leaving k^2 - 1
    independent rows. Vertices of the polytope are 0/1 path indicators.
    """
    if k < 2:
        raise ValueError("grid size must be at least 2")
    edges = grid_edges(k)
    m = len(edges)
    vid = {(i, j): i * k + j for i in range(k) for j in range(k)}
    rows = np.zeros((k * k, m))
    for e, (u, v) in enumerate(edges):
        rows[vid[u], e] += 1.0
        rows[vid[v], e] -= 1.0
    rhs = np.zeros(k * k)
    rhs[vid[(0, 0)]] = 1.0
    rhs[vid[(k - 1, k - 1)]] = -1.0
    keep = [r for r in range(k * k) if r != vid[(k - 1, k - 1)]]
    return LpInstance(
        a=rows[keep], b=rhs[keep], kind="sp-grid", params={"grid_size": k}
    )


def build_knapsack(weights, capacity: float) -> LpInstance:
    """Fractional knapsack in standard min-form.

    Variables: the k item fractions, then the capacity slack, then one slack
    per item upper bound x_i <= 1 (m = 2k + 1). Rows: the capacity row, then
    the k bound rows. Cost vectors should carry NEGATED returns on the item
    coordinates and zero on the slacks; `knapsack_cost` applies that
    convention.
    """
    w = check_vector(weights, "weights")
    k = w.shape[0]
    if k == 0:
        raise ValueError("need at least one item")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    a = np.zeros((k + 1, 2 * k + 1))
    a[0, :k] = w
    a[0, k] = 1.0
    a[1:, :k] = np.eye(k)
    a[1:, k + 1 :] = np.eye(k)
    b = np.concatenate([[float(capacity)], np.ones(k)])
    return LpInstance(
        a=a,
        b=b,
        kind="knapsack",
        params={
            "items": k,
            "weights": [float(v) for v in w],
            "capacity": float(capacity),
        },
    )


def knapsack_cost(returns) -> np.ndarray:
    """Min-form cost vector for a knapsack instance: negated returns padded
    with zeros for the slack coordinates."""
    r = check_vector(returns, "returns")
    return np.concatenate([-r, np.zeros(r.shape[0] + 1)])


def build_perfect_matching(k: int) -> LpInstance:
    """Min-cost perfect matching on the k x k grid graph (k even).

    Undirected 4-neighbor edges in the shared grid ordering; one row per
    vertex requiring exactly one incident edge. Grid graphs are bipartite, so
    the rows carry one linear dependency (the solver drops it internally) and
    every polytope vertex is an integral matching.
    """
    if k < 2 or k % 2:
        raise ValueError("grid size must be even and at least 2")
    edges = grid_edges(k)
    m = len(edges)
    vid = {(i, j): i * k + j for i in range(k) for j in range(k)}
    a = np.zeros((k * k, m))
    for e, (u, v) in enumerate(edges):
        a[vid[u], e] = 1.0
        a[vid[v], e] = 1.0
    return LpInstance(
        a=a, b=np.ones(k * k), kind="perfect-matching", params={"grid_size": k}
    )
