import numpy as np
import pytest

from invopt.errors import NumericalFailure
from invopt.qp import (
    MAX_ITERS,
    SOLVED,
    PortfolioSpec,
    PreparedQp,
    QpConfig,
    QpProblem,
    solve_portfolio,
    solve_qp,
)
from oracles import project_box, project_halfspace, project_simplex


def _projection_problem(y, g, lower, upper):
    y = np.asarray(y, dtype=float)
    return QpProblem(p=np.eye(y.size), q=-y, g=g, lower=lower, upper=upper)


def test_unconstrained_frozen():
    prob = QpProblem(p=np.eye(2), q=np.array([1.0, -2.0]),
                     g=np.zeros((0, 2)), lower=np.zeros(0), upper=np.zeros(0))
    res = solve_qp(prob)
    assert res.status == SOLVED
    assert res.x == pytest.approx([-1.0, 2.0], abs=1e-7)


def test_simplex_projection_frozen():
    g = np.vstack([np.ones((1, 2)), np.eye(2)])
    lower = np.array([1.0, 0.0, 0.0])
    upper = np.array([1.0, np.inf, np.inf])
    res = solve_qp(_projection_problem([2.0, 0.0], g, lower, upper))
    assert res.status == SOLVED
    assert res.x == pytest.approx([1.0, 0.0], abs=1e-7)


def test_box_projections_match_closed_form():
    rng = np.random.default_rng(21)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        y = rng.standard_normal(n) * 3
        lower = rng.uniform(-1.0, 0.0, size=n)
        upper = lower + rng.uniform(0.5, 2.0, size=n)
        res = solve_qp(_projection_problem(y, np.eye(n), lower, upper))
        assert res.status == SOLVED
        assert res.x == pytest.approx(project_box(y, lower, upper), abs=1e-6)


def test_halfspace_projections_match_closed_form():
    rng = np.random.default_rng(22)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        y = rng.standard_normal(n) * 2
        a = rng.standard_normal(n)
        b = float(rng.standard_normal())
        g = a.reshape(1, -1)
        res = solve_qp(_projection_problem(
            y, g, np.array([-np.inf]), np.array([b])))
        assert res.status == SOLVED
        assert res.x == pytest.approx(project_halfspace(y, a, b), abs=1e-6)


def test_simplex_projections_match_sort_method():
    rng = np.random.default_rng(23)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        y = rng.standard_normal(n) * 2
        g = np.vstack([np.ones((1, n)), np.eye(n)])
        lower = np.concatenate([[1.0], np.zeros(n)])
        upper = np.concatenate([[1.0], np.full(n, np.inf)])
        res = solve_qp(_projection_problem(y, g, lower, upper))
        assert res.status == SOLVED
        assert res.x == pytest.approx(project_simplex(y), abs=1e-6)


def test_projection_idempotent():
    rng = np.random.default_rng(24)
    n = 5
    g = np.vstack([np.ones((1, n)), np.eye(n)])
    lower = np.concatenate([[1.0], np.zeros(n)])
    upper = np.concatenate([[1.0], np.full(n, np.inf)])
    for _ in range(20):
        y = rng.standard_normal(n) * 2
        once = solve_qp(_projection_problem(y, g, lower, upper)).x
        twice = solve_qp(_projection_problem(once, g, lower, upper)).x
        assert twice == pytest.approx(once, abs=1e-7)


def test_dual_signs_and_stationarity():
    # projection onto {x : x >= 0, sum x = 1}; KKT residual must vanish
    rng = np.random.default_rng(25)
    n = 4
    g = np.vstack([np.ones((1, n)), np.eye(n)])
    lower = np.concatenate([[1.0], np.zeros(n)])
    upper = np.concatenate([[1.0], np.full(n, np.inf)])
    for _ in range(20):
        y = rng.standard_normal(n)
        prob = _projection_problem(y, g, lower, upper)
        res = solve_qp(prob)
        assert res.status == SOLVED
        grad = prob.p @ res.x + prob.q + g.T @ res.y
        assert np.abs(grad).max() < 1e-6
        # rows at their lower bound take nonpositive multipliers
        slack_lower = g @ res.x - lower
        for i in range(1, n + 1):
            if slack_lower[i] > 1e-6:
                assert abs(res.y[i]) < 1e-6


def test_prepared_qp_reuses_factorization():
    n = 3
    g = np.eye(n)
    prepared = PreparedQp(p=np.eye(n), g=g, lower=np.zeros(n),
                          upper=np.full(n, np.inf), config=QpConfig())
    rng = np.random.default_rng(26)
    for _ in range(10):
        y = rng.standard_normal(n)
        res = prepared.solve(-y)
        assert res.status == SOLVED
        assert res.x == pytest.approx(np.maximum(y, 0.0), abs=1e-6)


def test_equality_rows_via_tight_bounds():
    # x1 + x2 = 2 exactly, minimize distance to origin
    g = np.ones((1, 2))
    prob = QpProblem(p=np.eye(2), q=np.zeros(2), g=g,
                     lower=np.array([2.0]), upper=np.array([2.0]))
    res = solve_qp(prob)
    assert res.status == SOLVED
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-7)


def test_max_iters_status():
    cfg = QpConfig(max_iters=2, check_every=1)
    g = np.vstack([np.ones((1, 3)), np.eye(3)])
    lower = np.concatenate([[1.0], np.zeros(3)])
    upper = np.concatenate([[1.0], np.full(3, np.inf)])
    prob = _projection_problem([5.0, -3.0, 2.0], g, lower, upper)
    res = solve_qp(prob, cfg)
    assert res.status in (SOLVED, MAX_ITERS)
    assert res.iterations <= 2


def test_problem_validation():
    with pytest.raises(ValueError):
        QpProblem(p=np.ones((2, 3)), q=np.zeros(2), g=np.zeros((0, 2)),
                  lower=np.zeros(0), upper=np.zeros(0))
    with pytest.raises(ValueError):
        QpProblem(p=np.array([[1.0, 2.0], [0.0, 1.0]]), q=np.zeros(2),
                  g=np.zeros((0, 2)), lower=np.zeros(0), upper=np.zeros(0))
    with pytest.raises(ValueError):
        QpProblem(p=np.eye(2), q=np.zeros(2), g=np.eye(2),
                  lower=np.array([1.0, 0.0]), upper=np.array([0.0, 1.0]))


def test_portfolio_frozen():
    x = solve_portfolio(np.eye(2), 2.0, np.array([1.0, 0.0]))
    assert x == pytest.approx([0.75, 0.25], abs=1e-7)


def test_portfolio_interior_optimum_kkt():
    rng = np.random.default_rng(27)
    for _ in range(20):
        m = int(rng.integers(2, 6))
        f = rng.standard_normal((m, 3))
        q_matrix = f @ f.T / m + 0.05 * np.eye(m)
        gamma = 0.5
        c = rng.standard_normal(m)
        x = solve_portfolio(q_matrix, gamma, c)
        assert x.sum() == pytest.approx(1.0, abs=1e-7)
        assert x.min() > -1e-7
        # on the support, marginal utilities equalize
        grad = gamma * q_matrix @ x - c
        support = x > 1e-6
        if support.sum() > 1:
            vals = grad[support]
            assert vals.max() - vals.min() < 1e-5


def test_portfolio_spec_validation():
    with pytest.raises(ValueError):
        PortfolioSpec(q_matrix=np.ones((2, 3)), gamma=1.0)
    with pytest.raises(ValueError):
        PortfolioSpec(q_matrix=np.eye(2), gamma=0.0)
    spec = PortfolioSpec(q_matrix=np.eye(3), gamma=0.5)
    assert spec.n_vars == 3
