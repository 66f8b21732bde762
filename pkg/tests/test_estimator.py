import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from invopt.data import gen_shortest_path
from invopt.estimator import InverseCostEstimator
from invopt.lp import build_grid_shortest_path


def _raw_data():
    # un-normalized contexts paired with observed decisions
    ds = gen_shortest_path(15, seed=20, grid_size=3, d=4, degree=2, noise=0.2)
    X = ds.features() * ds.feature_scale
    y = ds.decisions()
    return ds.problem, X, y


def test_get_set_params_round_trip():
    est = InverseCostEstimator(method="gd", epochs=7)
    params = est.get_params()
    assert params["method"] == "gd"
    assert params["epochs"] == 7
    clone = InverseCostEstimator(**params)
    assert clone.get_params() == params
    est.set_params(margin=2.0)
    assert est.get_params()["margin"] == 2.0


def test_fit_predict_decide():
    problem, X, y = _raw_data()
    est = InverseCostEstimator(problem=problem, method="pocs", epochs=8,
                               margin=1.0)
    est.fit(X, y)
    assert est.theta_.shape == (X.shape[1], problem.n_vars)
    assert len(est.history_) == 8
    assert est.history_[-1] <= est.history_[0] + 1e-12
    costs = est.predict(X)
    assert costs.shape == (X.shape[0], problem.n_vars)
    decisions = est.decide(X)
    assert decisions.shape == y.shape
    # flow conservation holds for every predicted decision
    residual = problem.a @ decisions.T - problem.b[:, None]
    assert np.abs(residual).max() < 1e-7


def test_score_improves_with_training():
    problem, X, y = _raw_data()
    short = InverseCostEstimator(problem=problem, epochs=1).fit(X, y)
    long = InverseCostEstimator(problem=problem, epochs=20).fit(X, y)
    assert long.score(X, y) >= short.score(X, y) - 1e-9


def test_unfitted_raises():
    est = InverseCostEstimator(problem=build_grid_shortest_path(2))
    with pytest.raises(NotFittedError):
        est.predict(np.ones((2, 3)))
    with pytest.raises(NotFittedError):
        est.decide(np.ones((2, 3)))


def test_problem_required_for_fit():
    _, X, y = _raw_data()
    with pytest.raises(ValueError):
        InverseCostEstimator().fit(X, y)


def test_input_validation():
    problem, X, y = _raw_data()
    est = InverseCostEstimator(problem=problem, epochs=2)
    with pytest.raises(ValueError):
        est.fit(X, y[: len(y) - 1])
    with pytest.raises(ValueError):
        est.fit(X[:, :0], y)
