"""scikit-learn style front end for the cost-model trainer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .data import Dataset, DecisionSample, solve_decision
from .training import TrainConfig, run_trainer


class InverseCostEstimator(BaseEstimator):
    """Learns a linear map from contexts to cost vectors such that the
    induced optimization decisions match observed ones.

    Parameters mirror `TrainConfig`; `problem` is the forward-problem data
    (an `LpInstance` or `PortfolioSpec`) shared by all samples. `fit` takes
    contexts X (n_samples, n_features) and observed decisions y
    (n_samples, n_costs); `predict` returns cost vectors, `decide` the
    decisions they induce.
    """

    def __init__(
        self,
        problem=None,
        method: str = "pocs",
        step: str = "constant",
        step_size: float = 1.0,
        epochs: int = 50,
        margin: float = 1.0,
        seed: int = 0,
        shuffle: bool = True,
    ):
        self.problem = problem
        self.method = method
        self.step = step
        self.step_size = step_size
        self.epochs = epochs
        self.margin = margin
        self.seed = seed
        self.shuffle = shuffle

    def fit(self, X, y):
        if self.problem is None:
            raise ValueError("problem must be set before fitting")
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on the sample count")
        norms = np.linalg.norm(X, axis=1)
        scale = float(norms.max(initial=0.0))
        self.scale_ = scale if scale > 1e-12 else 1.0
        samples = [
            DecisionSample(z=z, x_star=x_star)
            for z, x_star in zip(X / self.scale_, y)
        ]
        dataset = Dataset(
            problem=self.problem, samples=samples, feature_scale=self.scale_
        )
        cfg = TrainConfig(
            method=self.method,
            step=self.step,
            step_size=self.step_size,
            epochs=self.epochs,
            margin=self.margin,
            seed=self.seed,
            shuffle=self.shuffle,
            eval_decisions=False,
        )
        result = run_trainer(dataset, cfg)
        self.theta_ = result.theta
        self.history_ = [record.h for record in result.log]
        return self

    def _check_fitted(self):
        if not hasattr(self, "theta_"):
            raise NotFittedError("fit must be called first")

    def predict(self, X) -> np.ndarray:
        """Predicted cost vectors, one row per context."""
        self._check_fitted()
        X = check_array(X, dtype=float)
        return X / self.scale_ @ self.theta_

    def decide(self, X) -> np.ndarray:
        """Decisions induced by the predicted costs."""
        costs = self.predict(X)
        return np.array([solve_decision(self.problem, c) for c in costs])

    def score(self, X, y) -> float:
        """Negative mean squared decision gap (higher is better)."""
        y = check_array(y, dtype=float)
        gaps = self.decide(X) - y
        return -float(np.mean(np.sum(gaps * gaps, axis=1)))
