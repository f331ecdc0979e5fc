"""scikit-learn style wrappers around the analytic Stefan solution and the FEM simulator.

Both follow the estimator contract: constructor arguments are stored verbatim,
``fit`` does the work and sets trailing-underscore attributes, ``predict`` maps
an ``(n, 2)`` array of ``(x, t)`` or ``(n, dim)`` points to temperatures.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points
from .config import config_from_dict
from .experiments import build_case, simulate_case
from .mesh import interpolate_nodal
from .stefan import StefanProblem, front_position, solve_similarity_constant, temperature_at


class StefanSolution(BaseEstimator):
    """Two-phase Neumann solution on the half line; ``predict`` takes ``(x, t)`` rows."""

    def __init__(self, T_wall=253.0, T_0=283.0, T_m=273.0, C_s=1.762e6, C_l=4.226e6, k_s=2.22, k_l=0.556, H_m=338e6):
        self.T_wall = T_wall
        self.T_0 = T_0
        self.T_m = T_m
        self.C_s = C_s
        self.C_l = C_l
        self.k_s = k_s
        self.k_l = k_l
        self.H_m = H_m

    def fit(self, X=None, y=None):
        self.problem_ = StefanProblem(**self.get_params())
        self.lambda_ = solve_similarity_constant(self.problem_)
        return self

    def predict(self, X):
        check_is_fitted(self, "lambda_")
        X = check_points(X, 2)
        return temperature_at(self.problem_, X[:, 0], X[:, 1], self.lambda_)

    def front(self, t):
        check_is_fitted(self, "lambda_")
        return front_position(self.problem_, np.asarray(t, dtype=float), self.lambda_)


class PhaseChangeSimulator(BaseEstimator):
    """Runs one configured experiment; ``predict`` interpolates the final temperature field.

    ``config`` is a mapping of dotted keys (as in a config file) and must at
    least name the ``case``.
    """

    def __init__(self, config=None):
        self.config = config

    def fit(self, X=None, y=None):
        cfg = config_from_dict(dict(self.config or {}))
        self.case_ = build_case(cfg)
        self.result_ = simulate_case(self.case_)
        self.mesh_ = self.case_.problem.mesh
        self.temperature_ = self.result_.state.T
        self.metrics_ = self.result_.metadata.get("metrics", {})
        return self

    def predict(self, X):
        check_is_fitted(self, "temperature_")
        X = check_points(X, self.mesh_.dim)
        return interpolate_nodal(self.mesh_, self.temperature_, X)
