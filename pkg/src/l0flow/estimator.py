"""Scikit-learn estimator wrapping the cardinality-penalized solver.

``L0BoxRegressor`` fits ``min ||X w - y||^2 + alpha * ||w||_0`` with the
coefficients confined to a box.  Sign-free coefficients (the default) are
handled through variable splitting; ``nonnegative=True`` solves directly
on ``[0, bound]``.  The estimator plugs into pipelines, grid search and
cloning like any other regressor.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .correction import solve_and_correct
from .dynamics import Certificate
from .model import (
    BoxSet,
    DynamicsParams,
    ProblemSpec,
    QuadraticLoss,
    estimate_grad_bound,
)
from .splitting import TwoSidedSpec, solve_two_sided


class L0BoxRegressor(BaseEstimator, RegressorMixin):
    """Sparse linear regression with an exact cardinality penalty.

    Parameters
    ----------
    alpha : float, default=1.0
        Weight of the cardinality penalty.
    bound : float, default=10.0
        Box half-width for the coefficients: ``[-bound, bound]`` per
        coordinate, or ``[0, bound]`` when ``nonnegative=True``.  Must be
        large enough to contain the coefficients you expect.
    nonnegative : bool, default=False
        Restrict coefficients to the nonnegative orthant.
    gamma, alpha0, beta : float
        Flow speed and annealing schedule of the solver.
    mu_star : float, optional
        Smoothing floor; derived from the data when omitted.
    step : float, optional
        Integrator step (default ``0.01 / gamma``).
    horizon : float, default=50.0
        Integration time budget.
    tol : float, default=1e-8
        Stationarity residual tolerance.
    fit_correction : bool, default=True
        Run the correction phase so the fitted point is a certified local
        minimizer even when the flow stops at the horizon.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Fitted sparse coefficients.
    support_ : ndarray of int
        Indices of the nonzero coefficients.
    n_iter_ : int
        Integrator steps taken.
    certificate_ : str
        Certification status of the fitted point.
    """

    def __init__(self, alpha=1.0, bound=10.0, nonnegative=False, gamma=1.0,
                 alpha0=1.0, beta=1.0, mu_star=None, step=None, horizon=50.0,
                 tol=1e-8, fit_correction=True):
        self.alpha = alpha
        self.bound = bound
        self.nonnegative = nonnegative
        self.gamma = gamma
        self.alpha0 = alpha0
        self.beta = beta
        self.mu_star = mu_star
        self.step = step
        self.horizon = horizon
        self.tol = tol
        self.fit_correction = fit_correction

    def _overrides(self):
        out = dict(gamma=self.gamma, alpha0=self.alpha0, beta=self.beta,
                   horizon=self.horizon, residual_tol=self.tol)
        if self.mu_star is not None:
            out["mu_star"] = self.mu_star
        if self.step is not None:
            out["step"] = self.step
        return out

    def fit(self, X, y):
        """Fit sparse coefficients to ``(X, y)``."""
        X, y = check_X_y(X, y, y_numeric=True)
        n_features = X.shape[1]
        bounds = np.full(n_features, float(self.bound))
        loss = QuadraticLoss(X, y)

        if self.nonnegative:
            grad_bound = estimate_grad_bound(X, y, float(self.bound))
            spec = ProblemSpec(loss, BoxSet.nonnegative(bounds),
                               float(self.alpha), grad_bound)
            params = DynamicsParams.for_problem(spec, **self._overrides())
            x0 = np.minimum(np.ones(n_features), spec.box.upper)
            report = solve_and_correct(spec, params, x0,
                                       correct_max_horizon=self.fit_correction)
            self.coef_ = report.final_x
            support = report.support
        else:
            two = TwoSidedSpec(loss, bounds, bounds, float(self.alpha))
            from .splitting import split

            params = DynamicsParams.for_problem(split(two), **self._overrides())
            solution = solve_two_sided(two, params,
                                       correct_max_horizon=self.fit_correction)
            report = solution.report
            self.coef_ = solution.y
            support = solution.support

        self.support_ = np.asarray(support, dtype=int)
        self.n_iter_ = report.iterations
        self.certificate_ = report.certificate.value
        self.report_ = report
        self.n_features_in_ = n_features
        return self

    def predict(self, X):
        """Predict with the fitted coefficients."""
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_
