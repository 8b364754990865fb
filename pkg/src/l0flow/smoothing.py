"""Piecewise-quadratic smoothing of the counting function on the nonnegative axis.

For ``mu > 0`` the scalar surrogate is

    theta(s, mu) = (3 / (2 mu)) s                      if s <  mu / 3
                 = 1 - (9 / (8 mu^2)) (s - mu)^2       if mu / 3 <= s <= mu
                 = 1                                   if s >  mu

It is continuously differentiable in ``s`` with a globally Lipschitz
derivative (constant ``9 / (4 mu^2)``), rises from 0 to 1 on ``[0, mu]``,
and converges pointwise to the indicator ``s != 0`` on the nonnegative
axis as ``mu`` shrinks.  The vector penalty is the sum of ``theta`` over
the coordinates.

At the breakpoints ``s = mu/3`` and ``s = mu`` the closed middle branch is
used; both branches agree there, so the choice never changes values.  The
linear first branch extends to negative ``s`` so that transient integrator
states slightly outside the feasible box still evaluate cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_mu(mu) -> float:
    mu = float(mu)
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"smoothing parameter mu must be positive, got {mu}")
    return mu


def _as_array(s):
    return np.asarray(s, dtype=float)


def _scalar_friendly(out, s):
    if np.ndim(s) == 0:
        return float(out)
    return out


def theta(s, mu) -> float | np.ndarray:
    """Evaluate the scalar surrogate; accepts scalars or arrays in ``s``."""
    mu = _check_mu(mu)
    sv = _as_array(s)
    middle = 1.0 - (9.0 / (8.0 * mu * mu)) * (sv - mu) ** 2
    out = np.where(sv < mu / 3.0, (1.5 / mu) * sv,
                   np.where(sv <= mu, middle, 1.0))
    return _scalar_friendly(out, s)


def theta_grad_s(s, mu) -> float | np.ndarray:
    """Derivative of ``theta`` in ``s``: ``3/(2 mu)`` on the linear branch,
    ``(9/(4 mu^2)) (mu - s)`` on the quadratic branch, 0 beyond ``mu``."""
    mu = _check_mu(mu)
    sv = _as_array(s)
    out = np.where(sv < mu / 3.0, 1.5 / mu,
                   np.where(sv <= mu, (2.25 / (mu * mu)) * (mu - sv), 0.0))
    return _scalar_friendly(out, s)


def theta_grad_mu(s, mu) -> float | np.ndarray:
    """Derivative of ``theta`` in ``mu`` for ``s >= 0``:

    ``-3 s / (2 mu^2)`` when ``mu > 3 s``, ``-9 (mu - s) s / (4 mu^3)`` when
    ``s <= mu <= 3 s``, and 0 when ``mu < s``.  Nonpositive on the
    nonnegative axis: shrinking ``mu`` only raises the surrogate.
    """
    mu = _check_mu(mu)
    sv = _as_array(s)
    out = np.where(mu > 3.0 * sv, -1.5 * sv / (mu * mu),
                   np.where(mu >= sv, -2.25 * (mu - sv) * sv / mu ** 3, 0.0))
    return _scalar_friendly(out, s)


def theta_sum(x, mu) -> float:
    """Vector penalty: sum of ``theta`` over the coordinates."""
    return float(np.sum(theta(_as_array(x), mu)))


def theta_sum_grad_x(x, mu) -> np.ndarray:
    """Coordinate gradient of the vector penalty."""
    return np.atleast_1d(theta_grad_s(_as_array(x), mu))


def theta_sum_grad_mu(x, mu) -> float:
    """Derivative of the vector penalty in ``mu``."""
    return float(np.sum(theta_grad_mu(_as_array(x), mu)))


@dataclass(frozen=True)
class SmoothEval:
    """One scalar evaluation: value and both partial derivatives."""

    value: float
    grad_s: float
    grad_mu: float


def evaluate(s: float, mu: float) -> SmoothEval:
    """Evaluate ``theta`` and both partials at a scalar point."""
    return SmoothEval(theta(s, mu), theta_grad_s(s, mu), theta_grad_mu(s, mu))


def mu_gradient_bound(upper, mu) -> float:
    """Sup-norm bound on the vector penalty's ``mu``-derivative over
    ``[0, upper]``: per coordinate, ``|theta_grad_mu|`` is maximized at
    ``s = min(upper_i, mu / 2)``."""
    mu = _check_mu(mu)
    cap = np.minimum(np.asarray(upper, dtype=float), 0.5 * mu)
    per = np.where(cap < mu / 3.0, 1.5 * cap / (mu * mu),
                   2.25 * (mu - cap) * cap / mu ** 3)
    return float(np.sum(per))
