"""Reduction of two-sided boxes to the one-sided solver via variable splitting.

A sign-free variable on ``[-l, u]`` is written as ``y = x_plus - x_minus``
with ``x_plus`` on ``[0, u]`` and ``x_minus`` on ``[0, l]``; the penalty
becomes ``lam (||x_plus||_0 + ||x_minus||_0)``.  Local minimizers of the
two formulations map onto each other, and at a local minimizer the two
halves are complementary (``x_plus_i * x_minus_i = 0``), so the recombined
cardinality is additive across the halves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .correction import solve_and_correct, support_indices
from .dynamics import SolveReport
from .model import (
    BoxSet,
    ConfigurationError,
    DynamicsParams,
    LossModel,
    ProblemSpec,
    QuadraticLoss,
    _readonly,
    estimate_grad_bound,
    zero_tolerance,
)


@dataclass(frozen=True)
class TwoSidedSpec:
    """Sparse regression on the two-sided box ``[-lower_mag, upper]``."""

    loss: LossModel
    lower_mag: np.ndarray
    upper: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "lower_mag", _readonly(np.atleast_1d(self.lower_mag)))
        object.__setattr__(self, "upper", _readonly(np.atleast_1d(self.upper)))
        if self.lower_mag.shape != self.upper.shape or self.lower_mag.ndim != 1:
            raise ConfigurationError("lower_mag and upper must be equal-length vectors")
        if np.any(self.lower_mag < 0) or np.any(self.upper < 0):
            raise ConfigurationError("two-sided bound magnitudes must be nonnegative")
        if self.lam <= 0:
            raise ConfigurationError(f"penalty weight lam must be positive, got {self.lam}")
        if self.loss.dim != self.upper.size:
            raise ConfigurationError(
                f"loss dimension {self.loss.dim} != bound dimension {self.upper.size}"
            )

    @property
    def dim(self) -> int:
        return self.upper.size


class SplitLoss(LossModel):
    """Loss of the split variable: ``g(x_plus, x_minus) = f(x_plus - x_minus)``."""

    def __init__(self, inner: LossModel):
        self.inner = inner

    @property
    def dim(self) -> int:
        return 2 * self.inner.dim

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        n = self.inner.dim
        return self.inner.value(x[:n] - x[n:])

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.inner.dim
        g = self.inner.gradient(x[:n] - x[n:])
        return np.concatenate([g, -g])


def split(spec: TwoSidedSpec, grad_bound: float | None = None) -> ProblemSpec:
    """One-sided problem over ``(x_plus, x_minus)`` on ``[0, u] x [0, l]``.

    Quadratic losses split into the stacked matrix ``[A, -A]`` and the
    gradient bound is recomputed on it with ``k = max(||u||_inf, ||l||_inf)``
    (mixed signs, so the general two-corner bound applies).  Other losses
    need an explicit ``grad_bound`` for the split variable.
    """
    if isinstance(spec.loss, QuadraticLoss):
        stacked = np.hstack([spec.loss.A, -spec.loss.A])
        loss = QuadraticLoss(stacked, spec.loss.b)
        if grad_bound is None:
            k = max(float(np.max(spec.upper)), float(np.max(spec.lower_mag)))
            if k <= 0:
                raise ConfigurationError("two-sided box is degenerate (all bounds zero)")
            grad_bound = estimate_grad_bound(stacked, spec.loss.b, k)
    else:
        loss = SplitLoss(spec.loss)
        if grad_bound is None:
            raise ConfigurationError(
                "non-quadratic losses need an explicit grad_bound for the split problem"
            )
    box = BoxSet.nonnegative(np.concatenate([spec.upper, spec.lower_mag]))
    return ProblemSpec(loss, box, spec.lam, float(grad_bound))


def recombine(x_plus, x_minus) -> np.ndarray:
    """Reassemble the sign-free variable ``x_plus - x_minus``."""
    x_plus = np.asarray(x_plus, dtype=float)
    x_minus = np.asarray(x_minus, dtype=float)
    if x_plus.shape != x_minus.shape:
        raise ConfigurationError(
            f"halves have mismatched shapes {x_plus.shape} and {x_minus.shape}"
        )
    return x_plus - x_minus


def clean_complementarity(x_plus, x_minus) -> tuple[np.ndarray, np.ndarray]:
    """Remove the common mass ``min(x_plus_i, x_minus_i)`` from both halves.

    Leaves the recombined vector unchanged while making the halves exactly
    complementary; support metrics use the cleaned halves.
    """
    x_plus = np.asarray(x_plus, dtype=float)
    x_minus = np.asarray(x_minus, dtype=float)
    common = np.minimum(x_plus, x_minus)
    return x_plus - common, x_minus - common


@dataclass(frozen=True)
class TwoSidedSolution:
    """Recombined output of a split solve."""

    y: np.ndarray
    x_plus: np.ndarray
    x_minus: np.ndarray
    support: tuple[int, ...]
    report: SolveReport


def solve_two_sided(
    spec: TwoSidedSpec,
    params: DynamicsParams | None = None,
    x0=None,
    *,
    correct_max_horizon: bool = True,
    **solve_kwargs,
) -> TwoSidedSolution:
    """Split, solve with correction, and recombine.

    ``x0`` is a start for the split variable (length ``2n``); it defaults to
    the all-ones vector clipped to the box.  A warning is emitted when the
    halves are not complementary at the output, which only happens away from
    exact local minimizers.
    """
    problem = split(spec)
    if params is None:
        params = DynamicsParams.for_problem(problem)
    n = spec.dim
    if x0 is None:
        x0 = np.minimum(np.ones(2 * n), problem.box.upper)
    report = solve_and_correct(problem, params, x0,
                               correct_max_horizon=correct_max_horizon,
                               **solve_kwargs)
    x_plus, x_minus = report.final_x[:n], report.final_x[n:]
    tol = zero_tolerance(params.mu_star)
    if np.max(np.minimum(np.abs(x_plus), np.abs(x_minus)), initial=0.0) > tol:
        warnings.warn("split halves are not complementary at the output; "
                      "the point is not an exact local minimizer", stacklevel=2)
    x_plus_c, x_minus_c = clean_complementarity(x_plus, x_minus)
    y = recombine(x_plus, x_minus)
    support = support_indices(np.maximum(x_plus_c, x_minus_c), params.mu_star)
    return TwoSidedSolution(y=y, x_plus=x_plus, x_minus=x_minus,
                            support=support, report=report)
