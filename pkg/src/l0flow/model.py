"""Problem definitions: loss models, box constraints and solver parameter rules.

The solver minimizes ``f(x) + lam * ||x||_0`` over an axis-aligned box
``{x : 0 <= x <= upper}``.  Everything the annealed projection dynamics need
to run safely is derived here: a certified sup-norm bound on the loss
gradient over the box and an admissible smoothing floor ``mu_star``.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class ConfigurationError(ValueError):
    """Invalid problem data or solver parameters."""


class DataError(ValueError):
    """Malformed input file (problem JSON or dataset CSV)."""


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def zero_tolerance(mu_star: float) -> float:
    """Magnitude below which an entry is reported as zero.

    Set to ``mu_star / 12``: halfway between zero and the guaranteed
    lower bound ``mu_star / 6`` for nonzero entries of converged points,
    so the two clusters are separated by construction.
    """
    return mu_star / 12.0


@dataclass(frozen=True)
class BoxSet:
    """Axis-aligned box ``{x : lower <= x <= upper}``.

    The solver itself runs on one-sided boxes (``lower == 0``); general
    lower bounds appear only transiently while reducing two-sided models.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _readonly(np.atleast_1d(self.lower)))
        object.__setattr__(self, "upper", _readonly(np.atleast_1d(self.upper)))
        if self.lower.ndim != 1 or self.lower.shape != self.upper.shape:
            raise ConfigurationError(
                "box bounds must be 1-d vectors of equal length, got shapes "
                f"{self.lower.shape} and {self.upper.shape}"
            )
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise ConfigurationError(f"box has lower > upper at index {bad}")

    @classmethod
    def nonnegative(cls, upper) -> "BoxSet":
        """One-sided box ``[0, upper]``."""
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if np.any(upper < 0):
            raise ConfigurationError("one-sided box needs nonnegative upper bounds")
        return cls(np.zeros_like(upper), upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_one_sided(self) -> bool:
        return bool(np.all(self.lower == 0.0))

    @property
    def upper_max(self) -> float:
        """Largest upper bound (sup-norm radius of a one-sided box)."""
        return float(np.max(self.upper))

    @property
    def upper_min_nonzero(self) -> float:
        """Smallest nonzero upper bound; entries pinned at zero are ignored."""
        nz = self.upper[self.upper != 0.0]
        if nz.size == 0:
            raise ConfigurationError("all upper bounds are zero; box is degenerate")
        return float(np.min(nz))

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol)
        )


def project_box(x, box: BoxSet) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    x = np.asarray(x, dtype=float)
    if x.shape != box.lower.shape:
        raise ConfigurationError(
            f"cannot project vector of shape {x.shape} onto box of dim {box.dim}"
        )
    return np.clip(x, box.lower, box.upper)


class LossModel(abc.ABC):
    """Smooth convex loss ``f``.

    Implementations must be convex with a locally Lipschitz gradient.  This
    is a documented contract; it cannot be verified for arbitrary callables.
    """

    @abc.abstractmethod
    def value(self, x) -> float:
        """Evaluate ``f(x)``."""

    @abc.abstractmethod
    def gradient(self, x) -> np.ndarray:
        """Evaluate the gradient of ``f`` at ``x``."""

    @property
    @abc.abstractmethod
    def dim(self) -> int:
        """Dimension of the argument vector."""


def quadratic_gradient(A, b, x) -> np.ndarray:
    """Gradient ``2 A^T (A x - b)`` of the squared residual ``||Ax - b||^2``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],) or x.shape != (A.shape[1],):
        raise ConfigurationError(
            f"dimension mismatch: A is {A.shape}, b is {b.shape}, x is {x.shape}"
        )
    return 2.0 * (A.T @ (A @ x - b))


class QuadraticLoss(LossModel):
    """Squared residual loss ``f(x) = ||A x - b||^2``."""

    def __init__(self, A, b):
        self.A = _readonly(A)
        self.b = _readonly(b)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ConfigurationError(
                f"A must be m x n and b length m, got {self.A.shape} and {self.b.shape}"
            )

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def value(self, x) -> float:
        r = self.A @ np.asarray(x, dtype=float) - self.b
        return float(r @ r)

    def gradient(self, x) -> np.ndarray:
        return quadratic_gradient(self.A, self.b, x)


def estimate_grad_bound(A, b, k, *, shortcut: bool = True) -> float:
    """Upper bound on ``sup {||grad f(x)||_inf : 0 <= x <= k}`` for the
    squared residual loss.

    With ``W = |A|`` entrywise, the bound is ``max(||C1||_inf, ||C2||_inf)``
    where ``C1 = 2 (W^T W k 1 - A^T b)`` and ``C2 = 2 (-W^T W k 1 - A^T b)``.
    When every entry of ``A`` and ``b`` is nonnegative the gradient is
    monotone on the box, ``||C1||_inf`` alone is tight, and it is returned
    instead (disable with ``shortcut=False``).
    """
    if k <= 0:
        raise ConfigurationError(f"box bound k must be positive, got {k}")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or b.shape != (A.shape[0],):
        raise ConfigurationError(
            f"dimension mismatch: A is {A.shape}, b is {b.shape}"
        )
    W = np.abs(A)
    wk = W.T @ (W @ np.full(A.shape[1], float(k)))
    atb = A.T @ b
    c1 = 2.0 * (wk - atb)
    c2 = 2.0 * (-wk - atb)
    l1 = float(np.max(np.abs(c1))) if c1.size else 0.0
    l2 = float(np.max(np.abs(c2))) if c2.size else 0.0
    if shortcut and np.all(A >= 0) and np.all(b >= 0):
        return l1
    return max(l1, l2)


def select_mu_star(k, lam, n, grad_bound) -> float:
    """Smoothing floor ``0.9 * min(k, 3 lam / (2 (k + L)), 2 lam / (n L))``
    for a uniform box ``[0, k]^n`` with gradient bound ``L``."""
    if k <= 0 or lam <= 0 or n <= 0 or grad_bound <= 0:
        raise ConfigurationError(
            "select_mu_star needs positive k, lam, n and grad_bound, got "
            f"k={k}, lam={lam}, n={n}, grad_bound={grad_bound}"
        )
    return 0.9 * min(
        float(k),
        3.0 * lam / (2.0 * (k + grad_bound)),
        2.0 * lam / (n * grad_bound),
    )


def admissibility_terms(box: BoxSet, lam: float, grad_bound: float) -> dict:
    """The three named upper limits that an admissible ``mu_star`` must stay
    strictly below.  Infinite entries mean the term imposes no limit."""
    n = box.dim
    if grad_bound > 0:
        t2 = 3.0 * lam / (2.0 * (box.upper_max + grad_bound))
        t3 = 2.0 * lam / (n * grad_bound)
    else:
        t2 = np.inf
        t3 = np.inf
    return {
        "min nonzero upper bound": box.upper_min_nonzero,
        "3*lam/(2*(v_max + L_f))": t2,
        "2*lam/(n*L_f)": t3,
    }


def check_mu_star(spec: "ProblemSpec", mu_star: float) -> None:
    """Raise ``ConfigurationError`` naming the violated admissibility term
    unless ``0 < mu_star < min(terms)``."""
    if mu_star <= 0:
        raise ConfigurationError(f"mu_star must be positive, got {mu_star}")
    terms = admissibility_terms(spec.box, spec.lam, spec.grad_bound)
    violated = [name for name, limit in terms.items() if mu_star >= limit]
    if violated:
        detail = ", ".join(f"{name} = {terms[name]:.6g}" for name in violated)
        raise ConfigurationError(
            f"mu_star = {mu_star:.6g} violates admissibility term(s): {detail}"
        )


def default_mu_star(spec: "ProblemSpec") -> float:
    """``0.9 * min`` of the admissibility terms.

    Coincides with :func:`select_mu_star` on uniform boxes ``[0, k]^n`` and
    extends the same rule to heterogeneous upper bounds.
    """
    terms = admissibility_terms(spec.box, spec.lam, spec.grad_bound)
    bound = min(terms.values())
    if not np.isfinite(bound):
        bound = spec.box.upper_min_nonzero
    return 0.9 * float(bound)


_SANITY_SAMPLES = 16


@dataclass(frozen=True)
class ProblemSpec:
    """One-sided sparse regression instance: loss, box, penalty weight and a
    certified bound on ``||grad f||_inf`` over the box."""

    loss: LossModel
    box: BoxSet
    lam: float
    grad_bound: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ConfigurationError(f"penalty weight lam must be positive, got {self.lam}")
        if not np.isfinite(self.grad_bound) or self.grad_bound < 0:
            raise ConfigurationError(
                f"grad_bound must be finite and nonnegative, got {self.grad_bound}"
            )
        if not self.box.is_one_sided:
            raise ConfigurationError(
                "ProblemSpec requires a one-sided box (lower == 0); "
                "reduce two-sided models through splitting first"
            )
        if self.loss.dim != self.box.dim:
            raise ConfigurationError(
                f"loss dimension {self.loss.dim} != box dimension {self.box.dim}"
            )
        self._check_grad_bound()

    def _check_grad_bound(self):
        # Sampled sanity check only; a grid cannot certify the bound but it
        # catches grossly misconfigured values at construction.
        rng = np.random.default_rng(0)
        pts = [self.box.lower, self.box.upper]
        span = self.box.upper - self.box.lower
        pts.extend(self.box.lower + span * rng.random(self.box.dim)
                   for _ in range(_SANITY_SAMPLES))
        worst = max(float(np.max(np.abs(self.loss.gradient(p)))) for p in pts)
        if worst > self.grad_bound * (1.0 + 1e-9) + 1e-12:
            raise ConfigurationError(
                f"grad_bound = {self.grad_bound:.6g} is below the sampled "
                f"gradient sup-norm {worst:.6g} on the box"
            )

    @property
    def dim(self) -> int:
        return self.box.dim

    def objective_smooth(self, x, mu: float) -> float:
        from .smoothing import theta_sum

        return self.loss.value(x) + self.lam * theta_sum(x, mu)

    def objective_true(self, x, mu_star: float) -> float:
        x = np.asarray(x, dtype=float)
        nnz = int(np.count_nonzero(np.abs(x) >= zero_tolerance(mu_star)))
        return self.loss.value(x) + self.lam * nnz


def quadratic_problem(A, b, lam, upper, grad_bound=None) -> ProblemSpec:
    """Convenience constructor for ``||Ax - b||^2 + lam ||x||_0`` on ``[0, upper]``.

    ``grad_bound`` defaults to :func:`estimate_grad_bound` with
    ``k = max(upper)``, which dominates the bound on any sub-box.
    """
    loss = QuadraticLoss(A, b)
    box = BoxSet.nonnegative(
        np.full(loss.dim, float(upper)) if np.isscalar(upper) else upper
    )
    if grad_bound is None:
        grad_bound = estimate_grad_bound(A, b, box.upper_max)
    return ProblemSpec(loss, box, float(lam), float(grad_bound))


class ScheduleKind(str, Enum):
    """Annealing law for the smoothing parameter."""

    POWER_LAW = "power-law"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class DynamicsParams:
    """Parameters of the annealed projection dynamics and its integrator."""

    mu_star: float
    gamma: float = 1.0
    alpha0: float = 1.0
    beta: float = 1.0
    schedule: ScheduleKind = ScheduleKind.POWER_LAW
    step: float = 0.01
    horizon: float = 50.0
    residual_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "schedule", ScheduleKind(self.schedule))
        for name in ("mu_star", "gamma", "alpha0", "beta", "step", "horizon"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.residual_tol < 0:
            raise ConfigurationError(f"residual_tol must be nonnegative, got {self.residual_tol}")

    @classmethod
    def for_problem(cls, spec: ProblemSpec, **overrides) -> "DynamicsParams":
        """Build parameters for ``spec``, filling ``mu_star`` and ``step``
        from the defaults and validating admissibility."""
        gamma = float(overrides.get("gamma", 1.0))
        overrides.setdefault("gamma", gamma)
        overrides.setdefault("step", 0.01 / gamma)
        overrides.setdefault("mu_star", default_mu_star(spec))
        params = cls(**overrides)
        check_mu_star(spec, params.mu_star)
        return params

    def with_overrides(self, **overrides) -> "DynamicsParams":
        return replace(self, **overrides)
