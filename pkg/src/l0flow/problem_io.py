"""Problem files: dense JSON instances for the CLI and scripting.

Schema::

    {
      "A": [[...], ...],        # row-major m x n matrix
      "b": [...],               # length m
      "lambda": number,         # penalty weight
      "upper": [...] or k,      # box upper bounds (scalar broadcasts)
      "lower": [...]            # optional: two-sided magnitudes
    }

Without ``"lower"`` the instance is the one-sided model on ``[0, upper]``;
with it, the two-sided model on ``[-lower, upper]`` to be reduced by
splitting.
"""

from __future__ import annotations

import json

import numpy as np

from .model import (
    BoxSet,
    ConfigurationError,
    DataError,
    ProblemSpec,
    QuadraticLoss,
    estimate_grad_bound,
)
from .splitting import TwoSidedSpec


def _field(obj: dict, name: str):
    if name not in obj:
        raise ConfigurationError(f"problem file is missing field {name!r}")
    return obj[name]


def _vector(obj, name: str, length: int | None = None) -> np.ndarray:
    try:
        v = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"field {name!r} is not numeric: {exc}") from None
    if v.ndim != 1:
        raise ConfigurationError(f"field {name!r} must be a flat array, got shape {v.shape}")
    if length is not None and v.size != length:
        raise ConfigurationError(
            f"field {name!r} has length {v.size}, expected {length}"
        )
    return v


def load_problem(path) -> ProblemSpec | TwoSidedSpec:
    """Parse a problem JSON file.

    Raises ``DataError`` with line/column context for malformed JSON and
    ``ConfigurationError`` naming the offending field for schema problems.
    """
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    if not isinstance(obj, dict):
        raise ConfigurationError("problem file must contain a JSON object")

    raw_a = _field(obj, "A")
    try:
        A = np.asarray(raw_a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"field 'A' is not a numeric matrix: {exc}") from None
    if A.ndim != 2:
        raise ConfigurationError(f"field 'A' must be a matrix, got shape {A.shape}")
    m, n = A.shape
    b = _vector(_field(obj, "b"), "b", m)

    lam = _field(obj, "lambda")
    if not isinstance(lam, (int, float)) or lam <= 0:
        raise ConfigurationError(f"field 'lambda' must be a positive number, got {lam!r}")

    raw_upper = _field(obj, "upper")
    if isinstance(raw_upper, (int, float)):
        upper = np.full(n, float(raw_upper))
    else:
        upper = _vector(raw_upper, "upper", n)
    if np.any(upper < 0):
        raise ConfigurationError("field 'upper' must be nonnegative")

    loss = QuadraticLoss(A, b)
    if "lower" in obj:
        lower = _vector(obj["lower"], "lower", n)
        if np.any(lower < 0):
            raise ConfigurationError(
                "field 'lower' holds bound magnitudes and must be nonnegative"
            )
        return TwoSidedSpec(loss, lower, upper, float(lam))

    k = float(np.max(upper)) if upper.size else 0.0
    if k <= 0:
        raise ConfigurationError("field 'upper' must have a positive entry")
    grad_bound = estimate_grad_bound(A, b, k)
    return ProblemSpec(loss, BoxSet.nonnegative(upper), float(lam), grad_bound)
