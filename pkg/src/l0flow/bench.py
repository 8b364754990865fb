"""Experiment generators, metrics and the seeded batch runner.

Four experiment families are built in:

* ``test-example`` -- a fixed 3x2 instance with a known global minimizer,
* ``cs`` -- noiseless compressed sensing on a two-sided box (solved by
  splitting), sensing matrix with orthonormal rows,
* ``vs`` -- noisy variable selection on a one-sided box,
* ``prostate`` -- subset selection on the vendored prostate cancer data
  (97 men, 8 standardized predictors, fixed 67/30 train/test split).

Desk-scale dimensions keep runs interactive; the original full-scale
dimensions remain available behind ``scale="paper"``.  All randomness goes
through ``numpy.random.default_rng(seed)`` (PCG64), so reports are
reproducible bit for bit across runs on the same platform.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .correction import solve_and_correct, support_indices
from .dynamics import Certificate
from .model import (
    BoxSet,
    ConfigurationError,
    DataError,
    DynamicsParams,
    ProblemSpec,
    QuadraticLoss,
    estimate_grad_bound,
    project_box,
)
from .splitting import TwoSidedSpec, solve_two_sided, split

THREADS_ENV = "L0FLOW_THREADS"

PROSTATE_FEATURES = (
    "lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45",
)
PROSTATE_TARGET_SUPPORT = (0, 1, 4)  # lcavol, lweight, svi


class ExperimentKind(str, Enum):
    TEST_EXAMPLE = "test-example"
    COMPRESSED_SENSING = "cs"
    VARIABLE_SELECTION = "vs"
    PROSTATE = "prostate"


# Protocol constants per experiment.  The annealing schedules mirror the
# originals; desk horizons were tuned once against the annealing drift
# budget and pinned (the off-support coordinates move at speed
# ~ gamma*lam*3/(2*mu(t)), which is dimension-free, so horizons do not
# shrink with the instance size).
_DIMS = {
    ExperimentKind.COMPRESSED_SENSING: {"desk": (256, 80, 8), "paper": (1000, 200, 10)},
    ExperimentKind.VARIABLE_SELECTION: {"desk": (384, 160, 16), "paper": (1500, 600, 50)},
}

_PROTOCOL = {
    ExperimentKind.TEST_EXAMPLE: dict(
        lam=1.0, gamma=1.0, alpha0=1.0, beta=1.0, step=0.01, horizon=10.0),
    ExperimentKind.COMPRESSED_SENSING: dict(
        lam=0.1, upper=5.0, gamma=1.0, alpha0=700.0, beta=0.1, step=0.25,
        horizon=2500.0),
    ExperimentKind.VARIABLE_SELECTION: dict(
        lam=1.0, upper=10.0, noise_scale=0.01, gamma=1.0, alpha0=700.0,
        beta=0.1, step=0.25, horizon={"desk": 300.0, "paper": 2500.0}),
    ExperimentKind.PROSTATE: dict(
        lam=2.0, upper=10.0, gamma=1.0, alpha0=20.0, beta=2.0, step=0.01,
        horizon=25.0),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One batch run: experiment family, dimensions, seeds and overrides."""

    kind: ExperimentKind
    n: int
    m: int
    sparsity: int
    seeds: tuple[int, ...]
    scale: str = "desk"
    noise_scale: float = 0.01
    multistart: bool = False
    data_seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.sparsity > self.n:
            raise ConfigurationError(
                f"sparsity {self.sparsity} exceeds dimension {self.n}"
            )
        if self.kind in _DIMS and self.m > self.n:
            raise ConfigurationError(
                f"sensing experiments need m <= n, got m={self.m}, n={self.n}"
            )

    @classmethod
    def default(cls, kind, seeds, scale: str = "desk", **overrides) -> "ExperimentConfig":
        kind = ExperimentKind(kind)
        if scale not in ("desk", "paper"):
            raise ConfigurationError(f"scale must be 'desk' or 'paper', got {scale!r}")
        n, m, sparsity = _DIMS.get(kind, {}).get(scale, (0, 0, 0))
        noise = _PROTOCOL[kind].get("noise_scale", 0.01)
        multistart = overrides.pop("multistart", False)
        data_seed = overrides.pop("data_seed", 0)
        return cls(kind=kind, n=n, m=m, sparsity=sparsity,
                   seeds=tuple(seeds), scale=scale, noise_scale=noise,
                   multistart=multistart, data_seed=data_seed,
                   overrides=overrides)


def experiment_defaults(kind) -> dict:
    """Protocol constants for an experiment family (JSON-friendly)."""
    kind = ExperimentKind(kind)
    out = dict(_PROTOCOL[kind])
    horizon = out.get("horizon")
    if isinstance(horizon, dict):
        out["horizon"] = dict(horizon)
    if kind in _DIMS:
        out["dims"] = {s: dict(zip(("n", "m", "sparsity"), v))
                       for s, v in _DIMS[kind].items()}
    return out


def _orthonormal_rows(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    K = rng.standard_normal((n, m))
    Q, _ = np.linalg.qr(K)
    return Q.T


def gen_compressed_sensing(
    n: int, m: int, sparsity: int, seed: int, *,
    upper: float = 5.0, lam: float = 0.1,
) -> tuple[TwoSidedSpec, np.ndarray]:
    """Noiseless sensing instance: ``A`` is m x n with orthonormal rows, the
    signal has ``sparsity`` standard-normal entries on a random support and
    ``b = A s`` exactly.  The feasible set is ``[-upper, upper]^n``."""
    if m >= n:
        raise ConfigurationError(f"need m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    A = _orthonormal_rows(n, m, rng)
    support = rng.permutation(n)[:sparsity]
    s = np.zeros(n)
    s[support] = rng.standard_normal(sparsity)
    b = A @ s
    bounds = np.full(n, float(upper))
    return TwoSidedSpec(QuadraticLoss(A, b), bounds, bounds, lam), s


def gen_variable_selection(
    n: int, m: int, sparsity: int, noise_scale: float, seed: int, *,
    upper: float = 10.0, lam: float = 1.0,
) -> tuple[ProblemSpec, np.ndarray]:
    """Noisy selection instance on ``[0, upper]^n``: support amplitudes are
    uniform on ``[1, 10]`` and ``b = A s + noise_scale * N(0, I)``."""
    if m >= n:
        raise ConfigurationError(f"need m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    A = _orthonormal_rows(n, m, rng)
    support = rng.permutation(n)[:sparsity]
    s = np.zeros(n)
    s[support] = rng.uniform(1.0, 10.0, sparsity)
    b = A @ s + noise_scale * rng.standard_normal(m)
    box = BoxSet.nonnegative(np.full(n, float(upper)))
    grad_bound = estimate_grad_bound(A, b, float(upper))
    return ProblemSpec(QuadraticLoss(A, b), box, lam, grad_bound), s


def test_example_spec() -> ProblemSpec:
    """The fixed 3x2 instance with global minimizer ``(0, 23/38)``."""
    A = np.array([[1.0, 3.0], [3.0, 2.0], [1.0, 5.0]])
    b = np.array([2.0, 1.0, 3.0])
    box = BoxSet.nonnegative(np.array([5.0, 5.0]))
    grad_bound = estimate_grad_bound(A, b, 5.0)
    return ProblemSpec(QuadraticLoss(A, b), box, 1.0, grad_bound)


TEST_EXAMPLE_MINIMIZER = np.array([0.0, 23.0 / 38.0])


def _prostate_path():
    return resources.files("l0flow").joinpath("data/prostate.csv")


def load_prostate(path=None):
    """Load the prostate data and split by its train flag.

    Predictors are standardized to zero mean and unit variance using
    training-set statistics; the response is centered on the training mean.

    Returns
    -------
    (A_train, b_train), (A_test, b_test), feature_names
    """
    if path is None:
        path = _prostate_path()
    rows = []
    with open(path) as f:
        header = f.readline().strip().split(",")
        expected = list(PROSTATE_FEATURES) + ["lpsa", "train"]
        if header != expected:
            raise DataError(f"unexpected CSV header {header!r}")
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(expected):
                raise DataError(f"row {lineno}: expected {len(expected)} fields, "
                                f"got {len(parts)}")
            flag = parts[-1].strip()
            if flag not in ("T", "F"):
                raise DataError(f"row {lineno}: train flag must be T or F, got {flag!r}")
            try:
                vals = [float(p) for p in parts[:-1]]
            except ValueError as exc:
                raise DataError(f"row {lineno}: {exc}") from None
            rows.append((vals, flag == "T"))
    data = np.array([v for v, _ in rows])
    train = np.array([t for _, t in rows])
    X, y = data[:, :-1], data[:, -1]
    mean = X[train].mean(axis=0)
    std = X[train].std(axis=0)
    if np.any(std == 0):
        raise DataError("a predictor is constant on the training split")
    Xs = (X - mean) / std
    yc = y - y[train].mean()
    return ((Xs[train], yc[train]), (Xs[~train], yc[~train]),
            list(PROSTATE_FEATURES))


def prostate_spec(path=None):
    """Two-sided subset-selection instance on the training split, plus the
    held-out test pair for prediction error."""
    (A_tr, b_tr), (A_te, b_te), names = load_prostate(path)
    proto = _PROTOCOL[ExperimentKind.PROSTATE]
    bounds = np.full(A_tr.shape[1], proto["upper"])
    spec = TwoSidedSpec(QuadraticLoss(A_tr, b_tr), bounds, bounds, proto["lam"])
    return spec, (A_te, b_te), names


def mse(x, s) -> float:
    """Mean squared error ``||x - s||^2 / n`` against the true signal."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != s.shape:
        raise ConfigurationError(f"shape mismatch {x.shape} vs {s.shape}")
    d = x - s
    return float(d @ d) / x.size


@dataclass(frozen=True)
class Metrics:
    """Per-run quality summary."""

    mse: float
    support_recovered: bool
    objective: float
    wall_time: float


def _params_for(kind: ExperimentKind, problem: ProblemSpec, scale: str,
                overrides: dict) -> DynamicsParams:
    proto = _PROTOCOL[kind]
    horizon = proto["horizon"]
    if isinstance(horizon, dict):
        horizon = horizon[scale]
    base = dict(gamma=proto["gamma"], alpha0=proto["alpha0"],
                beta=proto["beta"], step=proto["step"], horizon=horizon)
    base.update(overrides)
    return DynamicsParams.for_problem(problem, **base)


def _run_seed(config: ExperimentConfig, seed: int, shared) -> dict:
    kind = config.kind
    t0 = time.perf_counter()

    if kind is ExperimentKind.TEST_EXAMPLE:
        spec = shared["spec"]
        params = _params_for(kind, spec, config.scale, config.overrides)
        rng = np.random.default_rng(seed)
        x0 = spec.box.lower + (spec.box.upper - spec.box.lower) * rng.random(spec.dim)
        report = solve_and_correct(spec, params, x0)
        x = report.final_x
        x_raw = report.precorrection_x if report.precorrection_x is not None else x
        support = report.support
        run_mse = mse(x, TEST_EXAMPLE_MINIMIZER)
        raw_mse = mse(x_raw, TEST_EXAMPLE_MINIMIZER)
        recovered = support == (1,)
    elif kind is ExperimentKind.COMPRESSED_SENSING:
        data_seed = config.data_seed if config.multistart else seed
        two, s = shared["instance"](data_seed)
        problem = split(two)
        params = _params_for(kind, problem, config.scale, config.overrides)
        if config.multistart:
            rng = np.random.default_rng(seed)
            x0 = rng.uniform(0.0, 1.0, 2 * two.dim)
        else:
            x0 = np.minimum(np.ones(2 * two.dim), problem.box.upper)
        solution = solve_two_sided(two, params, x0)
        report = solution.report
        x = solution.y
        x_raw = report.precorrection_x
        y_raw = x if x_raw is None else x_raw[:two.dim] - x_raw[two.dim:]
        support = solution.support
        run_mse = mse(x, s)
        raw_mse = mse(y_raw, s)
        recovered = set(support) == set(np.flatnonzero(s).tolist())
    elif kind is ExperimentKind.VARIABLE_SELECTION:
        spec, s = shared["instance"](seed)
        params = _params_for(kind, spec, config.scale, config.overrides)
        x0 = np.minimum(np.ones(spec.dim), spec.box.upper)
        report = solve_and_correct(spec, params, x0)
        x = report.final_x
        x_raw = report.precorrection_x if report.precorrection_x is not None else x
        support = report.support
        run_mse = mse(x, s)
        raw_mse = mse(x_raw, s)
        recovered = set(support) == set(np.flatnonzero(s).tolist())
    elif kind is ExperimentKind.PROSTATE:
        two, (A_te, b_te), _names = shared["prostate"]
        params = _params_for(kind, split(two), config.scale, config.overrides)
        x0 = np.minimum(np.ones(2 * two.dim), np.concatenate([two.upper, two.lower_mag]))
        solution = solve_two_sided(two, params, x0)
        report = solution.report
        x = solution.y
        support = solution.support
        resid = A_te @ x - b_te
        run_mse = float(resid @ resid) / b_te.size  # held-out prediction error
        raw_mse = run_mse
        recovered = support == PROSTATE_TARGET_SUPPORT
    else:  # pragma: no cover
        raise ConfigurationError(f"unknown experiment kind {kind}")

    wall_ms = (time.perf_counter() - t0) * 1e3
    return {
        "seed": seed,
        "mse": run_mse,
        "mse_raw": raw_mse,
        "support": list(support),
        "support_recovered": bool(recovered),
        "objective": report.objective_true,
        "certificate": report.certificate.value,
        "wall_ms": wall_ms,
        "x": [float(v) for v in x],
    }


def _shared_inputs(config: ExperimentConfig) -> dict:
    kind = config.kind
    if kind is ExperimentKind.TEST_EXAMPLE:
        return {"spec": test_example_spec()}
    if kind is ExperimentKind.COMPRESSED_SENSING:
        proto = _PROTOCOL[kind]
        return {"instance": lambda seed: gen_compressed_sensing(
            config.n, config.m, config.sparsity, seed,
            upper=proto["upper"], lam=proto["lam"])}
    if kind is ExperimentKind.VARIABLE_SELECTION:
        proto = _PROTOCOL[kind]
        return {"instance": lambda seed: gen_variable_selection(
            config.n, config.m, config.sparsity, config.noise_scale, seed,
            upper=proto["upper"], lam=proto["lam"])}
    if kind is ExperimentKind.PROSTATE:
        return {"prostate": prostate_spec()}
    raise ConfigurationError(f"unknown experiment kind {kind}")


def _worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def run_experiment(config: ExperimentConfig) -> dict:
    """Run every seed, aggregate, and return the JSON-ready report.

    Individual seed failures are recorded in the per-seed block and the run
    continues; aggregates cover the successful seeds.
    """
    shared = _shared_inputs(config)

    def guarded(seed):
        try:
            return _run_seed(config, seed, shared)
        except Exception as exc:  # noqa: BLE001 - per-seed isolation
            return {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}

    workers = _worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(guarded, config.seeds))
    else:
        per_seed = [guarded(seed) for seed in config.seeds]

    ok = [r for r in per_seed if "error" not in r]
    mses = [r["mse"] for r in ok]
    walls = [r["wall_ms"] for r in ok]
    aggregate = {
        "mean_mse": float(np.mean(mses)) if mses else None,
        "max_mse": float(np.max(mses)) if mses else None,
        "min_mse": float(np.min(mses)) if mses else None,
        "mean_ms": float(np.mean(walls)) if walls else None,
        "max_ms": float(np.max(walls)) if walls else None,
        "min_ms": float(np.min(walls)) if walls else None,
    }
    return {
        "config": {
            "kind": config.kind.value,
            "n": config.n,
            "m": config.m,
            "sparsity": config.sparsity,
            "seeds": list(config.seeds),
            "scale": config.scale,
            "noise_scale": config.noise_scale,
            "multistart": config.multistart,
            "data_seed": config.data_seed,
            "overrides": dict(config.overrides),
        },
        "per_seed": per_seed,
        "aggregate": aggregate,
    }


def write_report(report: dict, path) -> None:
    with open(path, "w") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
