"""Annealed projection-gradient dynamics and its fixed-step integrator.

The state follows

    dx/dt = gamma * (-x + P_box[x - grad f(x) - lam * grad_x Theta(x, mu(t))])

where ``Theta`` is the smoothed cardinality penalty and ``mu(t)`` anneals
from ``(alpha0 + mu_star) / 2`` down to ``mu_star / 2``.  Time stepping is
classical four-stage Runge-Kutta with a post-step clamp onto the box, so
iterates are feasible by construction.

Convergence is declared when the projected-stationarity residual measured
at the limiting parameter ``mu_star / 2`` drops below ``residual_tol``
while the state has also stopped moving (the residual at the current
``mu(t)``, which equals ``||dx/dt||_inf / gamma``, is below tolerance
too).  The second condition matters on split problems, whose trajectories
pass through dense least-squares equilibria that are limit-stationary but
still drifting.  Otherwise the run stops at the horizon and is marked
accordingly.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .model import (
    ConfigurationError,
    DynamicsParams,
    ProblemSpec,
    ScheduleKind,
    check_mu_star,
    project_box,
    zero_tolerance,
)
from .smoothing import mu_gradient_bound, theta_sum, theta_sum_grad_x


class NumericalDivergenceError(RuntimeError):
    """Nonfinite state encountered while integrating."""

    def __init__(self, t: float, last_state: "SolverState"):
        super().__init__(f"nonfinite state at t = {t:.6g}")
        self.t = t
        self.last_state = last_state


class Certificate(str, Enum):
    CERTIFIED_LOCAL_MIN = "CertifiedLocalMin"
    NEEDS_CORRECTION = "NeedsCorrection"
    MAX_HORIZON = "MaxHorizon"


@dataclass(frozen=True)
class MuSchedule:
    """Closed-form annealing law ``mu(t) = (alpha(t) + mu_star) / 2`` with
    ``alpha(t) = alpha0 / (1 + t)^beta`` or ``alpha0 * exp(-beta t)``."""

    kind: ScheduleKind
    alpha0: float
    beta: float
    mu_star: float

    @classmethod
    def from_params(cls, params: DynamicsParams) -> "MuSchedule":
        return cls(params.schedule, params.alpha0, params.beta, params.mu_star)

    def mu_at(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"schedule time must be nonnegative, got {t}")
        if self.kind is ScheduleKind.POWER_LAW:
            alpha = self.alpha0 / (1.0 + t) ** self.beta
        else:
            alpha = self.alpha0 * np.exp(-self.beta * t)
        return 0.5 * (alpha + self.mu_star)


def mu_at(schedule: MuSchedule, t: float) -> float:
    """Annealing value at time ``t``."""
    return schedule.mu_at(t)


@dataclass(frozen=True)
class SolverState:
    """One trajectory point: time, iterate, current ``mu`` and the
    stationarity residual at the limiting ``mu_star / 2``."""

    t: float
    x: np.ndarray
    mu: float
    residual: float


@dataclass(frozen=True)
class SolveReport:
    """Solve outcome: final point, certification status and trajectory stats."""

    final_x: np.ndarray
    final_residual: float
    objective_smooth: float
    objective_true: float
    support: tuple[int, ...]
    iterations: int
    trajectory_samples: list[tuple[float, float, float]]
    certificate: Certificate
    mu_star: float
    merit_violations: int = 0
    precorrection_x: np.ndarray | None = None


def stationarity_residual(spec: ProblemSpec, x, mu: float) -> float:
    """Sup-norm of ``x - P_box[x - grad f(x) - lam grad_x Theta(x, mu)]``;
    zero exactly at stationary points of the smoothed problem at ``mu``."""
    x = np.asarray(x, dtype=float)
    g = spec.loss.gradient(x) + spec.lam * theta_sum_grad_x(x, mu)
    return float(np.max(np.abs(x - project_box(x - g, spec.box))))


def rhs(spec: ProblemSpec, params: DynamicsParams, x, t: float) -> np.ndarray:
    """Right-hand side of the dynamics at state ``x`` and time ``t``."""
    schedule = MuSchedule.from_params(params)
    return _rhs(spec, params.gamma, spec.lam, schedule, np.asarray(x, dtype=float), t)


def _rhs(spec, gamma, lam, schedule, x, t):
    mu = schedule.mu_at(t)
    g = spec.loss.gradient(x) + lam * theta_sum_grad_x(x, mu)
    return gamma * (project_box(x - g, spec.box) - x)


def step(spec: ProblemSpec, params: DynamicsParams, state: SolverState) -> SolverState:
    """Advance one RK4 step of size ``params.step`` and re-project onto the box."""
    schedule = MuSchedule.from_params(params)
    return _step(spec, params, schedule, state)[0]


def _residuals(spec, lam, mu_star, schedule, x, t):
    """Stationarity residuals at the limiting ``mu_star/2`` and at ``mu(t)``,
    sharing one loss-gradient evaluation."""
    g = spec.loss.gradient(x)
    g_lim = g + lam * theta_sum_grad_x(x, 0.5 * mu_star)
    r_lim = float(np.max(np.abs(x - project_box(x - g_lim, spec.box))))
    g_cur = g + lam * theta_sum_grad_x(x, schedule.mu_at(t))
    r_cur = float(np.max(np.abs(x - project_box(x - g_cur, spec.box))))
    return r_lim, r_cur


def _step(spec, params, schedule, state):
    h = params.step
    gamma, lam = params.gamma, spec.lam
    t, x = state.t, state.x
    k1 = _rhs(spec, gamma, lam, schedule, x, t)
    k2 = _rhs(spec, gamma, lam, schedule, x + 0.5 * h * k1, t + 0.5 * h)
    k3 = _rhs(spec, gamma, lam, schedule, x + 0.5 * h * k2, t + 0.5 * h)
    k4 = _rhs(spec, gamma, lam, schedule, x + h * k3, t + h)
    x_new = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_new)):
        raise NumericalDivergenceError(t, state)
    x_new = project_box(x_new, spec.box)
    t_new = t + h
    r_lim, r_cur = _residuals(spec, lam, params.mu_star, schedule, x_new, t_new)
    state_new = SolverState(t=t_new, x=x_new, mu=schedule.mu_at(t_new),
                            residual=r_lim)
    return state_new, r_cur


def _support(x, mu_star) -> tuple[int, ...]:
    return tuple(np.flatnonzero(np.abs(x) >= zero_tolerance(mu_star)).tolist())


def solve(
    spec: ProblemSpec,
    params: DynamicsParams,
    x0,
    *,
    sample_stride: int | None = None,
    traj_path=None,
) -> SolveReport:
    """Integrate the dynamics from ``x0`` until the residual at the limiting
    ``mu_star / 2`` drops below ``residual_tol`` or time reaches the horizon.

    Parameters
    ----------
    sample_stride : int, optional
        Record a trajectory sample every ``sample_stride`` steps (default:
        about 200 samples over the run).
    traj_path : str or path, optional
        Stream sampled rows ``t, objective_smooth, residual, mu`` to a CSV.

    Returns
    -------
    SolveReport
        Certificate is ``MAX_HORIZON`` when the horizon was exhausted before
        residual convergence, otherwise the certification verdict of the
        final point.
    """
    check_mu_star(spec, params.mu_star)
    schedule = MuSchedule.from_params(params)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ConfigurationError(
            f"x0 has shape {x0.shape}, expected ({spec.dim},)"
        )
    if not spec.box.contains(x0):
        warnings.warn("initial point outside the box; projecting onto it",
                      stacklevel=2)
        x0 = project_box(x0, spec.box)

    h = params.step
    n_steps = max(0, int(np.ceil(params.horizon / h - 1e-9)))
    if sample_stride is None:
        sample_stride = max(1, n_steps // 200)

    # Merit diagnostic: f + lam*Theta(x, mu) + lam*rho_hat*mu must not
    # increase along the flow; discretization may break this transiently,
    # so violations are counted and reported as a warning, not an error.
    rho_hat = mu_gradient_bound(spec.box.upper, 0.5 * params.mu_star)

    def merit(x, mu):
        return spec.loss.value(x) + spec.lam * theta_sum(x, mu) \
            + spec.lam * rho_hat * mu

    r_lim, r_cur = _residuals(spec, spec.lam, params.mu_star, schedule, x0, 0.0)
    state = SolverState(t=0.0, x=x0, mu=schedule.mu_at(0.0), residual=r_lim)
    samples: list[tuple[float, float, float]] = []
    writer = None
    traj_file = None
    if traj_path is not None:
        traj_file = open(traj_path, "w", newline="")
        writer = csv.writer(traj_file)
        writer.writerow(["t", "objective_smooth", "residual", "mu"])

    def record(st: SolverState):
        obj = spec.loss.value(st.x) + spec.lam * theta_sum(st.x, st.mu)
        samples.append((st.t, obj, st.residual))
        if writer is not None:
            writer.writerow([st.t, obj, st.residual, st.mu])

    merit_violations = 0
    iterations = 0
    converged = r_lim <= params.residual_tol and r_cur <= params.residual_tol
    try:
        record(state)
        prev_merit = merit(state.x, state.mu)
        for k in range(1, n_steps + 1):
            if converged:
                break
            state, r_cur = _step(spec, params, schedule, state)
            state = replace(state, t=k * h)  # exact time, no accumulation drift
            iterations += 1
            converged = (state.residual <= params.residual_tol
                         and r_cur <= params.residual_tol)
            cur_merit = merit(state.x, state.mu)
            if cur_merit > prev_merit + 1e-8 * max(1.0, abs(prev_merit)):
                merit_violations += 1
            prev_merit = cur_merit
            if iterations % sample_stride == 0:
                record(state)
        if samples[-1][0] != state.t:
            record(state)
    finally:
        if traj_file is not None:
            traj_file.close()

    if merit_violations:
        warnings.warn(
            f"merit decreased non-monotonically on {merit_violations} steps; "
            "consider a smaller step size",
            stacklevel=2,
        )

    if converged:
        from .correction import certify_local_min

        certificate = certify_local_min(spec, state.x, params.mu_star,
                                        params.residual_tol)
    else:
        certificate = Certificate.MAX_HORIZON

    return SolveReport(
        final_x=state.x,
        final_residual=state.residual,
        objective_smooth=spec.loss.value(state.x)
        + spec.lam * theta_sum(state.x, state.mu),
        objective_true=spec.objective_true(state.x, params.mu_star),
        support=_support(state.x, params.mu_star),
        iterations=iterations,
        trajectory_samples=samples,
        certificate=certificate,
        mu_star=params.mu_star,
        merit_violations=merit_violations,
    )
