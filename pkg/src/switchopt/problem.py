"""Switched optimal control problem definition and schedule simulation.

A switched problem is a family of ``M`` vector fields ``f_k(t, x, u)`` with
per-mode running costs ``l_k(t, x, u)``, a shared terminal cost
``K(t0, x0, tf, xf)``, a fixed horizon, a fixed initial state, and box
bounds on controls and (optionally) states.  A candidate solution is a
switching schedule: a finite mode sequence with strictly increasing
switching times plus a piecewise control description.

Evaluator contract
------------------
Dynamics and running-cost callbacks take ``(t, x, u)``.  When the problem
is constructed with ``batched=True`` (the default for the built-in
benchmarks) the callbacks must also accept a leading batch axis:
``t`` of shape ``(J,)``, ``x`` of ``(J, n)``, ``u`` of ``(J, m)``,
returning ``(J, n)`` / ``(J,)``.  Non-batched callbacks are supported with
``batched=False`` and are looped over internally.  Evaluators must be pure
(no internal mutable state): downstream code evaluates them concurrently
across collocation nodes.

Analytic Jacobians are optional; central finite differences with step
``1e-6 * (1 + |value|)`` are used when they are absent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DivergenceError

FD_STEP = 1e-6


@dataclass(frozen=True)
class SwitchedProblem:
    """Data of a multi-mode switched optimal control problem.

    ``dynamics[k]`` and ``running_costs[k]`` define mode ``k``; all modes
    share the state dimension ``state_dim`` and the per-mode control
    dimension ``control_dim`` (which may be zero when the mode index is the
    only decision).  ``terminal_cost`` may be ``None`` for a pure Lagrange
    cost.  Optional ``*_jac_*`` / ``*_grad_*`` entries provide analytic
    derivatives with the same batching convention as the evaluators.
    """

    mode_count: int
    state_dim: int
    control_dim: int
    dynamics: Sequence[Callable]
    running_costs: Sequence[Callable]
    t0: float
    tf: float
    x0: np.ndarray
    terminal_cost: Optional[Callable] = None
    control_bounds: Optional[tuple] = None
    state_bounds: Optional[tuple] = None
    dynamics_jac_x: Optional[Sequence[Callable]] = None
    dynamics_jac_u: Optional[Sequence[Callable]] = None
    running_cost_grad_x: Optional[Sequence[Callable]] = None
    running_cost_grad_u: Optional[Sequence[Callable]] = None
    terminal_cost_grad: Optional[Callable] = None
    batched: bool = False
    x_target: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.x_target is not None:
            object.__setattr__(self, "x_target", np.asarray(self.x_target, dtype=float))


@dataclass
class SwitchSchedule:
    """Mode sequence with switching times and optional piecewise controls.

    ``times`` has one more entry than ``modes``; interval ``k`` is
    ``[times[k], times[k+1])`` with active mode ``modes[k]``.  ``controls``
    is ``None`` for control-free problems, otherwise one entry per interval:
    a constant array of length ``control_dim`` or a callable ``u(t)``.
    """

    modes: list
    times: np.ndarray
    controls: Optional[list] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.modes = [int(q) for q in self.modes]

    @property
    def interval_count(self) -> int:
        return len(self.modes)

    def mode_at(self, t: float) -> int:
        """Active mode at time ``t`` (right-open intervals)."""
        idx = int(np.searchsorted(self.times, t, side="right") - 1)
        return self.modes[min(max(idx, 0), len(self.modes) - 1)]

    def control_at(self, k: int, t: float, control_dim: int) -> np.ndarray:
        if self.controls is None:
            return np.zeros(control_dim)
        entry = self.controls[k]
        if entry is None:
            return np.zeros(control_dim)
        if callable(entry):
            return np.atleast_1d(np.asarray(entry(t), dtype=float))
        return np.asarray(entry, dtype=float)


def validate(problem: SwitchedProblem) -> list:
    """Structural diagnostics; an empty list means the problem is usable."""
    diags = []
    if problem.mode_count < 2:
        diags.append("need at least two modes to define a switching problem")
    if not problem.t0 < problem.tf:
        diags.append(f"degenerate horizon: t0={problem.t0} must be < tf={problem.tf}")
    if len(problem.dynamics) != problem.mode_count:
        diags.append(
            f"expected {problem.mode_count} dynamics evaluators, "
            f"got {len(problem.dynamics)}"
        )
    if len(problem.running_costs) != problem.mode_count:
        diags.append(
            f"expected {problem.mode_count} running-cost evaluators, "
            f"got {len(problem.running_costs)}"
        )
    if problem.x0.shape != (problem.state_dim,):
        diags.append(
            f"x0 has shape {problem.x0.shape}, expected ({problem.state_dim},)"
        )
    if problem.control_dim > 0 and problem.control_bounds is None:
        diags.append("control_bounds required when control_dim > 0")
    if problem.control_bounds is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in problem.control_bounds)
        if lo.shape != (problem.control_dim,) or hi.shape != (problem.control_dim,):
            diags.append("control_bounds must have one [lo, hi] pair per component")
        elif np.any(lo > hi):
            diags.append("control_bounds has lo > hi")
    if problem.state_bounds is not None:
        lo, hi = (np.asarray(v, dtype=float) for v in problem.state_bounds)
        if lo.shape != (problem.state_dim,) or hi.shape != (problem.state_dim,):
            diags.append("state_bounds must have one [lo, hi] pair per component")
        elif problem.x0.shape == (problem.state_dim,) and (
            np.any(problem.x0 < lo) or np.any(problem.x0 > hi)
        ):
            diags.append("x0 violates state_bounds")
    return diags


def validate_schedule(problem: SwitchedProblem, schedule: SwitchSchedule) -> list:
    """Diagnostics for a schedule against its problem."""
    diags = []
    t = schedule.times
    if len(t) != len(schedule.modes) + 1:
        diags.append("times must have exactly one more entry than modes")
        return diags
    if not np.all(np.diff(t) > 0):
        diags.append("switching times must be strictly increasing")
    if abs(t[0] - problem.t0) > 1e-12 or abs(t[-1] - problem.tf) > 1e-12:
        diags.append("schedule must span exactly [t0, tf]")
    if any(q < 0 or q >= problem.mode_count for q in schedule.modes):
        diags.append("schedule contains a mode index outside the valid set")
    return diags


# ---------------------------------------------------------------------------
# Mode evaluation with batching and finite-difference derivative fallbacks
# ---------------------------------------------------------------------------


def eval_dynamics(problem: SwitchedProblem, k: int, t, x, u) -> np.ndarray:
    """Batched ``f_k`` evaluation; loops when the problem is not batched."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.asarray(problem.dynamics[k](t, x, u), dtype=float)
    if problem.batched:
        return np.asarray(problem.dynamics[k](t, x, u), dtype=float)
    out = np.empty_like(x)
    for j in range(x.shape[0]):
        out[j] = problem.dynamics[k](t[j], x[j], u[j])
    return out


def eval_running_cost(problem: SwitchedProblem, k: int, t, x, u):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(problem.running_costs[k](t, x, u))
    if problem.batched:
        return np.asarray(problem.running_costs[k](t, x, u), dtype=float)
    return np.array(
        [problem.running_costs[k](t[j], x[j], u[j]) for j in range(x.shape[0])]
    )


def _fd_steps(values: np.ndarray) -> np.ndarray:
    return FD_STEP * (1.0 + np.abs(values))


def dynamics_jac_x(problem: SwitchedProblem, k: int, t, x, u) -> np.ndarray:
    """State Jacobian of mode ``k``: batched shape ``(J, n, n)`` or ``(n, n)``."""
    if problem.dynamics_jac_x is not None:
        jac = problem.dynamics_jac_x[k]
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 1 or problem.batched:
            return np.asarray(jac(t, x, u), dtype=float)
        return np.stack([jac(t[j], x_arr[j], u[j]) for j in range(x_arr.shape[0])])
    return _fd_jac(lambda xx: eval_dynamics(problem, k, t, xx, u), x)


def dynamics_jac_u(problem: SwitchedProblem, k: int, t, x, u) -> np.ndarray:
    if problem.dynamics_jac_u is not None:
        jac = problem.dynamics_jac_u[k]
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 1 or problem.batched:
            return np.asarray(jac(t, x, u), dtype=float)
        return np.stack([jac(t[j], x_arr[j], u[j]) for j in range(x_arr.shape[0])])
    return _fd_jac(lambda uu: eval_dynamics(problem, k, t, x, uu), u)


def running_cost_grad_x(problem: SwitchedProblem, k: int, t, x, u) -> np.ndarray:
    if problem.running_cost_grad_x is not None:
        g = problem.running_cost_grad_x[k]
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 1 or problem.batched:
            return np.asarray(g(t, x, u), dtype=float)
        return np.stack([g(t[j], x_arr[j], u[j]) for j in range(x_arr.shape[0])])
    return _fd_grad(lambda xx: eval_running_cost(problem, k, t, xx, u), x)


def running_cost_grad_u(problem: SwitchedProblem, k: int, t, x, u) -> np.ndarray:
    if problem.running_cost_grad_u is not None:
        g = problem.running_cost_grad_u[k]
        x_arr = np.asarray(x, dtype=float)
        if x_arr.ndim == 1 or problem.batched:
            return np.asarray(g(t, x, u), dtype=float)
        return np.stack([g(t[j], x_arr[j], u[j]) for j in range(x_arr.shape[0])])
    return _fd_grad(lambda uu: eval_running_cost(problem, k, t, x, uu), u)


def terminal_cost_grad(problem: SwitchedProblem, xf: np.ndarray) -> np.ndarray:
    """Gradient of the terminal cost with respect to the final state."""
    if problem.terminal_cost is None:
        return np.zeros(problem.state_dim)
    if problem.terminal_cost_grad is not None:
        return np.asarray(problem.terminal_cost_grad(xf), dtype=float)
    K = problem.terminal_cost

    def scalar(xx):
        return K(problem.t0, problem.x0, problem.tf, xx)

    return _fd_grad(scalar, np.asarray(xf, dtype=float))


def _fd_jac(fn, arg) -> np.ndarray:
    """Central-difference Jacobian of a vector map over its last axis."""
    arg = np.asarray(arg, dtype=float)
    base = np.asarray(fn(arg), dtype=float)
    if arg.shape[-1] == 0:
        return np.zeros(base.shape + (0,))
    steps = _fd_steps(arg)
    cols = []
    for i in range(arg.shape[-1]):
        hi = arg.copy()
        lo = arg.copy()
        hi[..., i] += steps[..., i]
        lo[..., i] -= steps[..., i]
        denom = hi[..., i] - lo[..., i]
        diff = np.asarray(fn(hi), dtype=float) - np.asarray(fn(lo), dtype=float)
        cols.append(diff / (denom[..., None] if arg.ndim > 1 else denom))
    return np.stack(cols, axis=-1)


def _fd_grad(fn, arg) -> np.ndarray:
    """Central-difference gradient of a scalar map over its last axis."""
    arg = np.asarray(arg, dtype=float)
    steps = _fd_steps(arg)
    out = np.empty_like(arg)
    for i in range(arg.shape[-1]):
        hi = arg.copy()
        lo = arg.copy()
        hi[..., i] += steps[..., i]
        lo[..., i] -= steps[..., i]
        out[..., i] = (np.asarray(fn(hi)) - np.asarray(fn(lo))) / (
            hi[..., i] - lo[..., i]
        )
    return out


# ---------------------------------------------------------------------------
# Fixed-step RK4 simulation and cost quadrature
# ---------------------------------------------------------------------------


def rk4_step(f, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def simulate_schedule(
    problem: SwitchedProblem,
    schedule: SwitchSchedule,
    steps_per_interval: int = 100,
    dt: float | None = None,
):
    """RK4 trajectory under a schedule.

    Integrates each switching interval on its own uniform sub-grid:
    ``steps_per_interval`` steps, or ``ceil(length / dt)`` steps when ``dt``
    is given.  Returns ``(times, states)`` with boundary points deduplicated.
    """
    n = problem.state_dim
    x = problem.x0.copy()
    all_t = [problem.t0]
    all_x = [x.copy()]
    for k, q in enumerate(schedule.modes):
        ta, tb = schedule.times[k], schedule.times[k + 1]
        steps = (
            max(1, int(np.ceil((tb - ta) / dt)))
            if dt is not None
            else int(steps_per_interval)
        )
        grid = np.linspace(ta, tb, steps + 1)

        def f(t, xx, _k=k, _q=q):
            u = schedule.control_at(_k, t, problem.control_dim)
            return eval_dynamics(problem, _q, t, xx, u)

        for j in range(steps):
            h = grid[j + 1] - grid[j]
            x = rk4_step(f, grid[j], x, h)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(
                    f"state became non-finite at t={grid[j + 1]:.6g} "
                    f"in mode {q}"
                )
            all_t.append(grid[j + 1])
            all_x.append(x.copy())
    return np.array(all_t), np.vstack(all_x).reshape(len(all_t), n)


def evaluate_schedule_cost(
    problem: SwitchedProblem,
    schedule: SwitchSchedule,
    steps_per_interval: int = 100,
    dt: float | None = None,
) -> float:
    """Total cost of a schedule: RK4 states, trapezoidal running cost.

    The running cost is accumulated on the same grid the integrator uses,
    then the terminal cost is added.
    """
    n = problem.state_dim
    x = problem.x0.copy()
    total = 0.0
    for k, q in enumerate(schedule.modes):
        ta, tb = schedule.times[k], schedule.times[k + 1]
        steps = (
            max(1, int(np.ceil((tb - ta) / dt)))
            if dt is not None
            else int(steps_per_interval)
        )
        grid = np.linspace(ta, tb, steps + 1)

        def f(t, xx, _k=k, _q=q):
            u = schedule.control_at(_k, t, problem.control_dim)
            return eval_dynamics(problem, _q, t, xx, u)

        prev_l = eval_running_cost(
            problem, q, grid[0], x, schedule.control_at(k, grid[0], problem.control_dim)
        )
        for j in range(steps):
            h = grid[j + 1] - grid[j]
            x = rk4_step(f, grid[j], x, h)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(
                    f"state became non-finite at t={grid[j + 1]:.6g} in mode {q}"
                )
            cur_l = eval_running_cost(
                problem,
                q,
                grid[j + 1],
                x,
                schedule.control_at(k, grid[j + 1], problem.control_dim),
            )
            total += 0.5 * h * (prev_l + cur_l)
            prev_l = cur_l
    if problem.terminal_cost is not None:
        total += float(
            problem.terminal_cost(problem.t0, problem.x0, problem.tf, x)
        )
    return float(total)
