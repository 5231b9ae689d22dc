"""Mode-insertion baseline: costate-driven iterative schedule refinement.

Starting from a single-interval schedule in mode 0, each iteration

  1. simulates the current schedule forward on a fixed-step grid,
  2. integrates the costate backward on the same grid
     (``pdot = -(df_q/dx)^T p - dl_q/dx`` from ``p(tf) = dK/dxf``),
  3. evaluates the first-order insertion sensitivity
     ``d(t, k) = <p, f_k - f_q> + l_k - l_q`` on a candidate time grid
     for every mode,
  4. inserts the most negative candidate, sizing its duration by
     golden-section search on the re-simulated cost, and
  5. stops when no candidate improves past the descent tolerance, the
     insertion budget is exhausted, or the best insertion fails to lower
     the cost.

The accepted-cost trace is nonincreasing by construction.  Candidate
evaluations are independent; a thread pool fans them out when
``workers > 1``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import problem as prob
from .exceptions import ConfigError
from .problem import SwitchedProblem, SwitchSchedule

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MigConfig:
    dt: float = 0.01
    grid_count: int = 100
    max_insertions: int = 30
    duration_fraction_max: float = 0.1
    duration_tol: float | None = None  # defaults to dt
    descent_tol: float = 1e-3
    workers: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.grid_count < 2:
            raise ConfigError("candidate grid needs at least two points")


@dataclass
class MigResult:
    schedule: SwitchSchedule
    cost: float
    trace: list = field(default_factory=list)  # accepted costs, first = initial

    @property
    def insertions(self) -> int:
        return len(self.trace) - 1


def costate_backward(
    problem: SwitchedProblem,
    schedule: SwitchSchedule,
    times: np.ndarray,
    states: np.ndarray,
):
    """Costate trajectory on the grid of a forward simulation.

    ``times`` / ``states`` come from :func:`switchopt.problem.simulate_schedule`
    on the same schedule; intermediate RK4 stage states are linearly
    interpolated from them.
    """
    n = problem.state_dim

    def x_at(t: float) -> np.ndarray:
        return np.array([np.interp(t, times, states[:, i]) for i in range(n)])

    xf = states[-1]
    p = prob.terminal_cost_grad(problem, xf)
    out = np.empty_like(states)
    out[-1] = p
    for i in range(times.size - 1, 0, -1):
        t1, t0 = times[i], times[i - 1]
        q = schedule.mode_at(0.5 * (t0 + t1))
        u_of = _interval_control(problem, schedule, 0.5 * (t0 + t1))

        def pdot(t, pp, _q=q, _u=u_of):
            xx = x_at(t)
            u = _u(t)
            A = prob.dynamics_jac_x(problem, _q, t, xx, u)
            gx = prob.running_cost_grad_x(problem, _q, t, xx, u)
            return -(A.T @ pp) - gx

        p = prob.rk4_step(pdot, t1, p, t0 - t1)
        if not np.all(np.isfinite(p)):
            raise prob.DivergenceError(
                f"costate became non-finite at t={t0:.6g}"
            )
        out[i - 1] = p
    return out


def _interval_control(problem, schedule, t_mid):
    idx = int(np.searchsorted(schedule.times, t_mid, side="right") - 1)
    idx = min(max(idx, 0), len(schedule.modes) - 1)

    def u_of(t, _idx=idx):
        return schedule.control_at(_idx, t, problem.control_dim)

    return u_of


def insertion_gradient(
    problem: SwitchedProblem,
    active_q: int,
    candidate_k: int,
    t: float,
    x: np.ndarray,
    p: np.ndarray,
    u=None,
) -> float:
    """First-order cost sensitivity of inserting mode ``k`` at time ``t``.

    Negative values indicate an improving insertion; the sensitivity of the
    active mode against itself is exactly zero.
    """
    if candidate_k == active_q:
        return 0.0
    if u is None:
        u = np.zeros(problem.control_dim)
    fk = prob.eval_dynamics(problem, candidate_k, t, x, u)
    fq = prob.eval_dynamics(problem, active_q, t, x, u)
    lk = prob.eval_running_cost(problem, candidate_k, t, x, u)
    lq = prob.eval_running_cost(problem, active_q, t, x, u)
    return float(p @ (fk - fq) + lk - lq)


def _insert_interval(schedule: SwitchSchedule, t_a: float, t_b: float, k: int,
                     tiny: float = 1e-12) -> SwitchSchedule:
    """Schedule with mode ``k`` forced on ``[t_a, t_b)``; slivers dropped."""
    new_times = [schedule.times[0]]
    new_modes = []
    new_ctrls = [] if schedule.controls is not None else None

    def push(tb, q, ctrl):
        if tb - new_times[-1] <= tiny:
            return
        if new_modes and new_modes[-1] == q:
            new_times[-1] = tb
            return
        new_modes.append(q)
        new_times.append(tb)
        if new_ctrls is not None:
            new_ctrls.append(ctrl)

    for i, q in enumerate(schedule.modes):
        a, b = schedule.times[i], schedule.times[i + 1]
        ctrl = schedule.controls[i] if schedule.controls is not None else None
        lo, hi = max(a, t_a), min(b, t_b)
        if hi <= lo:
            push(b, q, ctrl)
            continue
        push(lo, q, ctrl)
        push(hi, k, ctrl)
        push(b, q, ctrl)
    return SwitchSchedule(modes=new_modes, times=np.array(new_times), controls=new_ctrls)


def _golden_section(fn, lo: float, hi: float, tol: float):
    """Deterministic golden-section minimizer; returns (best_x, best_f)."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def mig_solve(
    problem: SwitchedProblem,
    cfg: MigConfig = MigConfig(),
    initial_schedule: SwitchSchedule | None = None,
) -> MigResult:
    """Iterative mode insertion from a constant mode-0 schedule.

    ``initial_schedule`` warm-starts the loop; because accepted insertions
    never increase the cost, a sweep over decreasing ``dt`` values that
    refines each coarser result produces a nonincreasing cost sequence.
    """
    t0, tf = problem.t0, problem.tf
    horizon = tf - t0
    dur_tol = cfg.duration_tol if cfg.duration_tol is not None else cfg.dt
    if initial_schedule is not None:
        schedule = initial_schedule
    else:
        controls = None if problem.control_dim == 0 else [None]
        schedule = SwitchSchedule(
            modes=[0], times=np.array([t0, tf]), controls=controls
        )

    def cost_of(s):
        return prob.evaluate_schedule_cost(problem, s, dt=cfg.dt)

    cost = cost_of(schedule)
    trace = [cost]
    # Candidate times at cell centers keep insertions away from the ends.
    cand_t = t0 + horizon * (np.arange(cfg.grid_count) + 0.5) / cfg.grid_count

    for _ in range(cfg.max_insertions):
        times, states = prob.simulate_schedule(problem, schedule, dt=cfg.dt)
        p_traj = costate_backward(problem, schedule, times, states)

        def x_p_at(t):
            x = np.array(
                [np.interp(t, times, states[:, i]) for i in range(problem.state_dim)]
            )
            p = np.array(
                [np.interp(t, times, p_traj[:, i]) for i in range(problem.state_dim)]
            )
            return x, p

        def best_at(t):
            x, p = x_p_at(t)
            q = schedule.mode_at(t)
            u = _interval_control(problem, schedule, t)(t)
            vals = [
                insertion_gradient(problem, q, k, t, x, p, u)
                for k in range(problem.mode_count)
            ]
            k_best = int(np.argmin(vals))
            return vals[k_best], k_best

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(best_at, cand_t))
        else:
            results = [best_at(t) for t in cand_t]

        d_vals = np.array([r[0] for r in results])
        i_best = int(np.argmin(d_vals))
        d_min = d_vals[i_best]
        if d_min > -cfg.descent_tol:
            break
        t_ins = float(cand_t[i_best])
        k_ins = results[i_best][1]

        dur_max = min(cfg.duration_fraction_max * horizon, tf - t_ins)
        if dur_max <= cfg.dt:
            break

        def cost_with(dur, _t=t_ins, _k=k_ins):
            return cost_of(_insert_interval(schedule, _t, _t + dur, _k))

        dur, new_cost = _golden_section(cost_with, cfg.dt, dur_max, dur_tol)
        if new_cost >= cost - 1e-12:
            break
        schedule = _insert_interval(schedule, t_ins, t_ins + dur, k_ins)
        cost = new_cost
        trace.append(cost)
    return MigResult(schedule=schedule, cost=cost, trace=trace)
