"""Shared test oracles and session-scoped benchmark solutions."""

import numpy as np
import pytest

import switchopt as so
from switchopt import bench, extract


def fd_gradient(fn, x, step=1e-6):
    """Central-difference oracle, independent of any library derivative code."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        s = step * (1.0 + abs(x[i]))
        hi, lo = x.copy(), x.copy()
        hi[i] += s
        lo[i] -= s
        g[i] = (fn(hi) - fn(lo)) / (hi[i] - lo[i])
    return g


def rel_err(a, b):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / scale)


def scalar_two_mode_problem():
    """f0 = -x, f1 = -2x + 1, shared cost x^2, x(0) = 1 on [0, 1]."""

    def f0(t, x, u):
        return -np.asarray(x, dtype=float)

    def f1(t, x, u):
        return -2.0 * np.asarray(x, dtype=float) + 1.0

    def cost(t, x, u):
        x = np.asarray(x, dtype=float)
        return np.sum(x**2, axis=-1)

    return so.SwitchedProblem(
        mode_count=2,
        state_dim=1,
        control_dim=0,
        dynamics=[f0, f1],
        running_costs=[cost, cost],
        t0=0.0,
        tf=1.0,
        x0=np.array([1.0]),
        batched=True,
        name="scalar-two-mode",
    )


def brute_force_best(problem, intervals, steps_per_interval=50):
    """Exhaustive minimum cost over all mode sequences on a uniform grid."""
    times = np.linspace(problem.t0, problem.tf, intervals + 1)
    best = np.inf
    for code in range(problem.mode_count**intervals):
        modes, c = [], code
        for _ in range(intervals):
            modes.append(c % problem.mode_count)
            c //= problem.mode_count
        sched = so.SwitchSchedule(modes=modes, times=times)
        best = min(
            best,
            so.evaluate_schedule_cost(
                problem, sched, steps_per_interval=steps_per_interval
            ),
        )
    return best


def solve_benchmark(name, intervals=200, alpha=None):
    problem, cfg = bench.get_benchmark(name, alpha=alpha)
    sys_ = so.EmbeddedSystem(problem=problem, cfg=cfg)
    mesh = so.Mesh.uniform(problem.t0, problem.tf, intervals)
    sol = so.solve_meocp(sys_, mesh)
    traj = so.EmbeddedTrajectory.from_decision_vector(sol.nlp, sol.z)
    schedule = so.extract_schedule(traj, cfg)
    resim = so.evaluate_schedule_cost(problem, schedule, steps_per_interval=50)
    return {
        "problem": problem,
        "cfg": cfg,
        "solution": sol,
        "trajectory": traj,
        "schedule": schedule,
        "resimulated_cost": resim,
    }


@pytest.fixture(scope="session")
def three_tank_run():
    """Default three-tank solve at the default mesh, shared across tests."""
    return solve_benchmark("three-tank")


@pytest.fixture(scope="session")
def rendezvous_run():
    """Default rendezvous solve at the default mesh, shared across tests."""
    return solve_benchmark("rendezvous")
