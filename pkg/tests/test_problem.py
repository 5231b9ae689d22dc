"""Problem container, validation, and schedule simulation tests."""

import numpy as np
import pytest

import switchopt as so
from switchopt import problem as prob
from switchopt.exceptions import DivergenceError

from conftest import scalar_two_mode_problem


def constant_problem(rate=0.0, running=1.0, terminal=None):
    def f(t, x, u):
        return np.full_like(np.asarray(x, dtype=float), rate)

    def l(t, x, u):
        return running * np.ones(np.asarray(x).shape[:-1] or ())

    return so.SwitchedProblem(
        mode_count=2,
        state_dim=1,
        control_dim=0,
        dynamics=[f, f],
        running_costs=[l, l],
        t0=0.0,
        tf=1.0,
        x0=np.array([0.0]),
        terminal_cost=terminal,
        batched=True,
    )


class TestValidate:
    def test_benchmarks_are_valid(self):
        from switchopt import bench

        for name in bench.BENCHMARKS:
            problem, _ = bench.get_benchmark(name)
            assert so.validate(problem) == []

    def test_degenerate_horizon(self):
        p = constant_problem()
        bad = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=p.dynamics,
            running_costs=p.running_costs,
            t0=1.0,
            tf=1.0,
            x0=np.array([0.0]),
        )
        diags = so.validate(bad)
        assert any("horizon" in d for d in diags)

    def test_single_mode(self):
        p = constant_problem()
        bad = so.SwitchedProblem(
            mode_count=1,
            state_dim=1,
            control_dim=0,
            dynamics=p.dynamics[:1],
            running_costs=p.running_costs[:1],
            t0=0.0,
            tf=1.0,
            x0=np.array([0.0]),
        )
        diags = so.validate(bad)
        assert any("two modes" in d for d in diags)

    def test_x0_outside_state_bounds(self):
        p = constant_problem()
        bad = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=p.dynamics,
            running_costs=p.running_costs,
            t0=0.0,
            tf=1.0,
            x0=np.array([5.0]),
            state_bounds=(np.array([0.0]), np.array([1.0])),
        )
        assert any("state_bounds" in d for d in so.validate(bad))


class TestEvaluateScheduleCost:
    def test_unit_running_cost(self):
        p = constant_problem(rate=0.0, running=1.0)
        sched = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        assert so.evaluate_schedule_cost(p, sched, steps_per_interval=10) == 1.0

    def test_decay_with_terminal_cost(self):
        def f(t, x, u):
            return -np.asarray(x, dtype=float)

        def zero(t, x, u):
            return np.zeros(np.asarray(x).shape[:-1] or ())

        p = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f, f],
            running_costs=[zero, zero],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            terminal_cost=lambda t0, x0, tf, xf: float(xf[0] ** 2),
            batched=True,
        )
        sched = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        J = so.evaluate_schedule_cost(p, sched, steps_per_interval=100)
        assert abs(J - np.exp(-2.0)) <= 1e-6

    def test_interval_split_invariance_pure_integration(self):
        """Splitting an interval with the same mode leaves the cost alone."""

        def f(t, x, u):
            return -np.asarray(x, dtype=float)

        def zero(t, x, u):
            return np.zeros(np.asarray(x).shape[:-1] or ())

        p = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f, f],
            running_costs=[zero, zero],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            terminal_cost=lambda t0, x0, tf, xf: float(xf[0] ** 2),
            batched=True,
        )
        whole = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        split = so.SwitchSchedule(modes=[0, 0], times=np.array([0.0, 0.37, 1.0]))
        J1 = so.evaluate_schedule_cost(p, whole, steps_per_interval=400)
        J2 = so.evaluate_schedule_cost(p, split, steps_per_interval=400)
        assert abs(J1 - J2) <= 1e-10

    def test_interval_split_invariance_constant_cost(self):
        p = constant_problem(rate=0.0, running=2.5)
        whole = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        split = so.SwitchSchedule(modes=[0, 0], times=np.array([0.0, 0.3, 1.0]))
        J1 = so.evaluate_schedule_cost(p, whole, steps_per_interval=7)
        J2 = so.evaluate_schedule_cost(p, split, steps_per_interval=7)
        assert abs(J1 - J2) <= 1e-12

    def test_divergence_reports_time(self):
        def f(t, x, u):
            x = np.asarray(x, dtype=float)
            return x**2

        def zero(t, x, u):
            return np.zeros(np.asarray(x).shape[:-1] or ())

        p = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f, f],
            running_costs=[zero, zero],
            t0=0.0,
            tf=1.0,
            x0=np.array([2.0]),
            batched=True,
        )
        sched = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        with np.errstate(over="ignore"), pytest.raises(DivergenceError, match="t="):
            so.evaluate_schedule_cost(p, sched, steps_per_interval=1000)


class TestRk4:
    def test_convergence_order(self):
        problem = scalar_two_mode_problem()
        sched = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        errs = []
        steps_list = (8, 16, 32, 64)
        for steps in steps_list:
            _, xs = so.simulate_schedule(problem, sched, steps_per_interval=steps)
            errs.append(abs(xs[-1][0] - np.exp(-1.0)))
        slope = -np.polyfit(np.log(steps_list), np.log(errs), 1)[0]
        assert abs(slope - 4.0) <= 0.3

    def test_schedule_mode_sequence_matters(self):
        problem = scalar_two_mode_problem()
        s0 = so.SwitchSchedule(modes=[0], times=np.array([0.0, 1.0]))
        s1 = so.SwitchSchedule(modes=[1], times=np.array([0.0, 1.0]))
        J0 = so.evaluate_schedule_cost(problem, s0, steps_per_interval=50)
        J1 = so.evaluate_schedule_cost(problem, s1, steps_per_interval=50)
        assert J0 < J1  # pure decay beats the offset mode from x0 = 1


class TestDerivativeFallbacks:
    def test_fd_jacobian_matches_analytic(self):
        from switchopt import bench

        problem, _ = bench.get_benchmark("three-tank")
        stripped = so.SwitchedProblem(
            mode_count=problem.mode_count,
            state_dim=problem.state_dim,
            control_dim=0,
            dynamics=problem.dynamics,
            running_costs=problem.running_costs,
            t0=problem.t0,
            tf=problem.tf,
            x0=problem.x0,
            batched=True,
        )
        x = np.array([1.7, 2.2, 3.1])
        u = np.zeros(0)
        A_fd = prob.dynamics_jac_x(stripped, 2, 0.0, x, u)
        A = prob.dynamics_jac_x(problem, 2, 0.0, x, u)
        assert np.max(np.abs(A - A_fd)) <= 1e-6

    def test_terminal_gradient_fd(self):
        p = constant_problem(
            terminal=lambda t0, x0, tf, xf: float(3.0 * xf[0] ** 2)
        )
        g = prob.terminal_cost_grad(p, np.array([2.0]))
        assert abs(g[0] - 12.0) <= 1e-5
