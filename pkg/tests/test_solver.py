"""Solver tests: box projection, augmented Lagrangian, reduced path."""

import numpy as np
import pytest

import switchopt as so
from switchopt import encoding
from switchopt.exceptions import ConfigError
from switchopt.solver import (
    SolverConfig,
    _ReducedProblem,
    _solve_reduced_stage,
    project_box,
    solve,
)
from switchopt.transcribe import Mesh, build_nlp

from conftest import fd_gradient, rel_err, scalar_two_mode_problem


class QuadraticNlp:
    """Unconstrained quadratic ||z - target||^2 inside a box."""

    def __init__(self, target, lb, ub):
        self.target = np.asarray(target, dtype=float)
        self.lb = np.asarray(lb, dtype=float)
        self.ub = np.asarray(ub, dtype=float)
        self.dim = self.target.size
        self.constraint_count = 0

    def initial_guess(self):
        return np.zeros(self.dim)

    def eval_all(self, z, order=1):
        from switchopt.transcribe import NlpEval
        import scipy.sparse as sp

        d = z - self.target
        ev = NlpEval(float(d @ d), np.zeros(0))
        if order >= 1:
            ev.gradient = 2.0 * d
            ev.jacobian = sp.csr_matrix((0, self.dim))
        return ev


class TestProjectBox:
    def test_interior_unchanged(self):
        z = np.array([0.5, -0.5])
        out = project_box(z, np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        assert np.array_equal(out, z)

    def test_exterior_lands_on_boundary(self):
        out = project_box(
            np.array([3.0, -7.0]), np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        )
        assert np.array_equal(out, np.array([1.0, -1.0]))

    def test_idempotent(self):
        lo, hi = np.array([-1.0, 0.0]), np.array([1.0, 2.0])
        z = np.array([5.0, -5.0])
        once = project_box(z, lo, hi)
        assert np.array_equal(project_box(once, lo, hi), once)

    def test_inverted_box_rejected(self):
        with pytest.raises(ConfigError):
            project_box(np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]))


class TestSolveUnconstrained:
    def test_converges_to_interior_minimum(self):
        target = np.array([0.3, -0.7, 1.2])
        nlp = QuadraticNlp(target, -2 * np.ones(3), 2 * np.ones(3))
        res = solve(nlp, SolverConfig(), z_init=np.zeros(3))
        assert res.status == "converged"
        assert np.max(np.abs(res.z - target)) <= 1e-8

    def test_converges_to_box_projection(self):
        target = np.array([3.0, -4.0])
        lo, hi = np.array([-1.0, -1.0]), np.array([1.0, 1.0])
        nlp = QuadraticNlp(target, lo, hi)
        res = solve(nlp, SolverConfig(), z_init=np.zeros(2))
        assert res.status == "converged"
        assert np.max(np.abs(res.z - project_box(target, lo, hi))) <= 1e-10

    def test_determinism(self):
        target = np.array([0.3, -0.7, 1.2])
        nlp = QuadraticNlp(target, -2 * np.ones(3), 2 * np.ones(3))
        r1 = solve(nlp, SolverConfig(record_inner=True), z_init=np.full(3, 0.1))
        r2 = solve(nlp, SolverConfig(record_inner=True), z_init=np.full(3, 0.1))
        assert np.array_equal(r1.z, r2.z)
        assert r1.inner_merits == r2.inner_merits
        assert r1.trace == r2.trace


def min_energy_double_integrator(n_intervals=100):
    """Transfer (0,0) -> (1,0) in unit time minimizing the control energy.

    The analytic optimum is the cubic with u(t) = 6 - 12 t and cost 12.
    Both modes are identical, so the embedding is inert and the problem
    exercises the continuous-control path of the solver.
    """

    def f(t, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.empty_like(x)
        out[..., 0] = x[..., 1]
        out[..., 1] = u[..., 0]
        return out

    def l(t, x, u):
        u = np.asarray(u, dtype=float)
        return u[..., 0] ** 2

    def jac_x(t, x, u):
        x = np.asarray(x, dtype=float)
        A = np.zeros(x.shape[:-1] + (2, 2))
        A[..., 0, 1] = 1.0
        return A

    def jac_u(t, x, u):
        x = np.asarray(x, dtype=float)
        B = np.zeros(x.shape[:-1] + (2, 1))
        B[..., 1, 0] = 1.0
        return B

    def grad_x(t, x, u):
        return np.zeros_like(np.asarray(x, dtype=float))

    def grad_u(t, x, u):
        return 2.0 * np.asarray(u, dtype=float)

    problem = so.SwitchedProblem(
        mode_count=2,
        state_dim=2,
        control_dim=1,
        dynamics=[f, f],
        running_costs=[l, l],
        t0=0.0,
        tf=1.0,
        x0=np.array([0.0, 0.0]),
        control_bounds=(np.array([-50.0]), np.array([50.0])),
        dynamics_jac_x=[jac_x, jac_x],
        dynamics_jac_u=[jac_u, jac_u],
        running_cost_grad_x=[grad_x, grad_x],
        running_cost_grad_u=[grad_u, grad_u],
        batched=True,
    )
    sys_ = so.EmbeddedSystem(
        problem=problem,
        cfg=encoding.EmbeddingConfig(mode_count=2, bit_count=1, alpha=0.0, beta=0.0),
    )
    nlp = build_nlp(sys_, Mesh.uniform(0.0, 1.0, n_intervals))
    nlp.pin_state(nlp.J - 1, np.array([1.0, 0.0]))
    return nlp


class TestSolveCollocation:
    def test_min_energy_double_integrator(self):
        nlp = min_energy_double_integrator(100)
        # warm start on the straight line between the pinned endpoints
        x = np.column_stack([np.linspace(0, 1, nlp.J), np.ones(nlp.J)])
        u = np.zeros((nlp.N, 2, 1))
        v = np.full((nlp.N, 1), 0.5)
        z0 = nlp.pack(x, u, v)
        cfg = SolverConfig(outer_iters_max=40, inner_iters_max=2000)
        res = solve(nlp, cfg, z_init=z0)
        assert res.defect_norm <= 1e-6
        assert abs(res.objective - 12.0) / 12.0 <= 0.005

    def test_monotone_inner_merits(self):
        nlp = min_energy_double_integrator(20)
        cfg = SolverConfig(outer_iters_max=5, inner_iters_max=100, record_inner=True)
        res = solve(nlp, cfg)
        for merits in res.inner_merits:
            diffs = np.diff(np.asarray(merits))
            assert np.all(diffs <= 1e-12)

    def test_trace_matches_spec_fields(self):
        nlp = min_energy_double_integrator(20)
        res = solve(nlp, SolverConfig(outer_iters_max=3, inner_iters_max=50))
        for entry in res.trace:
            assert {"outer", "objective", "defect_norm", "rho"} <= set(entry)

    def test_trace_sink_receives_lines(self):
        nlp = min_energy_double_integrator(20)
        lines = []
        solve(
            nlp,
            SolverConfig(outer_iters_max=3, inner_iters_max=50),
            trace_sink=lines.append,
        )
        assert len(lines) >= 1
        assert "obj" in lines[0]


class TestReducedPath:
    def test_reduced_gradient_matches_fd(self):
        problem = scalar_two_mode_problem()
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(2, alpha=0.1)
        )
        for scheme in ("trapezoidal", "hermite-simpson"):
            nlp = build_nlp(sys_, Mesh.uniform(0.0, 1.0, 9), scheme)
            rp = _ReducedProblem(nlp)
            U0 = rp.initial_controls(nlp.initial_guess())
            rng = np.random.default_rng(23)
            U = np.clip(U0 + rng.uniform(-0.3, 0.3, U0.size), 0.05, 0.95)
            _, g, _ = rp.objective_gradient(U)
            g_fd = fd_gradient(rp.objective, U.copy())
            assert rel_err(g, g_fd) <= 1e-6

    def test_reduced_stage_is_feasible(self):
        problem = scalar_two_mode_problem()
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(2, alpha=0.1)
        )
        nlp = build_nlp(sys_, Mesh.uniform(0.0, 1.0, 20))
        res = _solve_reduced_stage(nlp, nlp.initial_guess(), SolverConfig())
        assert res.defect_norm <= 1e-6
        assert res.objective < nlp.objective(nlp.initial_guess())


class TestSolveMeocp:
    def test_tiny_problem_full_pipeline(self):
        problem = scalar_two_mode_problem()
        cfg = encoding.EmbeddingConfig.for_modes(2, alpha=0.05)
        sys_ = so.EmbeddedSystem(problem=problem, cfg=cfg)
        sol = so.solve_meocp(sys_, Mesh.uniform(0.0, 1.0, 30))
        traj = so.EmbeddedTrajectory.from_decision_vector(sol.nlp, sol.z)
        assert so.bang_bang_fraction(traj, 0.02) == 1.0
        assert sol.result.defect_norm <= 1e-6
        # pure decay is optimal from x0 = 1
        sched = so.extract_schedule(traj, cfg)
        assert sched.modes == [0]

    def test_determinism(self):
        problem = scalar_two_mode_problem()
        cfg = encoding.EmbeddingConfig.for_modes(2, alpha=0.05)
        sys_ = so.EmbeddedSystem(problem=problem, cfg=cfg)
        s1 = so.solve_meocp(sys_, Mesh.uniform(0.0, 1.0, 24))
        s2 = so.solve_meocp(sys_, Mesh.uniform(0.0, 1.0, 24))
        assert np.array_equal(s1.z, s2.z)
        assert s1.result.objective == s2.result.objective

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SolverConfig(defect_tol=-1.0)
        with pytest.raises(ConfigError):
            SolverConfig(penalty_growth=0.5)
