"""Embedded dynamics, cost, derivative, and Hamiltonian tests."""

import numpy as np
import pytest

import switchopt as so
from switchopt import bench, embed, encoding
from switchopt.exceptions import DomainError, EvaluationError

from conftest import fd_gradient, rel_err


def linear_three_mode():
    """Three linear modes in two states with distinct quadratic costs."""
    mats = [
        np.array([[-1.0, 0.2], [0.0, -0.5]]),
        np.array([[0.3, -1.0], [1.0, 0.3]]),
        np.array([[-0.2, 0.0], [0.4, -2.0]]),
    ]
    weights = (1.0, 1.5, 0.5)

    def make_f(A):
        def f(t, x, u):
            return np.asarray(x, dtype=float) @ A.T

        return f

    def make_l(w):
        def l(t, x, u):
            x = np.asarray(x, dtype=float)
            return w * np.sum(x**2, axis=-1)

        return l

    def make_jac(A):
        def jac(t, x, u):
            x = np.asarray(x, dtype=float)
            if x.ndim == 1:
                return A.copy()
            return np.broadcast_to(A, (x.shape[0],) + A.shape).copy()

        return jac

    problem = so.SwitchedProblem(
        mode_count=3,
        state_dim=2,
        control_dim=0,
        dynamics=[make_f(A) for A in mats],
        running_costs=[make_l(w) for w in weights],
        t0=0.0,
        tf=1.0,
        x0=np.array([1.0, -0.5]),
        dynamics_jac_x=[make_jac(A) for A in mats],
        batched=True,
    )
    cfg = encoding.EmbeddingConfig.for_modes(3, alpha=0.8, beta=0.7)
    return so.EmbeddedSystem(problem=problem, cfg=cfg), mats, weights


class TestEmbeddedDynamics:
    def test_vertex_selects_mode_exactly(self):
        sys_, mats, _ = linear_three_mode()
        x = np.array([0.7, -1.2])
        for k in range(3):
            v = encoding.encode(k, 2).astype(float)
            fe = so.embedded_dynamics(sys_, 0.0, x, v)
            assert np.array_equal(fe, x @ mats[k].T)

    def test_midpoint_is_average_for_two_modes(self):
        def f0(t, x, u):
            return -np.asarray(x, dtype=float)

        def f1(t, x, u):
            return -2.0 * np.asarray(x, dtype=float) + 1.0

        def l(t, x, u):
            return np.sum(np.asarray(x) ** 2, axis=-1)

        problem = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f0, f1],
            running_costs=[l, l],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            batched=True,
        )
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(2, alpha=1.0)
        )
        x = np.array([0.8])
        fe = so.embedded_dynamics(sys_, 0.0, x, np.array([0.5]))
        expected = 0.5 * (f0(0, x, None) + f1(0, x, None))
        assert rel_err(fe, expected) <= 1e-15

    def test_invalid_vertex_fades_dynamics_to_zero(self):
        sys_, _, _ = linear_three_mode()
        x = np.array([0.7, -1.2])
        fe = so.embedded_dynamics(sys_, 0.0, x, np.array([1.0, 1.0]))
        assert np.array_equal(fe, np.zeros(2))

    def test_out_of_box_bits_rejected(self):
        sys_, _, _ = linear_three_mode()
        with pytest.raises(DomainError):
            so.embedded_dynamics(sys_, 0.0, np.zeros(2), np.array([1.4, 0.0]))

    def test_nan_from_mode_reports_index(self):
        def bad(t, x, u):
            out = np.full_like(np.asarray(x, dtype=float), np.nan)
            return out

        def f(t, x, u):
            return -np.asarray(x, dtype=float)

        def l(t, x, u):
            return np.sum(np.asarray(x) ** 2, axis=-1)

        problem = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f, bad],
            running_costs=[l, l],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            batched=True,
        )
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(2, alpha=1.0)
        )
        with pytest.raises(EvaluationError, match="mode 1"):
            so.embedded_dynamics(sys_, 0.0, np.ones(1), np.array([0.5]))


class TestEmbeddedRunningCost:
    def test_vertex_value(self):
        sys_, _, weights = linear_three_mode()
        x = np.array([0.5, 0.25])
        for k in range(3):
            v = encoding.encode(k, 2).astype(float)
            le = so.embedded_running_cost(sys_, 0.0, x, v)
            assert le == pytest.approx(weights[k] * np.sum(x**2), abs=0)

    def test_partition_of_unity_for_full_cube(self):
        def f(t, x, u):
            return -np.asarray(x, dtype=float)

        def l(t, x, u):
            return 3.0 * np.ones(np.asarray(x).shape[:-1] or ())

        problem = so.SwitchedProblem(
            mode_count=4,
            state_dim=1,
            control_dim=0,
            dynamics=[f] * 4,
            running_costs=[l] * 4,
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            batched=True,
        )
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(4, alpha=1.0)
        )
        rng = np.random.default_rng(2)
        for _ in range(20):
            v = rng.uniform(size=2)
            assert so.embedded_running_cost(sys_, 0.0, np.ones(1), v) == pytest.approx(
                3.0, abs=1e-12
            )

    def test_three_tank_integrand_vanishes_at_targets(self):
        problem, cfg = bench.get_benchmark("three-tank")
        sys_ = so.EmbeddedSystem(problem=problem, cfg=cfg)
        x = np.array([1.0, 1.0, 3.0])
        for k in range(4):
            v = encoding.encode(k, 2).astype(float)
            assert so.embedded_running_cost(sys_, 0.0, x, v) == 0.0


class TestMeocpIntegrand:
    def test_sum_of_parts(self):
        sys_, _, _ = linear_three_mode()
        rng = np.random.default_rng(4)
        for _ in range(20):
            x = rng.normal(size=2)
            v = rng.uniform(size=2)
            total = so.meocp_integrand(sys_, 0.3, x, v)
            parts = so.embedded_running_cost(sys_, 0.3, x, v) + so.penalty(
                v, sys_.cfg
            )
            assert abs(total - parts) <= 1e-15 * max(1.0, abs(parts))

    def test_vertex_drops_penalty(self):
        sys_, _, weights = linear_three_mode()
        x = np.array([1.0, 1.0])
        v = encoding.encode(1, 2).astype(float)
        assert so.meocp_integrand(sys_, 0.0, x, v) == pytest.approx(
            weights[1] * 2.0, abs=0
        )


class TestJacobians:
    def test_linear_modes_give_weighted_state_jacobian(self):
        sys_, mats, _ = linear_three_mode()
        v = np.array([0.3, 0.6])
        W = encoding.vertex_weights(v, 2)[:3]
        fe_x, _, _, _ = so.jacobians(sys_, 0.0, np.array([0.4, -0.7]), v)
        expected = sum(W[k] * mats[k] for k in range(3))
        assert rel_err(fe_x, expected) <= 1e-12

    def test_vertex_recovers_mode_jacobian(self):
        sys_, mats, _ = linear_three_mode()
        v = encoding.encode(2, 2).astype(float)
        fe_x, _, _, _ = so.jacobians(sys_, 0.0, np.array([0.4, -0.7]), v)
        assert rel_err(fe_x, mats[2]) <= 1e-12

    def test_against_finite_differences(self):
        sys_, _, _ = linear_three_mode()
        rng = np.random.default_rng(9)
        for _ in range(100):
            x = rng.normal(size=2)
            U = rng.uniform(0.05, 0.95, size=2)
            t = float(rng.uniform(0, 1))
            fe_x, fe_U, le_x, le_U = so.jacobians(sys_, t, x, U)
            for i in range(2):
                row_fd = fd_gradient(
                    lambda xx, _i=i: so.embedded_dynamics(sys_, t, xx, U)[_i],
                    x.copy(),
                )
                assert rel_err(fe_x[i], row_fd) <= 1e-6
                row_fd = fd_gradient(
                    lambda vv, _i=i: so.embedded_dynamics(sys_, t, x, vv)[_i],
                    U.copy(),
                )
                assert rel_err(fe_U[i], row_fd) <= 1e-6
            assert rel_err(
                le_x, fd_gradient(lambda xx: so.embedded_running_cost(sys_, t, xx, U), x.copy())
            ) <= 1e-6
            assert rel_err(
                le_U, fd_gradient(lambda vv: so.embedded_running_cost(sys_, t, x, vv), U.copy())
            ) <= 1e-6

    def test_fd_fallback_without_analytic_jacobians(self):
        sys_, mats, weights = linear_three_mode()
        p = sys_.problem
        stripped = so.SwitchedProblem(
            mode_count=3,
            state_dim=2,
            control_dim=0,
            dynamics=p.dynamics,
            running_costs=p.running_costs,
            t0=p.t0,
            tf=p.tf,
            x0=p.x0,
            batched=True,
        )
        bare = so.EmbeddedSystem(problem=stripped, cfg=sys_.cfg)
        v = encoding.encode(0, 2).astype(float)
        fe_x, _, _, _ = so.jacobians(bare, 0.0, np.array([1.0, 2.0]), v)
        assert rel_err(fe_x, mats[0]) <= 1e-9


class TestHamiltonian:
    def test_zero_costate_reduces_to_integrand(self):
        sys_, _, _ = linear_three_mode()
        x = np.array([0.2, 0.9])
        v = np.array([0.4, 0.7])
        H = so.hamiltonian(sys_, 0.0, x, np.zeros(2), v)
        assert H == pytest.approx(so.meocp_integrand(sys_, 0.0, x, v), abs=1e-15)

    def test_coordinatewise_concavity_sampling(self):
        sys_, _, _ = linear_three_mode()
        rng = np.random.default_rng(21)
        worst = -np.inf
        for _ in range(1000):
            t = float(rng.uniform(0, 1))
            x = rng.normal(size=2)
            p = rng.normal(size=2) * 2.0
            v = rng.uniform(size=2)
            i = int(rng.integers(0, 2))
            a_val, b_val = rng.uniform(size=2)

            def H(vi):
                vv = v.copy()
                vv[i] = vi
                return so.hamiltonian(sys_, t, x, p, vv)

            gap = 0.5 * (H(a_val) + H(b_val)) - H(0.5 * (a_val + b_val))
            worst = max(worst, gap)
        assert worst <= 1e-10

    def test_single_bit_slice_structure(self):
        """H(v) for b = 1 is affine plus the strictly concave alpha term."""

        def f0(t, x, u):
            return -np.asarray(x, dtype=float)

        def f1(t, x, u):
            return np.asarray(x, dtype=float)

        def l(t, x, u):
            return np.sum(np.asarray(x) ** 2, axis=-1)

        problem = so.SwitchedProblem(
            mode_count=2,
            state_dim=1,
            control_dim=0,
            dynamics=[f0, f1],
            running_costs=[l, l],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0]),
            batched=True,
        )
        alpha = 0.7
        sys_ = so.EmbeddedSystem(
            problem=problem, cfg=encoding.EmbeddingConfig.for_modes(2, alpha=alpha)
        )
        x, p = np.array([1.3]), np.array([0.4])
        vals = [so.hamiltonian(sys_, 0.0, x, p, np.array([v])) for v in (0.0, 0.5, 1.0)]
        # Removing the alpha term leaves an affine function of v.
        affine_mid = 0.5 * (vals[0] + vals[2])
        assert vals[1] - alpha * 0.25 == pytest.approx(affine_mid, abs=1e-12)


class TestScalingLinearity:
    def test_scaled_modes_scale_embedding(self):
        sys_, mats, weights = linear_three_mode()
        c = 2.5

        def scale_f(A):
            def f(t, x, u):
                return c * (np.asarray(x, dtype=float) @ A.T)

            return f

        def scale_l(w):
            def l(t, x, u):
                x = np.asarray(x, dtype=float)
                return c * w * np.sum(x**2, axis=-1)

            return l

        scaled_problem = so.SwitchedProblem(
            mode_count=3,
            state_dim=2,
            control_dim=0,
            dynamics=[scale_f(A) for A in mats],
            running_costs=[scale_l(w) for w in weights],
            t0=0.0,
            tf=1.0,
            x0=np.array([1.0, -0.5]),
            batched=True,
        )
        scaled = so.EmbeddedSystem(problem=scaled_problem, cfg=sys_.cfg)
        rng = np.random.default_rng(31)
        for _ in range(30):
            x = rng.normal(size=2)
            v = rng.uniform(size=2)
            fe = so.embedded_dynamics(sys_, 0.0, x, v)
            fe_c = so.embedded_dynamics(scaled, 0.0, x, v)
            assert rel_err(fe_c, c * fe) <= 1e-14
            le = so.embedded_running_cost(sys_, 0.0, x, v)
            le_c = so.embedded_running_cost(scaled, 0.0, x, v)
            assert abs(le_c - c * le) <= 1e-14 * max(1.0, abs(c * le))
