"""Benchmark problems: three-tank pumping and planar orbital rendezvous.

Both benchmarks have no continuous control (``m = 0``); the discrete mode
carries the whole decision.

Three-tank (4 modes, 2 bits): two ON/OFF pumps feed tanks 1 and 2, which
drain into tank 3.  Bit 0 switches pump 1 between levels {1, 2}, bit 1
switches pump 2, so mode ``k = (bit1 bit0)`` maps to pump flows
``(1 + bit0, 1 + bit1)``.  The running cost penalizes tank 3's deviation
from its target level and the imbalance between tanks 1 and 2.  Square
roots are evaluated as ``sqrt(max(x, 0))`` with derivative zero at
non-positive levels, so transiently negative collocation iterates keep
well-defined dynamics.

Rendezvous (5 modes, 3 bits): a deputy spacecraft intercepts a chief on a
circular orbit.  States are planar position and velocity in the rotating
chief-centered frame, scaled by the orbit radius and the orbital time
constant ``tau = 1/omega = sqrt(R^3 / mu)``.  The thrust set is coast plus
unit thrust along +/-x and +/-y; the cost is quadratic in the state with a
terminal weight emphasizing position accuracy, and a box keeps the states
within physically meaningful bounds.

Free parameters of the benchmark scenarios (three-tank start level and
horizon, rendezvous horizon and penalty weights) carry documented defaults
on the parameter types and stay user-adjustable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import EmbeddingConfig
from .exceptions import ConfigError, DivergenceError
from .problem import SwitchedProblem

MU_EARTH_KM3_S2 = 3.986e5


# ---------------------------------------------------------------------------
# Three-tank system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThreeTankParams:
    outflow: tuple = (1.0, 1.0, 2.0)  # c1, c2, c3
    pump_levels: tuple = (1.0, 2.0)  # OFF/ON flow of each pump
    target: tuple = (1.0, 1.0, 3.0)  # desired levels; only tanks 2,3 enter the cost
    weight_level: float = 3.0  # d1, on (x3 - target3)^2
    weight_balance: float = 1.0  # d2, on (x2 - x1)^2
    alpha: float = 0.1  # fractionality penalty weight
    # Scenario defaults: interior start between the per-mode equilibria
    # (1,1,1) and (4,4,4), horizon long enough to settle near the targets.
    default_x0: tuple = (2.0, 2.0, 2.0)
    default_tf: float = 10.0


def _safe_sqrt(x):
    return np.sqrt(np.maximum(x, 0.0))


def _safe_sqrt_deriv(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = 0.5 / np.sqrt(x[pos])
    return out


def three_tank_problem(
    params: ThreeTankParams | None = None,
    x0=None,
    tf: float | None = None,
) -> SwitchedProblem:
    """Three-tank switched problem with analytic Jacobians (M=4, b=2)."""
    prm = params or ThreeTankParams()
    c1, c2, c3 = prm.outflow
    lo, hi = prm.pump_levels
    x3d = prm.target[2]
    d1, d2 = prm.weight_level, prm.weight_balance
    x0 = np.asarray(prm.default_x0 if x0 is None else x0, dtype=float)
    tf = prm.default_tf if tf is None else float(tf)

    def make_dynamics(vp1, vp2):
        def f(t, x, u, _v1=vp1, _v2=vp2):
            x = np.asarray(x, dtype=float)
            s = _safe_sqrt(x)
            out = np.empty_like(x)
            out[..., 0] = _v1 - c1 * s[..., 0]
            out[..., 1] = _v2 - c2 * s[..., 1]
            out[..., 2] = c1 * s[..., 0] + c2 * s[..., 1] - c3 * s[..., 2]
            return out

        return f

    def make_jac_x():
        def jac(t, x, u):
            x = np.asarray(x, dtype=float)
            ds = _safe_sqrt_deriv(x)
            shape = x.shape[:-1] + (3, 3)
            A = np.zeros(shape)
            A[..., 0, 0] = -c1 * ds[..., 0]
            A[..., 1, 1] = -c2 * ds[..., 1]
            A[..., 2, 0] = c1 * ds[..., 0]
            A[..., 2, 1] = c2 * ds[..., 1]
            A[..., 2, 2] = -c3 * ds[..., 2]
            return A

        return jac

    def running_cost(t, x, u):
        x = np.asarray(x, dtype=float)
        return d1 * (x[..., 2] - x3d) ** 2 + d2 * (x[..., 1] - x[..., 0]) ** 2

    def running_cost_grad(t, x, u):
        x = np.asarray(x, dtype=float)
        g = np.zeros_like(x)
        g[..., 0] = -2.0 * d2 * (x[..., 1] - x[..., 0])
        g[..., 1] = 2.0 * d2 * (x[..., 1] - x[..., 0])
        g[..., 2] = 2.0 * d1 * (x[..., 2] - x3d)
        return g

    # Mode k: bit 0 drives pump 1, bit 1 drives pump 2.
    pump = lambda bit: hi if bit else lo
    dynamics = [make_dynamics(pump(k & 1), pump((k >> 1) & 1)) for k in range(4)]
    jac = make_jac_x()
    return SwitchedProblem(
        mode_count=4,
        state_dim=3,
        control_dim=0,
        dynamics=dynamics,
        running_costs=[running_cost] * 4,
        t0=0.0,
        tf=tf,
        x0=x0,
        terminal_cost=None,
        state_bounds=(np.zeros(3), np.full(3, np.inf)),
        dynamics_jac_x=[jac] * 4,
        running_cost_grad_x=[running_cost_grad] * 4,
        batched=True,
        x_target=np.asarray(prm.target, dtype=float),
        name="three-tank",
    )


def three_tank_embedding(
    params: ThreeTankParams | None = None,
    alpha: float | None = None,
    beta: float | None = None,
) -> EmbeddingConfig:
    prm = params or ThreeTankParams()
    a = prm.alpha if alpha is None else alpha
    return EmbeddingConfig.for_modes(4, alpha=a, beta=beta)


# ---------------------------------------------------------------------------
# Planar rendezvous in the rotating chief frame
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RendezvousParams:
    chief_radius_km: float = 21000.0
    thrust_mag: float = 3.0  # nondimensional acceleration of an active thruster
    q_diag: tuple = (100.0, 100.0, 1.0, 1.0)
    terminal_scale: float = 10.0  # S = terminal_scale * Q
    x0: tuple = (-0.119, 0.0, 0.0, 0.065)
    state_box: float = 0.35  # |xi_i| <= state_box
    alpha: float = 0.1  # fractionality penalty weight
    # The blended field and cost fade out near invalid vertices, so the
    # invalid-vertex weight must exceed the running cost that vanishing
    # there would erase: sup over the box of xi' Q xi is 0.35^2 * 202 ~ 24.7.
    # Anything smaller lets the optimizer freeze the state for beta per
    # unit time instead of flying the maneuver.
    beta: float | None = 25.0
    default_tf: float = 3.0  # scaled horizon (~4 h)

    @property
    def time_constant_s(self) -> float:
        """tau = 1/omega = sqrt(R^3 / mu) for the chief's circular orbit."""
        return float(np.sqrt(self.chief_radius_km**3 / MU_EARTH_KM3_S2))

    @property
    def thrust_set(self) -> np.ndarray:
        u0 = self.thrust_mag
        return np.array(
            [[0.0, 0.0], [u0, 0.0], [-u0, 0.0], [0.0, u0], [0.0, -u0]]
        )


_R_SINGULAR = 1e-6


def rendezvous_problem(
    params: RendezvousParams | None = None,
    tf_scaled: float | None = None,
) -> SwitchedProblem:
    """Planar rendezvous switched problem (M=5, b=3), scaled units.

    State is ``(x, y, xdot, ydot)`` relative to the chief in the rotating
    frame, in units of the orbit radius and the orbital time constant.  The
    drift vanishes at the origin, so coasting holds a completed rendezvous.
    """
    prm = params or RendezvousParams()
    tf = prm.default_tf if tf_scaled is None else float(tf_scaled)
    Q = np.diag(prm.q_diag)
    S = prm.terminal_scale * Q
    thrust = prm.thrust_set

    def make_dynamics(ux, uy):
        def f(t, xi, u, _ux=ux, _uy=uy):
            xi = np.asarray(xi, dtype=float)
            rx = 1.0 + xi[..., 0]
            r = np.sqrt(rx**2 + xi[..., 1] ** 2)
            if np.any(r < _R_SINGULAR):
                raise DivergenceError(
                    "relative distance collapsed below the singularity guard"
                )
            g = 1.0 / r**3 - 1.0
            out = np.empty_like(xi)
            out[..., 0] = xi[..., 2]
            out[..., 1] = xi[..., 3]
            out[..., 2] = 2.0 * xi[..., 3] - rx * g + _ux
            out[..., 3] = -2.0 * xi[..., 2] - xi[..., 1] * g + _uy
            return out

        return f

    def jac_x(t, xi, u):
        xi = np.asarray(xi, dtype=float)
        rx = 1.0 + xi[..., 0]
        y = xi[..., 1]
        r2 = rx**2 + y**2
        r = np.sqrt(r2)
        g = 1.0 / r**3 - 1.0
        r5 = r2 * r2 * r
        shape = xi.shape[:-1] + (4, 4)
        A = np.zeros(shape)
        A[..., 0, 2] = 1.0
        A[..., 1, 3] = 1.0
        A[..., 2, 0] = -g + 3.0 * rx**2 / r5
        A[..., 2, 1] = 3.0 * rx * y / r5
        A[..., 2, 3] = 2.0
        A[..., 3, 0] = 3.0 * rx * y / r5
        A[..., 3, 1] = -g + 3.0 * y**2 / r5
        A[..., 3, 2] = -2.0
        return A

    def running_cost(t, xi, u):
        xi = np.asarray(xi, dtype=float)
        return np.einsum("...i,ij,...j->...", xi, Q, xi)

    def running_cost_grad(t, xi, u):
        return 2.0 * np.asarray(xi, dtype=float) @ Q

    def terminal_cost(t0, x0, tf_, xf):
        xf = np.asarray(xf, dtype=float)
        return float(xf @ S @ xf)

    def terminal_cost_grad(xf):
        return 2.0 * S @ np.asarray(xf, dtype=float)

    dynamics = [make_dynamics(ux, uy) for ux, uy in thrust]
    box = prm.state_box
    return SwitchedProblem(
        mode_count=5,
        state_dim=4,
        control_dim=0,
        dynamics=dynamics,
        running_costs=[running_cost] * 5,
        t0=0.0,
        tf=tf,
        x0=np.asarray(prm.x0, dtype=float),
        terminal_cost=terminal_cost,
        state_bounds=(np.full(4, -box), np.full(4, box)),
        dynamics_jac_x=[jac_x] * 5,
        running_cost_grad_x=[running_cost_grad] * 5,
        terminal_cost_grad=terminal_cost_grad,
        batched=True,
        x_target=np.zeros(4),
        name="rendezvous",
    )


def rendezvous_embedding(
    params: RendezvousParams | None = None,
    alpha: float | None = None,
    beta: float | None = None,
) -> EmbeddingConfig:
    prm = params or RendezvousParams()
    a = prm.alpha if alpha is None else alpha
    b = prm.beta if beta is None else beta
    return EmbeddingConfig.for_modes(5, alpha=a, beta=b)


def lvlh_to_eci(times_scaled: np.ndarray, xi: np.ndarray, params: RendezvousParams | None = None):
    """Deputy position in the inertial orbital plane, for plotting.

    The chief sweeps the circle of radius R at one scaled-time radian per
    unit; the rotating-frame offsets re-project onto inertial axes.  Purely
    a post-processing transform; nothing integrates in this frame.

    Returns an array of shape ``(len(times), 2)`` in km.
    """
    prm = params or RendezvousParams()
    R = prm.chief_radius_km
    theta = np.asarray(times_scaled, dtype=float)
    xi = np.asarray(xi, dtype=float)
    radial = R * (1.0 + xi[:, 0])
    along = R * xi[:, 1]
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    eci_x = radial * cos_t - along * sin_t
    eci_y = radial * sin_t + along * cos_t
    return np.column_stack([eci_x, eci_y])


# ---------------------------------------------------------------------------
# Name-based access for the command line
# ---------------------------------------------------------------------------

BENCHMARKS = ("three-tank", "rendezvous")


def get_benchmark(name: str, x0=None, tf: float | None = None,
                  alpha: float | None = None, beta: float | None = None):
    """Problem and embedding config for a named benchmark."""
    if name == "three-tank":
        problem = three_tank_problem(x0=x0, tf=tf)
        cfg = three_tank_embedding(alpha=alpha, beta=beta)
    elif name == "rendezvous":
        if x0 is not None:
            prm = RendezvousParams(x0=tuple(np.asarray(x0, dtype=float)))
        else:
            prm = RendezvousParams()
        problem = rendezvous_problem(params=prm, tf_scaled=tf)
        cfg = rendezvous_embedding(params=prm, alpha=alpha, beta=beta)
    else:
        raise ConfigError(
            f"unknown problem {name!r}; built-in problems are {BENCHMARKS}"
        )
    return problem, cfg
