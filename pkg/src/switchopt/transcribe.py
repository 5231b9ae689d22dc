"""Direct collocation transcription of the relaxed problem into an NLP.

States live on mesh nodes; the augmented controls (per-mode inputs and
relaxed switching bits) are held constant over each mesh interval:

    z = [x_0, ..., x_N, U_0, ..., U_{N-1}],   U_j = [u_0, ..., u_{M-1}, v]

The zero-order hold matters: with one control per interval, a binary bit
block IS a switched schedule whose switching times are mesh nodes, so the
collocation solution and the extracted schedule describe the same control
signal exactly.  (Sharing controls between neighboring intervals through
the nodes would blend modes across every switching interval and bias each
switch by half an interval against the extracted schedule.)

The objective is a quadrature of the relaxed integrand (embedded running
cost plus switching penalty) matching the collocation scheme, plus the
terminal cost.  Equality constraints are the per-interval defects:

    trapezoidal:      x_{j+1} - x_j - (h/2) (f_j + f_j') = 0
    hermite-simpson:  x_{j+1} - x_j - (h/6) (f_j + 4 f_m + f_j') = 0

where ``f_j = f(s_j, x_j, U_j)`` and ``f_j' = f(s_{j+1}, x_{j+1}, U_j)``
are the interval's endpoint evaluations under its own control, and the
Hermite midpoint state is ``x_m = (x_j + x_{j+1})/2 + (h/8)(f_j - f_j')``.

Bounds are boxes: bits in [0, 1], controls in the problem's control
bounds (tiled per mode), states in the problem's state bounds if any, and
the node-0 state pinned to the initial condition.  All derivatives are
assembled analytically through the embedding chain rule; evaluation
tolerates iterates slightly outside the box (the bit block is clamped to
[0, 1] before the penalty and embedding are evaluated).

Interval evaluations are vectorized across the mesh and the callbacks are
reentrant, so evaluations may be fanned out across workers freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import embed as emb
from . import encoding
from .embed import EmbeddedSystem
from .exceptions import MeshError

_SCHEMES = ("trapezoidal", "hermite-simpson")


@dataclass(frozen=True)
class Mesh:
    """Strictly increasing collocation times ``s_0 < ... < s_N``."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size < 3:
            raise MeshError("mesh needs at least two intervals (three nodes)")
        if not np.all(np.diff(t) > 0):
            raise MeshError("mesh times must be strictly increasing")

    @classmethod
    def uniform(cls, t0: float, tf: float, intervals: int) -> "Mesh":
        if intervals < 2:
            raise MeshError(f"need at least 2 mesh intervals, got {intervals}")
        return cls(np.linspace(t0, tf, intervals + 1))

    @property
    def node_count(self) -> int:
        return self.times.size

    @property
    def interval_count(self) -> int:
        return self.times.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.times)


@dataclass
class NlpEval:
    """One evaluation of the transcribed problem at a decision vector."""

    objective: float
    defects: np.ndarray
    gradient: Optional[np.ndarray] = None
    jacobian: Optional[sp.csr_matrix] = None


class NlpProblem:
    """Box-bounded NLP with equality defect constraints.

    Callback surface (usable from external solvers as well):
        objective(z) -> float
        objective_gradient(z) -> (dim,)
        defects(z) -> (N * n,)
        defect_jacobian(z) -> scipy.sparse CSR of shape (N * n, dim)
        eval_all(z, order) -> NlpEval   combined evaluation, order in {0, 1}
    """

    def __init__(self, sys: EmbeddedSystem, mesh: Mesh, scheme: str = "trapezoidal"):
        if scheme not in _SCHEMES:
            raise MeshError(f"unknown scheme {scheme!r}; choose from {_SCHEMES}")
        p = sys.problem
        if abs(mesh.times[0] - p.t0) > 1e-12 or abs(mesh.times[-1] - p.tf) > 1e-12:
            raise MeshError("mesh must span exactly the problem horizon")
        self.sys = sys
        self.mesh = mesh
        self.scheme = scheme
        self.n = sys.n
        self.m = sys.m
        self.M = sys.mode_count
        self.b = sys.bit_count
        self.p = sys.aug_control_dim
        self.J = mesh.node_count
        self.N = mesh.interval_count
        self.x_len = self.J * self.n
        self.dim = self.x_len + self.N * self.p
        self.constraint_count = self.N * self.n
        self.lb, self.ub = self._build_bounds()
        self._jac_rows, self._jac_cols = self._jacobian_pattern()

    # -- layout ------------------------------------------------------------

    def unpack(self, z: np.ndarray):
        """Split a decision vector into node states and interval controls.

        Returns ``x`` of shape ``(J, n)``, per-mode controls ``u`` of
        ``(N, M, m)``, and bits ``v`` of ``(N, b)``.
        """
        z = np.asarray(z, dtype=float)
        x = z[: self.x_len].reshape(self.J, self.n)
        U = z[self.x_len :].reshape(self.N, self.p)
        u = U[:, : self.M * self.m].reshape(self.N, self.M, self.m)
        v = U[:, self.M * self.m :]
        return x, u, v

    def pack(self, x, u, v) -> np.ndarray:
        z = np.empty(self.dim)
        z[: self.x_len] = np.asarray(x, dtype=float).reshape(-1)
        U = z[self.x_len :].reshape(self.N, self.p)
        U[:, : self.M * self.m] = np.asarray(u, dtype=float).reshape(
            self.N, self.M * self.m
        )
        U[:, self.M * self.m :] = v
        return z

    def state_slice(self, j: int) -> slice:
        return slice(j * self.n, (j + 1) * self.n)

    def control_slice(self, j: int) -> slice:
        start = self.x_len + j * self.p
        return slice(start, start + self.p)

    def _build_bounds(self):
        p = self.sys.problem
        lb = np.full(self.dim, -np.inf)
        ub = np.full(self.dim, np.inf)
        if p.state_bounds is not None:
            lb[: self.x_len] = np.tile(p.state_bounds[0], self.J)
            ub[: self.x_len] = np.tile(p.state_bounds[1], self.J)
        U_lb = np.zeros(self.p)
        U_ub = np.ones(self.p)
        if self.m > 0:
            clo, chi = (np.asarray(a, dtype=float) for a in p.control_bounds)
            U_lb[: self.M * self.m] = np.tile(clo, self.M)
            U_ub[: self.M * self.m] = np.tile(chi, self.M)
        lb[self.x_len :] = np.tile(U_lb, self.N)
        ub[self.x_len :] = np.tile(U_ub, self.N)
        lb[: self.n] = p.x0
        ub[: self.n] = p.x0
        return lb, ub

    def pin_state(self, node: int, value) -> None:
        """Fix the state at a node by collapsing its box (lo = hi)."""
        sl = self.state_slice(node)
        self.lb[sl] = value
        self.ub[sl] = value

    def initial_guess(self, x_target=None) -> np.ndarray:
        """Hold-at-x0 states (or a linear ramp to ``x_target``),
        mid-bound controls, and bits at 0.5."""
        p = self.sys.problem
        if x_target is None and p.x_target is not None:
            x_target = p.x_target
        ramp = np.linspace(0.0, 1.0, self.J)[:, None]
        if x_target is None:
            x = np.tile(p.x0, (self.J, 1))
        else:
            x = p.x0[None, :] + ramp * (np.asarray(x_target, dtype=float) - p.x0)
        if self.m > 0:
            clo, chi = (np.asarray(a, dtype=float) for a in p.control_bounds)
            mid = np.where(
                np.isfinite(clo) & np.isfinite(chi), 0.5 * (clo + chi), 0.0
            )
            u = np.tile(mid, (self.N, self.M, 1))
        else:
            u = np.zeros((self.N, self.M, 0))
        v = np.full((self.N, self.b), 0.5)
        return self.pack(x, u, v)

    # -- evaluation --------------------------------------------------------

    def _arrays(self, z: np.ndarray):
        """Unpack and clamp the bit block for out-of-box line-search trials."""
        x, u, v = self.unpack(z)
        v = np.clip(v, 0.0, 1.0)
        U = np.concatenate([u.reshape(self.N, self.M * self.m), v], axis=1)
        return x, U, v

    def _terminal_value_and_grads(self, x, order: int):
        """Terminal cost and its gradients with respect to the x0 / xf slices."""
        p = self.sys.problem
        if p.terminal_cost is None:
            return 0.0, None, None
        K = p.terminal_cost
        x0s, xfs = x[0], x[-1]
        val = float(K(p.t0, x0s, p.tf, xfs))
        if order < 1:
            return val, None, None
        if p.terminal_cost_grad is not None:
            gf = np.asarray(p.terminal_cost_grad(xfs), dtype=float)
        else:
            gf = _fd_grad_vec(lambda xx: K(p.t0, x0s, p.tf, xx), xfs)
        g0 = _fd_grad_vec(lambda xx: K(p.t0, xx, p.tf, xfs), x0s)
        return val, g0, gf

    def eval_all(self, z: np.ndarray, order: int = 1) -> NlpEval:
        if self.scheme == "trapezoidal":
            return self._eval_trapezoidal(z, order)
        return self._eval_hermite_simpson(z, order)

    def eval_blocks(self, z: np.ndarray) -> dict:
        """First-order evaluation keeping the per-interval structure.

        Returns objective, defects, the objective gradient split into node
        and interval parts (``Gx`` of shape ``(J, n)``, ``GU`` of
        ``(N, p)``), and the defect Jacobian blocks ``Dx0``, ``Dx1``
        (``(N, n, n)``, w.r.t. the interval's left/right node state) and
        ``DU`` (``(N, n, p)``).  This is what adjoint-based reduced-space
        methods need.
        """
        if self.scheme == "trapezoidal":
            return self._eval_trapezoidal(z, order=1, blocks=True)
        return self._eval_hermite_simpson(z, order=1, blocks=True)

    def objective(self, z) -> float:
        return self.eval_all(z, order=0).objective

    def objective_gradient(self, z) -> np.ndarray:
        return self.eval_all(z, order=1).gradient

    def defects(self, z) -> np.ndarray:
        return self.eval_all(z, order=0).defects

    def defect_jacobian(self, z) -> sp.csr_matrix:
        return self.eval_all(z, order=1).jacobian

    def penalty_integral(self, z) -> float:
        """Quadrature of the switching penalty along the iterate.

        Both schemes reduce to ``sum_j h_j * penalty(v_j)`` because the
        bits are constant on each interval.
        """
        _, _, v = self._arrays(z)
        pen = np.atleast_1d(encoding.penalty(v, self.sys.cfg))
        return float(np.sum(self.mesh.widths * pen))

    # -- trapezoidal -------------------------------------------------------

    def _eval_trapezoidal(self, z, order: int, blocks: bool = False):
        x, U, v = self._arrays(z)
        t = self.mesh.times
        h = self.mesh.widths
        FL, wL = emb.node_values(self.sys, t[:-1], x[:-1], U)
        FR, wR = emb.node_values(self.sys, t[1:], x[1:], U)

        obj = float(np.sum(0.5 * h * (wL + wR)))
        K_val, K_g0, K_gf = self._terminal_value_and_grads(x, order)
        obj += K_val
        c = (x[1:] - x[:-1] - 0.5 * h[:, None] * (FL + FR)).ravel()
        if order < 1:
            return NlpEval(obj, c)

        AL, BL, lxL, luL = emb._batch_jacobians(self.sys, t[:-1], x[:-1], U)
        AR, BR, lxR, luR = emb._batch_jacobians(self.sys, t[1:], x[1:], U)
        pg = encoding.penalty_gradient(v, self.sys.cfg)

        G = np.zeros(self.dim)
        Gx = G[: self.x_len].reshape(self.J, self.n)
        half_h = 0.5 * h[:, None]
        Gx[:-1] += half_h * lxL
        Gx[1:] += half_h * lxR
        GU = G[self.x_len :].reshape(self.N, self.p)
        GU[:] = half_h * (luL + luR)
        GU[:, self.M * self.m :] += h[:, None] * pg
        if K_gf is not None:
            Gx[-1] += K_gf
            Gx[0] += K_g0

        half = 0.5 * h[:, None, None]
        eye = np.eye(self.n)
        Dx0 = -eye - half * AL
        Dx1 = eye - half * AR
        DU = -half * (BL + BR)
        if blocks:
            return {
                "objective": obj,
                "defects": c,
                "Gx": Gx,
                "GU": GU,
                "Dx0": Dx0,
                "Dx1": Dx1,
                "DU": DU,
            }
        jac = self._assemble_jacobian(Dx0, Dx1, DU)
        return NlpEval(obj, c, G, jac)

    # -- hermite-simpson ---------------------------------------------------

    def _eval_hermite_simpson(self, z, order: int, blocks: bool = False):
        x, U, v = self._arrays(z)
        t = self.mesh.times
        h = self.mesh.widths
        FL, wL = emb.node_values(self.sys, t[:-1], x[:-1], U)
        FR, wR = emb.node_values(self.sys, t[1:], x[1:], U)
        t_m = 0.5 * (t[:-1] + t[1:])
        x_m = 0.5 * (x[:-1] + x[1:]) + (h[:, None] / 8.0) * (FL - FR)
        Fm, wm = emb.node_values(self.sys, t_m, x_m, U)

        obj = float(np.sum(h / 6.0 * (wL + 4.0 * wm + wR)))
        K_val, K_g0, K_gf = self._terminal_value_and_grads(x, order)
        obj += K_val
        c = (x[1:] - x[:-1] - (h[:, None] / 6.0) * (FL + 4.0 * Fm + FR)).ravel()
        if order < 1:
            return NlpEval(obj, c)

        AL, BL, lxL, luL = emb._batch_jacobians(self.sys, t[:-1], x[:-1], U)
        AR, BR, lxR, luR = emb._batch_jacobians(self.sys, t[1:], x[1:], U)
        Am, Bm, lxm, lum = emb._batch_jacobians(self.sys, t_m, x_m, U)
        pg = encoding.penalty_gradient(v, self.sys.cfg)

        h6 = h[:, None] / 6.0
        h8 = h[:, None, None] / 8.0
        eye = np.eye(self.n)
        # Midpoint chain pieces.
        dxm_dx0 = 0.5 * eye + h8 * AL  # (N, n, n)
        dxm_dx1 = 0.5 * eye - h8 * AR
        dxm_dU = h8 * (BL - BR)  # (N, n, p)

        G = np.zeros(self.dim)
        Gx = G[: self.x_len].reshape(self.J, self.n)
        GU = G[self.x_len :].reshape(self.N, self.p)
        Gx[:-1] += h6 * lxL
        Gx[1:] += h6 * lxR
        GU[:] = h6 * (luL + luR)
        coef = 4.0 * h6
        Gx[:-1] += coef * np.einsum("jab,ja->jb", dxm_dx0, lxm)
        Gx[1:] += coef * np.einsum("jab,ja->jb", dxm_dx1, lxm)
        GU += coef * (np.einsum("jap,ja->jp", dxm_dU, lxm) + lum)
        # The bits are constant on the interval, so the three quadrature
        # stages see the same penalty slope.
        GU[:, self.M * self.m :] += h[:, None] * pg
        if K_gf is not None:
            Gx[-1] += K_gf
            Gx[0] += K_g0

        h6m = h[:, None, None] / 6.0
        Dx0 = -eye - h6m * (AL + 4.0 * np.matmul(Am, dxm_dx0))
        Dx1 = eye - h6m * (AR + 4.0 * np.matmul(Am, dxm_dx1))
        DU = -h6m * (BL + BR + 4.0 * (np.matmul(Am, dxm_dU) + Bm))
        if blocks:
            return {
                "objective": obj,
                "defects": c,
                "Gx": Gx,
                "GU": GU,
                "Dx0": Dx0,
                "Dx1": Dx1,
                "DU": DU,
            }
        jac = self._assemble_jacobian(Dx0, Dx1, DU)
        return NlpEval(obj, c, G, jac)

    # -- sparse assembly ----------------------------------------------------

    def _jacobian_pattern(self):
        N, n, p = self.N, self.n, self.p
        rows_n = np.arange(N)[:, None, None] * n + np.arange(n)[None, :, None]
        parts_r, parts_c = [], []
        specs = (
            (0, n, lambda j: j * n),  # d/dx_j
            (1, n, lambda j: j * n),  # d/dx_{j+1}
            (0, p, lambda j: self.x_len + j * p),  # d/dU_j
        )
        for offset, width, col0 in specs:
            cols = (
                col0(np.arange(N)[:, None, None] + offset)
                + np.arange(width)[None, None, :]
            )
            parts_r.append(np.broadcast_to(rows_n, (N, n, width)).ravel())
            parts_c.append(np.broadcast_to(cols, (N, n, width)).ravel())
        return np.concatenate(parts_r), np.concatenate(parts_c)

    def _assemble_jacobian(self, Dx0, Dx1, DU) -> sp.csr_matrix:
        data = np.concatenate([Dx0.ravel(), Dx1.ravel(), DU.ravel()])
        return sp.coo_matrix(
            (data, (self._jac_rows, self._jac_cols)),
            shape=(self.constraint_count, self.dim),
        ).tocsr()


def _fd_grad_vec(fn, x0: np.ndarray, step: float = 1e-6) -> np.ndarray:
    out = np.empty_like(x0)
    for i in range(x0.size):
        s = step * (1.0 + abs(x0[i]))
        hi = x0.copy()
        lo = x0.copy()
        hi[i] += s
        lo[i] -= s
        out[i] = (fn(hi) - fn(lo)) / (hi[i] - lo[i])
    return out


def build_nlp(
    sys: EmbeddedSystem, mesh: Mesh, scheme: str = "trapezoidal"
) -> NlpProblem:
    """Transcribe an embedded system on a mesh into a box-bounded NLP."""
    return NlpProblem(sys, mesh, scheme)
