"""Embedded dynamics and cost built from mode families and vertex weights.

Given a switched problem with ``M`` modes and an embedding over ``b`` bits,
the augmented control is ``U = [u_0, ..., u_{M-1}, v]`` of length
``M * m + b``.  The embedded vector field blends the valid modes only:

    f_e(t, x, U) = sum_{k < M} V_k(v) f_k(t, x, u_k)

and likewise for the embedded running cost ``L_e``.  Because the sum stops
at ``M - 1``, the field fades to zero as ``v`` approaches an invalid vertex
(only possible when ``M < 2**b``); the invalid-vertex penalty term is what
keeps optimizers out of that region.

The full relaxed integrand is ``L_e + penalty(v)``; the Hamiltonian
``<p, f_e> + L_e + penalty`` is exposed for property checks and the mode
insertion baseline, never formed by the collocation path itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encoding, problem as prob
from .encoding import EmbeddingConfig
from .exceptions import ConfigError, EvaluationError
from .problem import SwitchedProblem


@dataclass(frozen=True)
class EmbeddedSystem:
    """A switched problem paired with its binary embedding."""

    problem: SwitchedProblem
    cfg: EmbeddingConfig

    def __post_init__(self):
        if self.cfg.mode_count != self.problem.mode_count:
            raise ConfigError(
                f"embedding is for {self.cfg.mode_count} modes but the problem "
                f"has {self.problem.mode_count}"
            )
        if self.cfg.bit_count != encoding.num_bits(self.problem.mode_count):
            raise ConfigError("embedding bit count is not minimal for the problem")

    @property
    def n(self) -> int:
        return self.problem.state_dim

    @property
    def m(self) -> int:
        return self.problem.control_dim

    @property
    def mode_count(self) -> int:
        return self.problem.mode_count

    @property
    def bit_count(self) -> int:
        return self.cfg.bit_count

    @property
    def aug_control_dim(self) -> int:
        """Length of U = [u_0, ..., u_{M-1}, v]."""
        return self.mode_count * self.m + self.bit_count

    def split_controls(self, U):
        """Split augmented controls into per-mode ``u`` and bits ``v``.

        Accepts ``(p,)`` or ``(J, p)``; returns ``u`` of shape
        ``(..., M, m)`` and ``v`` of shape ``(..., b)``.
        """
        U = np.asarray(U, dtype=float)
        mm = self.mode_count * self.m
        u = U[..., :mm].reshape(U.shape[:-1] + (self.mode_count, self.m))
        v = U[..., mm:]
        return u, v


def _as_batch(t, x, U, sys: EmbeddedSystem):
    """Normalize inputs to batch form; returns (t, x, U, was_scalar)."""
    x = np.asarray(x, dtype=float)
    U = np.asarray(U, dtype=float)
    if x.ndim == 1:
        return np.atleast_1d(np.asarray(t, dtype=float)), x[None, :], U[None, :], True
    return np.asarray(t, dtype=float), x, U, False


def _mode_tables(sys: EmbeddedSystem, t, x, u):
    """Dynamics and running costs of every valid mode at a node batch.

    Returns ``F`` of shape ``(J, M, n)`` and ``L`` of ``(J, M)``.  Raises
    with the offending mode and node indices if an evaluator returns a
    non-finite value.
    """
    J = x.shape[0]
    F = np.empty((J, sys.mode_count, sys.n))
    L = np.empty((J, sys.mode_count))
    for k in range(sys.mode_count):
        F[:, k, :] = prob.eval_dynamics(sys.problem, k, t, x, u[:, k, :])
        L[:, k] = prob.eval_running_cost(sys.problem, k, t, x, u[:, k, :])
    if not np.all(np.isfinite(F)) or not np.all(np.isfinite(L)):
        bad = ~np.all(np.isfinite(F), axis=2) | ~np.isfinite(L)
        j, k = np.argwhere(bad)[0]
        raise EvaluationError(
            f"mode {k} returned a non-finite value at node {j} (t={t[j]:.6g})"
        )
    return F, L


def embedded_dynamics(sys: EmbeddedSystem, t, x, U) -> np.ndarray:
    """Vertex-weighted blend of the mode vector fields at ``(t, x, U)``."""
    t, x, U, scalar = _as_batch(t, x, U, sys)
    u, v = sys.split_controls(U)
    W = encoding.vertex_weights(v, sys.bit_count)[:, : sys.mode_count]
    F, _ = _mode_tables(sys, t, x, u)
    fe = np.einsum("jk,jkn->jn", W, F)
    return fe[0] if scalar else fe


def embedded_running_cost(sys: EmbeddedSystem, t, x, U):
    """Vertex-weighted blend of the mode running costs."""
    t, x, U, scalar = _as_batch(t, x, U, sys)
    u, v = sys.split_controls(U)
    W = encoding.vertex_weights(v, sys.bit_count)[:, : sys.mode_count]
    _, L = _mode_tables(sys, t, x, u)
    le = np.einsum("jk,jk->j", W, L)
    return float(le[0]) if scalar else le


def meocp_integrand(sys: EmbeddedSystem, t, x, U):
    """Relaxed running cost plus the switching penalty."""
    t, x, U, scalar = _as_batch(t, x, U, sys)
    _, v = sys.split_controls(U)
    val = embedded_running_cost(sys, t, x, U) + encoding.penalty(v, sys.cfg)
    return float(np.asarray(val).reshape(-1)[0]) if scalar else val


def hamiltonian(sys: EmbeddedSystem, t, x, p, U) -> float:
    """``<p, f_e> + L_e + penalty(v)`` at a single point."""
    p = np.asarray(p, dtype=float)
    fe = embedded_dynamics(sys, t, x, U)
    return float(p @ fe) + meocp_integrand(sys, t, x, U)


def node_values(sys: EmbeddedSystem, t, x, U):
    """Batched ``(f_e, L_e + penalty)`` for the transcription layer."""
    t, x, U, scalar = _as_batch(t, x, U, sys)
    u, v = sys.split_controls(U)
    W = encoding.vertex_weights(v, sys.bit_count)[:, : sys.mode_count]
    F, L = _mode_tables(sys, t, x, u)
    fe = np.einsum("jk,jkn->jn", W, F)
    w = np.einsum("jk,jk->j", W, L) + encoding.penalty(v, sys.cfg)
    if scalar:
        return fe[0], float(w[0])
    return fe, w


def jacobians(sys: EmbeddedSystem, t, x, U):
    """Derivatives of ``f_e`` and ``L_e`` with respect to ``x`` and ``U``.

    Returns ``(fe_x, fe_U, le_x, le_U)`` with shapes ``(n, n)``,
    ``(n, M*m+b)``, ``(n,)``, ``(M*m+b,)`` at a single point, or the same
    with a leading batch axis.  The ``U`` derivatives carry per-mode control
    blocks followed by the bit columns; the penalty gradient is NOT included
    (``le_U`` differentiates the embedded running cost only).
    """
    t, x, U, scalar = _as_batch(t, x, U, sys)
    out = _batch_jacobians(sys, t, x, U)
    if scalar:
        return tuple(a[0] for a in out)
    return out


def _batch_jacobians(sys: EmbeddedSystem, t, x, U):
    J = x.shape[0]
    n, m, M, b = sys.n, sys.m, sys.mode_count, sys.bit_count
    p_dim = sys.aug_control_dim
    u, v = sys.split_controls(U)

    W_all = encoding.vertex_weights(v, b)
    dW_all = encoding.vertex_weight_gradients(v, b)
    W = W_all[:, :M]
    dW = dW_all[:, :M, :]

    F, L = _mode_tables(sys, t, x, u)

    fe_x = np.zeros((J, n, n))
    fe_U = np.zeros((J, n, p_dim))
    le_x = np.zeros((J, n))
    le_U = np.zeros((J, p_dim))

    for k in range(M):
        uk = u[:, k, :]
        A = prob.dynamics_jac_x(sys.problem, k, t, x, uk)
        fe_x += W[:, k, None, None] * A
        le_x += W[:, k, None] * prob.running_cost_grad_x(sys.problem, k, t, x, uk)
        if m > 0:
            B = prob.dynamics_jac_u(sys.problem, k, t, x, uk)
            lu = prob.running_cost_grad_u(sys.problem, k, t, x, uk)
            sl = slice(k * m, (k + 1) * m)
            fe_U[:, :, sl] = W[:, k, None, None] * B
            le_U[:, sl] = W[:, k, None] * lu

    # Bit columns: d f_e / d v_i = sum_k dV_k/dv_i f_k, same for L_e.
    fe_U[:, :, M * m :] = np.einsum("jki,jkn->jni", dW, F)
    le_U[:, M * m :] = np.einsum("jki,jk->ji", dW, L)
    return fe_x, fe_U, le_x, le_U
