"""Turn a solved relaxed trajectory into a feasible switching schedule.

Bits are held constant over each mesh interval, so a binary bit block IS a
switched schedule with switching times on mesh nodes; rounding here is a
tolerance cleaner rather than a relaxation repair.  Each interval's bits
are snapped to the nearest hypercube vertex that decodes to a valid mode
(ties broken toward the smaller index) and consecutive equal modes are
merged.  Sum-up rounding and sub-interval switch-time refinement are
deliberately not provided.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import encoding
from .encoding import EmbeddingConfig
from .exceptions import DomainError
from .problem import SwitchSchedule


@dataclass
class EmbeddedTrajectory:
    """Mesh-sampled relaxed solution.

    ``x`` holds one state per mesh node; ``u`` (per-mode controls) and
    ``v`` (relaxed bits) hold one row per mesh interval.
    """

    times: np.ndarray
    x: np.ndarray  # (J, n)
    u: np.ndarray  # (J-1, M, m)
    v: np.ndarray  # (J-1, b)

    @classmethod
    def from_decision_vector(cls, nlp, z) -> "EmbeddedTrajectory":
        x, u, v = nlp.unpack(np.asarray(z, dtype=float))
        return cls(
            times=nlp.mesh.times.copy(),
            x=x.copy(),
            u=u.copy(),
            v=np.clip(v, 0.0, 1.0),
        )

    @property
    def node_count(self) -> int:
        return self.times.size

    @property
    def interval_count(self) -> int:
        return self.times.size - 1


def round_node(v, cfg: EmbeddingConfig) -> int:
    """Nearest valid mode to a relaxed bit vector (Euclidean, ties -> smallest)."""
    v = np.asarray(v, dtype=float)
    bits = encoding.bit_matrix(cfg.bit_count)[: cfg.mode_count]
    d2 = np.sum((v[None, :] - bits) ** 2, axis=1)
    return int(np.argmin(d2))


def round_nodes(v: np.ndarray, cfg: EmbeddingConfig) -> np.ndarray:
    """Vectorized :func:`round_node` over rows of ``v``."""
    bits = encoding.bit_matrix(cfg.bit_count)[: cfg.mode_count]
    d2 = np.sum(
        (np.asarray(v, dtype=float)[:, None, :] - bits[None, :, :]) ** 2, axis=2
    )
    return np.argmin(d2, axis=1)


def extract_schedule(traj: EmbeddedTrajectory, cfg: EmbeddingConfig) -> SwitchSchedule:
    """Feasible schedule from a relaxed trajectory.

    Every interval's bits are rounded to a valid mode and consecutive equal
    modes merge, which puts every switching time on a mesh node.  Per-mode
    controls of the active mode are carried along as interval-constant
    values.
    """
    q = round_nodes(traj.v, cfg)
    times = traj.times
    n_int = times.size - 1
    has_controls = traj.u.shape[2] > 0
    modes = []
    taus = [times[0]]
    controls: Optional[list] = [] if has_controls else None
    start = 0
    for j in range(1, n_int + 1):
        if j < n_int and q[j] == q[start]:
            continue
        modes.append(int(q[start]))
        taus.append(times[j])
        if controls is not None:
            controls.append(
                _step_control(times[start:j].copy(), traj.u[start:j, q[start], :].copy())
            )
        start = j
    return SwitchSchedule(modes=modes, times=np.asarray(taus), controls=controls)


def _step_control(seg_t: np.ndarray, seg_u: np.ndarray):
    """Piecewise-constant control lookup over the merged run's intervals."""

    def u_of_t(t, _t=seg_t, _u=seg_u):
        idx = int(np.clip(np.searchsorted(_t, t, side="right") - 1, 0, _u.shape[0] - 1))
        return _u[idx]

    return u_of_t


def bang_bang_fraction(traj: EmbeddedTrajectory, eps: float) -> float:
    """Fraction of (interval, bit) entries within ``eps`` of 0 or 1."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 0.5), got {eps}")
    margin = np.minimum(traj.v, 1.0 - traj.v)
    return float(np.mean(margin <= eps))


def invalid_vertex_mass(traj: EmbeddedTrajectory, cfg: EmbeddingConfig) -> np.ndarray:
    """Per-interval total vertex weight carried by invalid bit patterns."""
    W = encoding.vertex_weights(traj.v, cfg.bit_count)
    return W[:, cfg.mode_count :].sum(axis=1)


def penalty_residual(traj: EmbeddedTrajectory, cfg: EmbeddingConfig) -> float:
    """Integral of the switching penalty along the trajectory."""
    pen = np.atleast_1d(encoding.penalty(traj.v, cfg))
    return float(np.sum(np.diff(traj.times) * pen))
