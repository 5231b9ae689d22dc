"""Binary mode encoding and the concave switching penalty.

A switching signal selecting one of ``M`` discrete modes is represented by
``b = ceil(log2(M))`` binary variables.  Relaxing those variables to the unit
hypercube ``[0, 1]^b`` turns mode selection into a continuous decision:
multilinear vertex weights ``V_k(v)`` interpolate per-mode quantities over
the hypercube, and a concave penalty drives relaxed solutions back onto
binary vertices that decode to a valid mode index.

Bit ordering convention: ``v[0]`` is the least-significant bit, so
``decode(v) = sum(2**i * v[i])``.

All operations are pure functions and accept either a single point
``v`` of shape ``(b,)`` or a batch of shape ``(J, b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .exceptions import ConfigError, DomainError, InvalidProblemError

# Tolerance for membership in [0, 1]; values inside the slop are clipped.
_BOX_TOL = 1e-9


def num_bits(mode_count: int) -> int:
    """Minimal number of binary variables encoding ``mode_count`` modes.

    Returns the smallest ``b`` with ``2**(b-1) < mode_count <= 2**b``.
    """
    m = int(mode_count)
    if m < 2:
        raise InvalidProblemError(
            f"need at least two modes to switch between, got mode_count={mode_count}"
        )
    return max(1, (m - 1).bit_length())


def encode(mode: int, bit_count: int) -> np.ndarray:
    """Bit expansion of a mode index, least-significant bit first."""
    q = int(mode)
    b = int(bit_count)
    if q < 0 or q >= 2**b:
        raise DomainError(f"mode {mode} not representable with {bit_count} bits")
    return (q >> np.arange(b)) & 1


def decode(v_bits) -> int:
    """Integer decoded from a binary vector (LSB first).

    The result may exceed the number of valid modes; callers must check it
    against the valid set themselves.
    """
    v = np.asarray(v_bits)
    if v.ndim != 1:
        raise DomainError("decode expects a single binary vector")
    if not np.all((v == 0) | (v == 1)):
        raise DomainError(f"decode requires exactly binary components, got {v_bits}")
    return int(np.sum((1 << np.arange(v.size)) * v.astype(np.int64)))


@lru_cache(maxsize=None)
def bit_matrix(bit_count: int) -> np.ndarray:
    """All vertex bit patterns: shape ``(2**b, b)``, row k = bits of k."""
    b = int(bit_count)
    k = np.arange(2**b)
    bits = (k[:, None] >> np.arange(b)[None, :]) & 1
    bits.setflags(write=False)
    return bits


def _check_box(v: np.ndarray) -> np.ndarray:
    if np.min(v) < -_BOX_TOL or np.max(v) > 1.0 + _BOX_TOL:
        raise DomainError(
            f"relaxed switching vector outside [0,1]: min={np.min(v)}, max={np.max(v)}"
        )
    return np.clip(v, 0.0, 1.0)


def vertex_weights(v, bit_count: int) -> np.ndarray:
    """Multilinear weights of every hypercube vertex at the point ``v``.

    ``V_k(v) = prod_i [k_i v_i + (1 - k_i)(1 - v_i)]`` for ``k`` in
    ``0 .. 2**b - 1``.  The weights are a partition of unity on ``[0,1]^b``.

    Accepts ``v`` of shape ``(b,)`` or ``(J, b)``; returns ``(2**b,)`` or
    ``(J, 2**b)``.
    """
    v = _check_box(np.asarray(v, dtype=float))
    bits = bit_matrix(bit_count)
    # terms[..., k, i] = k_i v_i + (1 - k_i)(1 - v_i)
    terms = np.where(bits, v[..., None, :], 1.0 - v[..., None, :])
    return terms.prod(axis=-1)


def vertex_weight(k: int, v) -> float:
    """Weight of vertex ``k`` at point ``v`` (scalar form)."""
    v = np.asarray(v, dtype=float)
    b = v.shape[-1]
    if not 0 <= int(k) < 2**b:
        raise DomainError(f"vertex index {k} out of range for {b} bits")
    return float(vertex_weights(v, b)[..., int(k)])


def _leave_one_out(terms: np.ndarray) -> np.ndarray:
    """Products over the last axis with one factor removed.

    ``out[..., i] = prod_{j != i} terms[..., j]`` computed by forward and
    backward cumulative products, which is stable when factors are zero.
    """
    fwd = np.ones_like(terms)
    bwd = np.ones_like(terms)
    np.cumprod(terms[..., :-1], axis=-1, out=fwd[..., 1:])
    np.cumprod(terms[..., :0:-1], axis=-1, out=bwd[..., -2::-1])
    return fwd * bwd


def vertex_weight_gradients(v, bit_count: int) -> np.ndarray:
    """Gradients of every vertex weight with respect to ``v``.

    ``out[..., k, i] = dV_k/dv_i = (2 k_i - 1) * prod_{j != i} term_kj``.
    Shapes follow :func:`vertex_weights` with a trailing axis of length ``b``.
    """
    v = _check_box(np.asarray(v, dtype=float))
    bits = bit_matrix(bit_count)
    terms = np.where(bits, v[..., None, :], 1.0 - v[..., None, :])
    sign = 2.0 * bits - 1.0
    return sign * _leave_one_out(terms)


def vertex_weight_gradient(k: int, v) -> np.ndarray:
    """Gradient of a single vertex weight (scalar form)."""
    v = np.asarray(v, dtype=float)
    b = v.shape[-1]
    if not 0 <= int(k) < 2**b:
        raise DomainError(f"vertex index {k} out of range for {b} bits")
    return vertex_weight_gradients(v, b)[..., int(k), :]


@dataclass(frozen=True)
class EmbeddingConfig:
    """Parameters of the binary embedding and its penalty.

    Attributes:
        mode_count: number of valid modes M (valid indices are 0 .. M-1).
        bit_count: number of binary variables, minimal for M.
        alpha: weight of the fractionality penalty ``sum v_i (1 - v_i)``.
        beta: weight of the invalid-vertex penalty (products over set bits
            of every index ``k >= M``).  Ignored when ``M == 2**bit_count``.
    """

    mode_count: int
    bit_count: int
    alpha: float
    beta: float

    def __post_init__(self):
        if num_bits(self.mode_count) != self.bit_count:
            raise ConfigError(
                f"bit_count={self.bit_count} is not minimal for "
                f"mode_count={self.mode_count}"
            )
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("penalty weights must be non-negative")
        if self.beta == 0 and self.mode_count < 2**self.bit_count:
            raise ConfigError(
                "beta must be positive when invalid bit patterns exist "
                f"(mode_count={self.mode_count} < {2**self.bit_count})"
            )

    @classmethod
    def for_modes(cls, mode_count: int, alpha: float, beta: float | None = None):
        """Config with minimal bit count; ``beta`` defaults to ``alpha``."""
        return cls(
            mode_count=int(mode_count),
            bit_count=num_bits(mode_count),
            alpha=float(alpha),
            beta=float(alpha if beta is None else beta),
        )

    def scaled_alpha(self, factor: float) -> "EmbeddingConfig":
        """Copy with the fractionality weight scaled (continuation stages)."""
        return replace(self, alpha=self.alpha * factor)

    @property
    def invalid_indices(self) -> np.ndarray:
        return np.arange(self.mode_count, 2**self.bit_count)


def penalty(v, cfg: EmbeddingConfig):
    """Concave auxiliary penalty driving ``v`` to valid binary vertices.

    ``alpha * sum_i v_i (1 - v_i) + beta * sum_{k >= M} prod_{i: k_i = 1} v_i``

    Zero exactly on binary vectors decoding to a valid mode; positive on
    fractional vectors and (for positive beta) on binary vectors decoding
    to an invalid index.  Note the invalid-vertex products run over set
    bits only, so every point with those bits at 1 pays the term
    regardless of the remaining coordinates.

    Accepts ``(b,)`` or ``(J, b)``; returns a scalar or ``(J,)``.
    """
    v = _check_box(np.asarray(v, dtype=float))
    scalar = v.ndim == 1
    val = cfg.alpha * np.sum(v * (1.0 - v), axis=-1)
    invalid = cfg.invalid_indices
    if invalid.size and cfg.beta != 0.0:
        bits = bit_matrix(cfg.bit_count)[invalid]
        factors = np.where(bits, v[..., None, :], 1.0)
        val = val + cfg.beta * factors.prod(axis=-1).sum(axis=-1)
    return float(val) if scalar else val


def penalty_gradient(v, cfg: EmbeddingConfig) -> np.ndarray:
    """Analytic gradient of :func:`penalty` with respect to ``v``."""
    v = _check_box(np.asarray(v, dtype=float))
    grad = cfg.alpha * (1.0 - 2.0 * v)
    invalid = cfg.invalid_indices
    if invalid.size and cfg.beta != 0.0:
        bits = bit_matrix(cfg.bit_count)[invalid]
        factors = np.where(bits, v[..., None, :], 1.0)
        # d/dv_i of prod over set bits = (leave-one-out product) on set bits.
        grad = grad + cfg.beta * np.sum(bits * _leave_one_out(factors), axis=-2)
    return grad
