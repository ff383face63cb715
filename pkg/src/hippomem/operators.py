"""Scaled-Legendre projection operators.

The continuous-time memory system projects a history signal f onto the
orthonormal basis g_n(x) = sqrt(2n+1) P_n(2x/t - 1) over the expanding
window [0, t]. This module builds the fixed state matrices of that system
and evaluates the basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerated overshoot of |z| beyond 1 before evaluation is rejected; absorbs
# roundoff in 2x/t - 1 at x = t.
CLAMP_TOL = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HippoOperator:
    """Fixed (A, B) pair of the scaled-Legendre state system.

    A is lower triangular with A[n][n] = n+1 and A[n][k] = sqrt(2n+1)sqrt(2k+1)
    below the diagonal; B[n] = sqrt(2n+1). Immutable and safe to share.
    """

    order: int
    a_matrix: np.ndarray
    b_vector: np.ndarray


def build_operator(order: int) -> HippoOperator:
    """Construct the operator of the given order (number of coefficients)."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    n = np.arange(order)
    sq = np.sqrt(2.0 * n + 1.0)
    a = np.tril(np.outer(sq, sq), -1) + np.diag(n + 1.0)
    return HippoOperator(order=order, a_matrix=_freeze(a), b_vector=_freeze(sq))


def _clamp(z: float) -> float:
    if not -1.0 - CLAMP_TOL <= z <= 1.0 + CLAMP_TOL:
        raise ValueError(f"Legendre argument {z} outside [-1, 1] beyond clamp tolerance")
    return min(1.0, max(-1.0, z))


def legendre_eval(degree: int, z: float) -> float:
    """P_degree(z) by the Bonnet three-term recurrence."""
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    z = _clamp(float(z))
    if degree == 0:
        return 1.0
    prev, cur = 1.0, z
    for k in range(2, degree + 1):
        prev, cur = cur, ((2 * k - 1) * z * cur - (k - 1) * prev) / k
    return cur


def legendre_table(z: np.ndarray, count: int) -> np.ndarray:
    """P_0..P_{count-1} at each of the given points, shape (len(z), count).

    Same recurrence as `legendre_eval`, vectorized over points. Arguments are
    clamped like `legendre_eval`; values outside the tolerance are rejected.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size and (z.min() < -1.0 - CLAMP_TOL or z.max() > 1.0 + CLAMP_TOL):
        raise ValueError("Legendre argument outside [-1, 1] beyond clamp tolerance")
    z = np.clip(z, -1.0, 1.0)
    out = np.empty((z.size, count))
    out[:, 0] = 1.0
    if count > 1:
        out[:, 1] = z
    for k in range(2, count):
        out[:, k] = ((2 * k - 1) * z * out[:, k - 1] - (k - 1) * out[:, k - 2]) / k
    return out


@dataclass(frozen=True)
class BasisPoint:
    """A coordinate x within a history window [0, t]."""

    time_horizon: float
    coordinate: float

    def __post_init__(self) -> None:
        if self.time_horizon <= 0:
            raise ValueError(f"time_horizon must be positive, got {self.time_horizon}")
        if not 0.0 <= self.coordinate <= self.time_horizon:
            raise ValueError(
                f"coordinate {self.coordinate} outside [0, {self.time_horizon}]"
            )


def basis_eval(n: int, point: BasisPoint) -> float:
    """g_n(x) = sqrt(2n+1) P_n(2x/t - 1) at the given point."""
    z = 2.0 * point.coordinate / point.time_horizon - 1.0
    return np.sqrt(2.0 * n + 1.0) * legendre_eval(n, z)


def basis_matrix(xs: np.ndarray, t: float, count: int) -> np.ndarray:
    """Rows of basis values g_0..g_{count-1} at coordinates xs under horizon t."""
    if t <= 0:
        raise ValueError(f"time horizon must be positive, got {t}")
    xs = np.asarray(xs, dtype=float)
    sq = np.sqrt(2.0 * np.arange(count) + 1.0)
    return legendre_table(2.0 * xs / t - 1.0, count) * sq[None, :]
