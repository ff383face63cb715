"""Discretization of the continuous memory ODE.

The coefficient vector obeys dc/dt = -(1/t) A c + (1/t) B f. A step over
[t0, t1] with the input held constant turns this into c1 = Abar c0 + Bbar f
under one of four schemes. The exact (zero-order hold) step matrix is the
matrix power (t0/t1)^A; the Euler and bilinear schemes approximate it.

Step k of a unit-grid sequence covers [k, k+1], so the step matrices depend
on the absolute position k. Indexing starts at k = 1: the 1/t coefficient is
singular at t = 0, so the Euler/bilinear family cannot start earlier. The
zero-order hold has a well-defined t0 = 0 limit (Abar -> 0, Bbar -> e0, the
exact absorption of a constant first segment), which `discretize_interval`
and `history_kernel` use.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular

from .operators import HippoOperator, legendre_table

__all__ = [
    "Scheme",
    "DiscreteStep",
    "MemoryState",
    "InstabilityError",
    "discretize_step",
    "discretize_interval",
    "sequential_update",
    "zero_state",
    "transition_power",
    "segment_coefficients",
    "history_kernel",
]


class Scheme(enum.Enum):
    """Discretization rule for one step of the time-varying ODE."""

    ZOH = "zoh"
    FORWARD_EULER = "forward"
    BACKWARD_EULER = "backward"
    BILINEAR = "bilinear"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        for member in cls:
            if member.value == name.lower():
                return member
        raise ValueError(f"unknown scheme {name!r}; expected one of "
                         f"{[m.value for m in cls]}")


class InstabilityError(ValueError):
    """A scheme produced a non-finite entry (e.g. forward Euler blow-up)."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteStep:
    """Position-dependent step matrices (Abar_k, Bbar_k) for one unit step."""

    step_index: int
    a_bar: np.ndarray
    b_bar: np.ndarray


@dataclass(frozen=True)
class MemoryState:
    """N x D coefficient matrix compressing a D-channel history.

    Each channel is an independent one-dimensional signal; `blocks_absorbed`
    counts whole blocks folded in by the block-update machinery. A state has
    a single writer at a time; updates return fresh states.
    """

    coefficients: np.ndarray
    blocks_absorbed: int = 0

    def __post_init__(self) -> None:
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.ndim != 2:
            raise ValueError(f"coefficients must be 2-D (N x D), got shape {coeffs.shape}")
        if not np.isfinite(coeffs).all():
            raise ValueError("coefficients contain non-finite entries")
        if self.blocks_absorbed < 0:
            raise ValueError("blocks_absorbed must be non-negative")
        object.__setattr__(self, "coefficients", _freeze(coeffs))

    @property
    def order(self) -> int:
        return self.coefficients.shape[0]

    @property
    def channel_count(self) -> int:
        return self.coefficients.shape[1]


def zero_state(order: int, channels: int) -> MemoryState:
    """Empty memory for a D-channel stream."""
    return MemoryState(np.zeros((order, channels)))


@lru_cache(maxsize=32)
def _gauss_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(count)
    return _freeze(nodes), _freeze(weights)


def transition_power(op: HippoOperator, ratio: float) -> np.ndarray:
    """The matrix power ratio**A for the lower-triangular operator A.

    Functionally, ratio**A re-expands projection coefficients from horizon t
    to horizon t/ratio with nothing appended, so entry (n, m) is the inner
    product of the zero-extended basis function g_m (on [0, ratio]) with g_n
    (on [0, 1]). The integrand is a polynomial of degree < 2N, so Gauss-
    Legendre quadrature with N+1 nodes evaluates it exactly; this stays
    stable at large N, unlike substitution recurrences or diagonalization,
    whose intermediates grow combinatorially for this matrix family.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    n = op.order
    if ratio == 0.0:
        return np.zeros((n, n))
    if ratio == 1.0:
        return np.eye(n)
    nodes, weights = _gauss_nodes(n + 2)
    x = ratio * (nodes + 1.0) / 2.0
    wx = weights * ratio / 2.0
    inner = legendre_table(2.0 * x / ratio - 1.0, n)      # g_m support, rescaled
    outer = legendre_table(2.0 * x - 1.0, n)              # g_n on the unit horizon
    sq = op.b_vector                                      # sqrt(2n+1)
    power = (outer * wx[:, None]).T @ inner * np.outer(sq, sq)
    # diagonal is analytically ratio**(n+1); pin it to kill quadrature roundoff
    np.fill_diagonal(power, ratio ** (np.arange(n) + 1.0))
    return power


def segment_coefficients(op: HippoOperator, ratios: np.ndarray) -> np.ndarray:
    """Projection coefficients of the indicator of [0, r] at unit horizon.

    Row j holds (r**A @ e0) for r = ratios[j], in closed form:
    psi_0(r) = r and psi_n(r) = (P_{n+1}(2r-1) - P_{n-1}(2r-1)) / (2 sqrt(2n+1)).
    Consecutive differences of these rows are the zero-order-hold kernel
    columns, which is what makes whole-history compression a single matmul.
    """
    ratios = np.atleast_1d(np.asarray(ratios, dtype=float))
    if ratios.size and (ratios.min() < 0.0 or ratios.max() > 1.0):
        raise ValueError("ratios must lie in [0, 1]")
    n = op.order
    table = legendre_table(2.0 * ratios - 1.0, n + 1)
    out = np.empty((ratios.size, n))
    out[:, 0] = ratios
    if n > 1:
        idx = np.arange(1, n)
        out[:, 1:] = (table[:, 2:n + 1] - table[:, 0:n - 1]) / (2.0 * np.sqrt(2.0 * idx + 1.0))
    return out


def _check_finite(scheme: Scheme, *arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.isfinite(arr).all():
            raise InstabilityError(
                f"{scheme.value} discretization produced non-finite entries"
            )


def discretize_interval(
    op: HippoOperator, t_start: float, t_end: float, scheme: Scheme
) -> tuple[np.ndarray, np.ndarray]:
    """Step matrices over [t_start, t_end] with the input held constant.

    t_start = 0 is allowed only for ZOH, where the limit is exact.
    """
    if t_end <= t_start:
        raise ValueError(f"need t_start < t_end, got [{t_start}, {t_end}]")
    if t_start < 0:
        raise ValueError(f"t_start must be >= 0, got {t_start}")
    a, b = op.a_matrix, op.b_vector
    n = op.order
    eye = np.eye(n)
    delta = t_end - t_start

    # overflow is surfaced by the finiteness check below, not as a warning
    with np.errstate(over="ignore", invalid="ignore"):
        if scheme is Scheme.ZOH:
            a_bar = transition_power(op, t_start / t_end)
            b_bar = solve_triangular(a, (eye - a_bar) @ b, lower=True)
        elif scheme is Scheme.FORWARD_EULER:
            if t_start == 0:
                raise ValueError("forward Euler is singular at t = 0")
            a_bar = eye - (delta / t_start) * a
            b_bar = (delta / t_start) * b
        elif scheme is Scheme.BACKWARD_EULER:
            lhs = eye + (delta / t_end) * a
            a_bar = solve_triangular(lhs, eye, lower=True)
            b_bar = solve_triangular(lhs, (delta / t_end) * b, lower=True)
        elif scheme is Scheme.BILINEAR:
            if t_start == 0:
                raise ValueError("bilinear is singular at t = 0")
            half = delta / (2.0 * t_start)
            lhs = eye + half * a
            a_bar = solve_triangular(lhs, eye - half * a, lower=True)
            b_bar = solve_triangular(lhs, (delta / t_start) * b, lower=True)
        else:  # pragma: no cover
            raise ValueError(f"unhandled scheme {scheme}")

    _check_finite(scheme, a_bar, b_bar)
    return a_bar, b_bar


def discretize_step(op: HippoOperator, k: int, scheme: Scheme) -> DiscreteStep:
    """Step matrices for unit step k (covering [k, k+1]); requires k >= 1."""
    if k < 1:
        raise ValueError(f"step index must be >= 1, got {k}")
    a_bar, b_bar = discretize_interval(op, float(k), float(k + 1), scheme)
    return DiscreteStep(step_index=k, a_bar=_freeze(a_bar), b_bar=_freeze(b_bar))


def sequential_update(
    state: MemoryState, input_row: np.ndarray, step: DiscreteStep
) -> MemoryState:
    """One recurrence step: C <- Abar_k C + Bbar_k f_k, channel-wise."""
    row = np.asarray(input_row, dtype=float).reshape(-1)
    if row.size != state.channel_count:
        raise ValueError(
            f"input has {row.size} channels, state has {state.channel_count}"
        )
    if step.a_bar.shape[0] != state.order:
        raise ValueError(
            f"step order {step.a_bar.shape[0]} does not match state order {state.order}"
        )
    coeffs = step.a_bar @ state.coefficients + np.outer(step.b_bar, row)
    return MemoryState(coeffs, blocks_absorbed=state.blocks_absorbed)


def history_kernel(op: HippoOperator, length: int, scheme: Scheme) -> np.ndarray:
    """N x length operator mapping a whole sample sequence to its final state.

    Sample a (0-based) is held over [a, a+1) and the state is read at horizon
    `length`. The first sample enters through the exact t -> 0 limit step, so
    a constant sequence compresses to exactly [c, 0, ..., 0]. Column a is the
    suffix product of step matrices above position a times that step's input
    vector; for ZOH the whole kernel collapses to consecutive differences of
    `segment_coefficients`.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    n = op.order
    if scheme is Scheme.ZOH:
        seg = segment_coefficients(op, np.arange(length + 1) / length)
        kernel = (seg[1:] - seg[:-1]).T
    else:
        kernel = np.empty((n, length))
        suffix = np.eye(n)
        for k in range(length - 1, 0, -1):
            a_bar, b_bar = discretize_interval(op, float(k), float(k + 1), scheme)
            kernel[:, k] = suffix @ b_bar
            suffix = suffix @ a_bar
        kernel[:, 0] = suffix[:, 0]  # suffix @ e0: exact first-sample absorption
    _check_finite(scheme, kernel)
    return kernel
