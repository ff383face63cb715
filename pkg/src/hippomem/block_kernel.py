"""Block-parallel form of the memory recurrence.

Unrolling the per-step recurrence over a block of L inputs gives
C_i = P_i C_{i-1} + K_i F_i, where P_i is the ordered product of the step
matrices in block i and column j of K_i is the product of the step matrices
above position j times that step's input vector. Both depend on the absolute
block position i because the ODE is time-varying, so they are precomputed
once per position and cached in a bank.

Block i (1-based) covers steps k = (i-1)L+1 .. iL.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import (
    MemoryState,
    Scheme,
    _check_finite,
    _freeze,
    discretize_interval,
    segment_coefficients,
    transition_power,
)
from .operators import HippoOperator

__all__ = ["BlockKernelBank", "build_bank", "block_update"]


@dataclass(frozen=True)
class BlockKernelBank:
    """Per-position transition matrices P_i and input kernels K_i.

    transitions[i-1] is the N x N product of step matrices for block i;
    kernels[i-1] is the N x L operator folding block i's inputs into the
    state. Immutable; share freely across concurrent sequence processors.
    """

    block_length: int
    order: int
    scheme: Scheme
    transitions: np.ndarray  # (max_blocks, N, N)
    kernels: np.ndarray      # (max_blocks, N, L)
    max_blocks: int

    def transition(self, i: int) -> np.ndarray:
        """P_i for 1-based block position i."""
        if not 1 <= i <= self.max_blocks:
            raise IndexError(f"block position {i} outside 1..{self.max_blocks}")
        return self.transitions[i - 1]

    def kernel(self, i: int) -> np.ndarray:
        """K_i for 1-based block position i."""
        if not 1 <= i <= self.max_blocks:
            raise IndexError(f"block position {i} outside 1..{self.max_blocks}")
        return self.kernels[i - 1]


def build_bank(
    op: HippoOperator, block_length: int, scheme: Scheme, max_blocks: int
) -> BlockKernelBank:
    """Precompute P_i and K_i for every block position i = 1 .. max_blocks.

    For ZOH the step products telescope: P_i is a single matrix power and the
    kernel columns are consecutive differences of `segment_coefficients`.
    Other schemes accumulate the per-step matrices directly.
    """
    if block_length < 1:
        raise ValueError(f"block_length must be >= 1, got {block_length}")
    if max_blocks < 1:
        raise ValueError(f"max_blocks must be >= 1, got {max_blocks}")
    n, ell = op.order, block_length
    transitions = np.empty((max_blocks, n, n))
    kernels = np.empty((max_blocks, n, ell))

    for i in range(1, max_blocks + 1):
        first, last = (i - 1) * ell + 1, i * ell
        horizon = last + 1
        if scheme is Scheme.ZOH:
            transitions[i - 1] = transition_power(op, first / horizon)
            seg = segment_coefficients(op, np.arange(first, horizon + 1) / horizon)
            kernels[i - 1] = (seg[1:] - seg[:-1]).T
        else:
            prod = np.eye(n)
            for k in range(last, first - 1, -1):
                a_bar, b_bar = discretize_interval(op, float(k), float(k + 1), scheme)
                kernels[i - 1][:, k - first] = prod @ b_bar
                prod = prod @ a_bar
            transitions[i - 1] = prod
    _check_finite(scheme, transitions, kernels)
    return BlockKernelBank(
        block_length=block_length,
        order=n,
        scheme=scheme,
        transitions=_freeze(transitions),
        kernels=_freeze(kernels),
        max_blocks=max_blocks,
    )


def block_update(
    state: MemoryState, inputs: np.ndarray, bank: BlockKernelBank
) -> MemoryState:
    """Fold one block of inputs into the state: C <- P_i C + K_i F_i.

    Equivalent to applying the per-step recurrence over the block token by
    token; two matrix multiplications regardless of block length.
    """
    position = state.blocks_absorbed + 1
    if position > bank.max_blocks:
        raise ValueError(
            f"bank capacity exhausted: block {position} > max_blocks {bank.max_blocks}"
        )
    if state.order != bank.order:
        raise ValueError(f"state order {state.order} != bank order {bank.order}")
    f = np.asarray(inputs, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape != (bank.block_length, state.channel_count):
        raise ValueError(
            f"inputs shape {f.shape} != ({bank.block_length}, {state.channel_count})"
        )
    coeffs = bank.transition(position) @ state.coefficients + bank.kernel(position) @ f
    return MemoryState(coeffs, blocks_absorbed=position)
