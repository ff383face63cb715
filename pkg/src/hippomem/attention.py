"""Memory-augmented attention block forward pass (toy scale, no training).

Per block: project Q/K/V, rotate Q/K by absolute position, reconstruct a
fixed-length history summary from the key/value memory states, attend over
[memory rows, current rows] under a trapezoidal mask, then fold the block's
raw keys and values into the states for the next block.

Two deliberate asymmetries, both load-bearing:
  * memory rows receive no rotary encoding (their position is intrinsic to
    the reconstruction), while current rows do;
  * the keys compressed into memory are the pre-rotary projections, since
    compression operates on the underlying signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .block_kernel import BlockKernelBank, block_update
from .discretization import MemoryState, Scheme
from .reconstruction import ReconstructionBank, SamplingStrategy, retrieve

__all__ = [
    "AttentionConfig",
    "AttentionWeights",
    "BlockIO",
    "BlockResult",
    "MASK_NEG",
    "init_weights",
    "build_trapezoidal_mask",
    "apply_rotary",
    "forward_block",
]

# Large negative sentinel standing in for -inf in additive masks; keeps the
# softmax arithmetic finite.
MASK_NEG = -1e30


@dataclass(frozen=True)
class AttentionConfig:
    model_dim: int
    head_count: int
    head_dim: int
    block_length: int
    mem_length: int
    hippo_order: int
    scheme: Scheme
    strategy: SamplingStrategy
    rope_base: float = 10000.0

    def __post_init__(self) -> None:
        if self.model_dim != self.head_count * self.head_dim:
            raise ValueError(
                f"model_dim {self.model_dim} != head_count {self.head_count} "
                f"* head_dim {self.head_dim}"
            )
        for name in ("model_dim", "head_count", "head_dim", "block_length", "hippo_order"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        # mem_length 0 disables retrieval and reduces the block to plain
        # causal attention
        if self.mem_length < 0:
            raise ValueError("mem_length must be >= 0")
        if self.head_dim % 2:
            raise ValueError("head_dim must be even for rotary encoding")
        if self.rope_base <= 0:
            raise ValueError("rope_base must be positive")


@dataclass(frozen=True)
class AttentionWeights:
    """Dense projection matrices, each model_dim x model_dim."""

    w_query: np.ndarray
    w_key: np.ndarray
    w_value: np.ndarray
    w_output: np.ndarray


def init_weights(cfg: AttentionConfig, seed: int) -> AttentionWeights:
    """Seeded scaled-normal projections (std 1/sqrt(model_dim)); no training here."""
    d = cfg.model_dim
    scale = 1.0 / np.sqrt(d)
    mats = [
        scale * rng.normals(rng.derive(seed, tag), d * d).reshape(d, d)
        for tag in range(4)
    ]
    return AttentionWeights(*mats)


@dataclass(frozen=True)
class BlockIO:
    """Inputs to one block step: hidden rows plus the per-channel memory states.

    Key and value states must agree and equal block_index - 1 blocks absorbed.
    Channels are laid out head-major: channel h * head_dim + d belongs to
    head h.
    """

    hidden: np.ndarray          # (L, model_dim)
    key_state: MemoryState      # raw-key memory, (N, model_dim)
    value_state: MemoryState    # value memory, (N, model_dim)
    block_index: int

    def __post_init__(self) -> None:
        if self.block_index < 1:
            raise ValueError("block_index must be >= 1")
        expected = self.block_index - 1
        if (self.key_state.blocks_absorbed != expected
                or self.value_state.blocks_absorbed != expected):
            raise ValueError(
                f"states must have absorbed {expected} blocks, got "
                f"{self.key_state.blocks_absorbed}/{self.value_state.blocks_absorbed}"
            )


@dataclass(frozen=True)
class BlockResult:
    output: np.ndarray          # (L, model_dim)
    key_state: MemoryState
    value_state: MemoryState
    probabilities: np.ndarray   # (H, L, mem_rows + L)
    memory_keys: np.ndarray     # (mem_rows, model_dim); 0 rows when retrieval off
    memory_values: np.ndarray


def build_trapezoidal_mask(block_length: int, mem_length: int) -> np.ndarray:
    """Additive mask of shape (L, mem_length + L).

    Memory columns are visible to every query; in-block columns are causal
    (column position <= query position).
    """
    if block_length < 1:
        raise ValueError("block_length must be >= 1")
    if mem_length < 0:
        raise ValueError("mem_length must be >= 0")
    mask = np.zeros((block_length, mem_length + block_length))
    p = np.arange(block_length)[:, None]
    q = np.arange(block_length)[None, :]
    mask[:, mem_length:] = np.where(q <= p, 0.0, MASK_NEG)
    return mask


def apply_rotary(mat: np.ndarray, start_position: int, base: float) -> np.ndarray:
    """Rotate each (2i, 2i+1) pair of every row by position * base**(-2i/D).

    Rows get absolute positions start_position, start_position + 1, ...;
    pure rotation, so pairwise norms are preserved.
    """
    mat = np.asarray(mat, dtype=float)
    length, dim = mat.shape
    if dim % 2:
        raise ValueError(f"rotary encoding needs an even dimension, got {dim}")
    freqs = base ** (-np.arange(0, dim, 2, dtype=float) / dim)
    angles = (start_position + np.arange(length, dtype=float))[:, None] * freqs[None, :]
    cos, sin = np.cos(angles), np.sin(angles)
    even, odd = mat[:, 0::2], mat[:, 1::2]
    out = np.empty_like(mat)
    out[:, 0::2] = even * cos - odd * sin
    out[:, 1::2] = even * sin + odd * cos
    return out


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def _heads(mat: np.ndarray, head_count: int, head_dim: int) -> np.ndarray:
    """(L, H*D) -> (H, L, D), head-major channel layout."""
    length = mat.shape[0]
    return mat.reshape(length, head_count, head_dim).transpose(1, 0, 2)


def forward_block(
    io: BlockIO,
    weights: AttentionWeights,
    cfg: AttentionConfig,
    kernel_bank: BlockKernelBank,
    recon_bank: ReconstructionBank | None,
) -> BlockResult:
    """Run one block and return the output plus updated memory states.

    Block 1 sees no memory rows (nothing absorbed yet); with mem_length 0 the
    block is plain causal self-attention. State updates happen after the
    attention read, so a block never attends to its own compression.
    """
    hidden = np.asarray(io.hidden, dtype=float)
    ell, h, dh = cfg.block_length, cfg.head_count, cfg.head_dim
    if hidden.shape != (ell, cfg.model_dim):
        raise ValueError(f"hidden shape {hidden.shape} != ({ell}, {cfg.model_dim})")
    use_memory = cfg.mem_length > 0 and io.block_index > 1
    if use_memory and recon_bank is None:
        raise ValueError("mem_length > 0 and history present, but no reconstruction bank")

    q_raw = hidden @ weights.w_query
    k_raw = hidden @ weights.w_key
    v_curr = hidden @ weights.w_value

    start = (io.block_index - 1) * ell
    q_heads = np.stack([
        apply_rotary(part, start, cfg.rope_base)
        for part in _heads(q_raw, h, dh)
    ])
    k_heads = np.stack([
        apply_rotary(part, start, cfg.rope_base)
        for part in _heads(k_raw, h, dh)
    ])
    v_heads = _heads(v_curr, h, dh)

    if use_memory:
        k_mem = retrieve(io.key_state, recon_bank)      # (L_mem, model_dim), no rotary
        v_mem = retrieve(io.value_state, recon_bank)
        k_aug = np.concatenate([_heads(k_mem, h, dh), k_heads], axis=1)
        v_aug = np.concatenate([_heads(v_mem, h, dh), v_heads], axis=1)
        mem_rows = cfg.mem_length
    else:
        k_mem = np.zeros((0, cfg.model_dim))
        v_mem = np.zeros((0, cfg.model_dim))
        k_aug, v_aug = k_heads, v_heads
        mem_rows = 0

    mask = build_trapezoidal_mask(ell, mem_rows)
    scores = q_heads @ k_aug.transpose(0, 2, 1) / np.sqrt(dh) + mask[None]
    probs = _softmax_rows(scores)
    att = probs @ v_aug                                  # (H, L, dh)
    merged = att.transpose(1, 0, 2).reshape(ell, cfg.model_dim)
    output = merged @ weights.w_output

    key_state = block_update(io.key_state, k_raw, kernel_bank)
    value_state = block_update(io.value_state, v_curr, kernel_bank)
    return BlockResult(
        output=output,
        key_state=key_state,
        value_state=value_state,
        probabilities=probs,
        memory_keys=k_mem,
        memory_values=v_mem,
    )
