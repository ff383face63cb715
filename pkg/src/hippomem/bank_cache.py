"""Binary cache files for precomputed banks.

Both bank kinds share one little-endian layout so repeated CLI invocations
skip the N^3-scale precomputation:

    magic      4 bytes  b"EMKB" (kernel bank) or b"EMRB" (reconstruction bank)
    version    u32
    order      u32      N
    block_len  u32      L
    tag        u32      scheme tag (EMKB) or strategy tag (EMRB)
    max_blocks u32
    mem_length u32      0 for EMKB
    decay      f64      0.0 for EMKB
    checksum   u32      crc32 of the payload
    payload    row-major f64 matrices in index order
               EMKB: all P_i, then all K_i
               EMRB: all R_i, then all sample-point rows

A corrupt or mismatched file is rebuilt, never trusted.
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from .block_kernel import BlockKernelBank, build_bank
from .discretization import Scheme, _freeze
from .operators import HippoOperator
from .reconstruction import (
    ReconstructionBank,
    SamplingKind,
    SamplingStrategy,
    build_reconstruction_bank,
)

__all__ = [
    "CacheError",
    "kernel_bank_path",
    "reconstruction_bank_path",
    "write_kernel_bank",
    "read_kernel_bank",
    "write_reconstruction_bank",
    "read_reconstruction_bank",
    "load_or_build_kernel_bank",
    "load_or_build_reconstruction_bank",
]

_MAGIC_KERNEL = b"EMKB"
_MAGIC_RECON = b"EMRB"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIIdI")

_SCHEME_TAGS = {
    Scheme.ZOH: 0,
    Scheme.FORWARD_EULER: 1,
    Scheme.BACKWARD_EULER: 2,
    Scheme.BILINEAR: 3,
}
_SCHEME_FROM_TAG = {v: k for k, v in _SCHEME_TAGS.items()}
_STRATEGY_TAGS = {SamplingKind.UNIFORM: 0, SamplingKind.EXPONENTIAL: 1}
_STRATEGY_FROM_TAG = {v: k for k, v in _STRATEGY_TAGS.items()}


class CacheError(ValueError):
    """Cache file is missing, corrupt, or describes different parameters."""


def kernel_bank_path(cache_dir: str, order: int, block_length: int,
                     scheme: Scheme, max_blocks: int) -> str:
    name = f"kernel_N{order}_L{block_length}_{scheme.value}_B{max_blocks}.emkb"
    return os.path.join(cache_dir, name)


def reconstruction_bank_path(cache_dir: str, order: int, block_length: int,
                             strategy: SamplingStrategy, mem_length: int,
                             max_blocks: int) -> str:
    name = (f"recon_N{order}_L{block_length}_{strategy.label()}"
            f"_M{mem_length}_B{max_blocks}.emrb")
    return os.path.join(cache_dir, name)


def _write(path: str, magic: bytes, order: int, block_length: int, tag: int,
           max_blocks: int, mem_length: int, decay: float,
           payload_arrays: list[np.ndarray]) -> int:
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                       for a in payload_arrays)
    header = _HEADER.pack(magic, _VERSION, order, block_length, tag,
                          max_blocks, mem_length, decay, zlib.crc32(payload))
    data = header + payload
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return len(data)


def _read(path: str, magic: bytes) -> tuple[tuple, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CacheError(f"cannot read cache file {path}: {exc}") from exc
    if len(data) < _HEADER.size:
        raise CacheError(f"cache file {path} truncated")
    fields = _HEADER.unpack_from(data)
    if fields[0] != magic:
        raise CacheError(f"cache file {path} has wrong magic {fields[0]!r}")
    if fields[1] != _VERSION:
        raise CacheError(f"cache file {path} has unsupported version {fields[1]}")
    payload = data[_HEADER.size:]
    if zlib.crc32(payload) != fields[8]:
        raise CacheError(f"cache file {path} failed its checksum")
    return fields, np.frombuffer(payload, dtype="<f8")


def write_kernel_bank(path: str, bank: BlockKernelBank) -> int:
    """Serialize a kernel bank; returns bytes written."""
    return _write(path, _MAGIC_KERNEL, bank.order, bank.block_length,
                  _SCHEME_TAGS[bank.scheme], bank.max_blocks, 0, 0.0,
                  [bank.transitions, bank.kernels])


def read_kernel_bank(path: str) -> BlockKernelBank:
    fields, flat = _read(path, _MAGIC_KERNEL)
    _, _, order, block_length, tag, max_blocks, _, _, _ = fields
    if tag not in _SCHEME_FROM_TAG:
        raise CacheError(f"cache file {path} has unknown scheme tag {tag}")
    n_trans = max_blocks * order * order
    n_kern = max_blocks * order * block_length
    if flat.size != n_trans + n_kern:
        raise CacheError(f"cache file {path} payload size mismatch")
    transitions = flat[:n_trans].reshape(max_blocks, order, order).copy()
    kernels = flat[n_trans:].reshape(max_blocks, order, block_length).copy()
    return BlockKernelBank(
        block_length=block_length,
        order=order,
        scheme=_SCHEME_FROM_TAG[tag],
        transitions=_freeze(transitions),
        kernels=_freeze(kernels),
        max_blocks=max_blocks,
    )


def write_reconstruction_bank(path: str, bank: ReconstructionBank) -> int:
    """Serialize a reconstruction bank; returns bytes written."""
    decay = bank.strategy.decay if bank.strategy.kind is SamplingKind.EXPONENTIAL else 0.0
    return _write(path, _MAGIC_RECON, bank.order, bank.block_length,
                  _STRATEGY_TAGS[bank.strategy.kind], bank.max_blocks,
                  bank.mem_length, decay, [bank.matrices, bank.points])


def read_reconstruction_bank(path: str) -> ReconstructionBank:
    fields, flat = _read(path, _MAGIC_RECON)
    _, _, order, block_length, tag, max_blocks, mem_length, decay, _ = fields
    if tag not in _STRATEGY_FROM_TAG:
        raise CacheError(f"cache file {path} has unknown strategy tag {tag}")
    kind = _STRATEGY_FROM_TAG[tag]
    strategy = (SamplingStrategy(kind, decay) if kind is SamplingKind.EXPONENTIAL
                else SamplingStrategy(kind))
    n_mat = max_blocks * mem_length * order
    n_pts = max_blocks * mem_length
    if flat.size != n_mat + n_pts:
        raise CacheError(f"cache file {path} payload size mismatch")
    matrices = flat[:n_mat].reshape(max_blocks, mem_length, order).copy()
    points = flat[n_mat:].reshape(max_blocks, mem_length).copy()
    return ReconstructionBank(
        mem_length=mem_length,
        order=order,
        block_length=block_length,
        strategy=strategy,
        matrices=_freeze(matrices),
        points=_freeze(points),
    )


def load_or_build_kernel_bank(
    cache_dir: str, op: HippoOperator, block_length: int, scheme: Scheme,
    max_blocks: int,
) -> tuple[BlockKernelBank, str, bool]:
    """Return (bank, path, cache_hit); rebuilds and rewrites on any mismatch."""
    os.makedirs(cache_dir, exist_ok=True)
    path = kernel_bank_path(cache_dir, op.order, block_length, scheme, max_blocks)
    if os.path.exists(path):
        try:
            bank = read_kernel_bank(path)
            if (bank.order, bank.block_length, bank.scheme, bank.max_blocks) == (
                    op.order, block_length, scheme, max_blocks):
                return bank, path, True
        except CacheError:
            pass
    bank = build_bank(op, block_length, scheme, max_blocks)
    write_kernel_bank(path, bank)
    return bank, path, False


def load_or_build_reconstruction_bank(
    cache_dir: str, op: HippoOperator, strategy: SamplingStrategy,
    mem_length: int, block_length: int, max_blocks: int,
) -> tuple[ReconstructionBank, str, bool]:
    """Return (bank, path, cache_hit); rebuilds and rewrites on any mismatch."""
    os.makedirs(cache_dir, exist_ok=True)
    path = reconstruction_bank_path(cache_dir, op.order, block_length,
                                    strategy, mem_length, max_blocks)
    if os.path.exists(path):
        try:
            bank = read_reconstruction_bank(path)
            if (bank.order, bank.block_length, bank.strategy, bank.mem_length,
                    bank.max_blocks) == (op.order, block_length, strategy,
                                         mem_length, max_blocks):
                return bank, path, True
        except CacheError:
            pass
    bank = build_reconstruction_bank(op, strategy, mem_length, block_length, max_blocks)
    write_reconstruction_bank(path, bank)
    return bank, path, False
