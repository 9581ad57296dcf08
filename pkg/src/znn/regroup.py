"""Exponent extraction and byte grouping.

Each element is read as a little-endian unsigned integer and rotated left
by one bit, which moves the sign bit down next to the low fraction bits and
byte-aligns the exponent field in the most significant byte.  Byte k of the
rotated value (counting from the most significant byte) lands in group k,
so group 0 is the exponent stream for FP32/BF16 and the groups of a chunk
can be compressed independently.  The transform is a pure byte permutation
and is exactly invertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtypes import DType
from .errors import LengthMismatch, MisalignedInput

_UINT_FOR_WIDTH = {2: np.uint16, 4: np.uint32}


@dataclass
class GroupedChunk:
    groups: list[np.ndarray]
    element_count: int
    dtype: DType


def _as_u8(chunk) -> np.ndarray:
    if isinstance(chunk, np.ndarray):
        if chunk.dtype != np.uint8:
            raise TypeError("expected a uint8 array")
        return chunk
    return np.frombuffer(chunk, dtype=np.uint8)


def regroup(chunk, dtype: DType) -> GroupedChunk:
    data = _as_u8(chunk)
    if dtype.is_opaque:
        return GroupedChunk([data.copy()], data.size, dtype)
    eb = dtype.element_bytes
    if data.size % eb != 0:
        raise MisalignedInput(f"{data.size} bytes is not a multiple of {eb}")
    n = data.size // eb
    ut = _UINT_FOR_WIDTH[eb]
    bits = 8 * eb
    v = data.view(ut)
    rotated = (v << ut(1)) | (v >> ut(bits - 1))
    m = rotated.view(np.uint8).reshape(n, eb)
    # little-endian memory order puts the most significant byte last
    groups = [np.ascontiguousarray(m[:, eb - 1 - k]) for k in range(eb)]
    return GroupedChunk(groups, n, dtype)


def ungroup(g: GroupedChunk) -> bytes:
    n = g.groups[0].size
    for arr in g.groups[1:]:
        if arr.size != n:
            raise LengthMismatch(
                f"group lengths differ: {[int(a.size) for a in g.groups]}"
            )
    if g.dtype.is_opaque:
        return g.groups[0].tobytes()
    eb = g.dtype.element_bytes
    ut = _UINT_FOR_WIDTH[eb]
    bits = 8 * eb
    m = np.empty((n, eb), dtype=np.uint8)
    for k, arr in enumerate(g.groups):
        m[:, eb - 1 - k] = arr
    rotated = m.reshape(-1).view(ut)
    v = (rotated >> ut(1)) | (rotated << ut(bits - 1))
    return v.tobytes()
