"""CRC32C (Castagnoli) over byte buffers.

Used for container payload integrity.  The table is built once at import;
the byte loop itself is jitted (see _kernels.crc32c_kernel).
"""

from __future__ import annotations

import numpy as np

from ._kernels import crc32c_kernel

_POLY = 0x82F63B78


def _build_tables() -> np.ndarray:
    tables = np.empty((8, 256), dtype=np.uint32)
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ _POLY if c & 1 else c >> 1
        tables[0, i] = c
    for k in range(1, 8):
        prev = tables[k - 1]
        tables[k] = tables[0][prev & 0xFF] ^ (prev >> 8)
    return tables


_TABLES = _build_tables()


def crc32c(data, crc: int = 0) -> int:
    """CRC32C of data, optionally continuing from a previous value."""
    buf = np.frombuffer(data, dtype=np.uint8) if not isinstance(data, np.ndarray) else data
    return int(crc32c_kernel(buf, crc, _TABLES))
