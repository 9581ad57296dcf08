import json
import struct

import numpy as np
import pytest

from znn.dtypes import BF16


def bf16_round_nearest(f32: np.ndarray) -> np.ndarray:
    """Round float32 to bfloat16 bit patterns (round-to-nearest-even)."""
    u = f32.astype(np.float32).view(np.uint32)
    return ((u + 0x7FFF + ((u >> 16) & 1)) >> 16).astype(np.uint16)


def gaussian_bf16_bytes(n_bytes: int, sigma: float = 0.02, seed: int = 0) -> bytes:
    rng = np.random.default_rng(seed)
    vals = rng.normal(0, sigma, n_bytes // 2).astype(np.float32)
    return bf16_round_nearest(vals).tobytes()


def gaussian_f32_bytes(n_bytes: int, sigma: float = 0.02, seed: int = 0) -> bytes:
    rng = np.random.default_rng(seed)
    return rng.normal(0, sigma, n_bytes // 4).astype(np.float32).tobytes()


def clean_f32_bytes(n_bytes: int, sigma: float = 0.02, seed: int = 0) -> bytes:
    """A 'clean' model: non-negative weights rounded to 8 fraction bits, so
    the two low byte-groups of the rotated layout are exactly zero."""
    rng = np.random.default_rng(seed)
    vals = np.abs(rng.normal(0, sigma, n_bytes // 4)).astype(np.float32)
    u = vals.view(np.uint32) & np.uint32(0xFFFF8000)
    return u.tobytes()


def make_safetensors(tensors, metadata=None) -> bytes:
    """tensors: list of (name, dtype_str, numpy array or raw bytes)."""
    header = {}
    if metadata:
        header["__metadata__"] = metadata
    blobs = []
    off = 0
    for name, dtype_str, arr in tensors:
        b = arr.tobytes() if isinstance(arr, np.ndarray) else bytes(arr)
        shape = list(arr.shape) if isinstance(arr, np.ndarray) else [len(b)]
        header[name] = {"dtype": dtype_str, "shape": shape, "data_offsets": [off, off + len(b)]}
        off += len(b)
        blobs.append(b)
    hj = json.dumps(header).encode()
    return struct.pack("<Q", len(hj)) + hj + b"".join(blobs)


@pytest.fixture(scope="session")
def gauss_bf16_64mb() -> bytes:
    return gaussian_bf16_bytes(64 << 20, seed=7)


@pytest.fixture(scope="session")
def warm_kernels():
    """Force JIT compilation ahead of any timed assertion."""
    from znn.pipeline import CompressConfig, compress_stream, decompress_stream

    data = gaussian_bf16_bytes(1 << 16, seed=1)
    c = compress_stream(data, CompressConfig(dtype=BF16, chunk_size=16384))
    assert decompress_stream(c) == data
    return True
