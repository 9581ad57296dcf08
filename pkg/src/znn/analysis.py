"""Diagnostics: exponent histograms, zero statistics, zero-order entropy,
and per-tensor compressibility reports.

entropy_bits_per_byte is the reference oracle the test suite uses to bound
Huffman output; it deliberately shares no code with the encoder.
"""

from __future__ import annotations

import numpy as np

from . import codecs
from .dtypes import DType
from .errors import EmptyInput, MisalignedInput, OpaqueUnsupported
from .pipeline import CompressConfig, compress_stream

zero_stats = codecs.zero_stats


def exponent_histogram(data, dtype: DType) -> np.ndarray:
    """counts[v] = number of elements whose exponent field equals v.

    FP16 exponents occupy values 0..31; the remaining bins stay zero.
    """
    if dtype.is_opaque:
        raise OpaqueUnsupported("opaque data has no exponent field")
    buf = data if isinstance(data, np.ndarray) else np.frombuffer(data, dtype=np.uint8)
    if buf.size % dtype.element_bytes != 0:
        raise MisalignedInput(
            f"{buf.size} bytes is not a multiple of {dtype.element_bytes}"
        )
    ut = np.uint16 if dtype.element_bytes == 2 else np.uint32
    v = buf.view(ut)
    exp = (v >> dtype.fraction_bits) & ((1 << dtype.exponent_bits) - 1)
    return np.bincount(exp.astype(np.int64), minlength=256).astype(np.int64)


def entropy_bits_per_byte(data) -> float:
    """Zero-order empirical entropy H = -sum p_i log2 p_i over byte counts."""
    buf = data if isinstance(data, np.ndarray) else np.frombuffer(data, dtype=np.uint8)
    if buf.size == 0:
        raise EmptyInput("entropy of empty input")
    counts = np.bincount(buf, minlength=256)
    p = counts[counts > 0] / buf.size
    return float(-(p * np.log2(p)).sum())


def sample_middle(data, n_bytes: int, element_bytes: int = 1) -> bytes:
    """Take n_bytes from the middle of the buffer, aligned to element size
    (the measurement convention used for very large models)."""
    buf = memoryview(data)
    if n_bytes >= len(buf):
        return bytes(buf)
    start = (len(buf) - n_bytes) // 2
    start -= start % element_bytes
    n_bytes -= n_bytes % element_bytes
    return bytes(buf[start:start + n_bytes])


def model_report(tensors, chunk_size: int | None = None, worker_count: int = 1) -> dict:
    """Compress each (name, dtype, bytes) tensor and report compressed size
    percentages, total and per byte-group.  Matches the JSON schema:
    {tensors: [{name, dtype, raw_bytes, compressed_pct, groups_pct}], total_pct}.
    """
    rows = []
    total_raw = 0
    total_compressed = 0
    for name, dtype, data in tensors:
        kwargs = {"dtype": dtype, "worker_count": worker_count}
        if chunk_size is not None:
            kwargs["chunk_size"] = chunk_size
        cfg = CompressConfig(**kwargs)
        container = compress_stream(data, cfg)
        raw = container.header.total_size
        total_raw += raw
        total_compressed += container.byte_size
        groups_pct = []
        for g in range(dtype.group_count):
            group_raw = sum(
                container.header.group_raw_len(c) for c in range(container.header.chunk_count)
            )
            stored = int(container.stored_lens[:, g].sum())
            groups_pct.append(round(stored / group_raw * 100, 1) if group_raw else 0.0)
        rows.append({
            "name": name,
            "dtype": dtype.name,
            "raw_bytes": int(raw),
            "compressed_pct": round(container.byte_size / raw * 100, 1) if raw else 0.0,
            "groups_pct": groups_pct,
        })
    return {
        "tensors": rows,
        "total_pct": round(total_compressed / total_raw * 100, 1) if total_raw else 0.0,
    }
