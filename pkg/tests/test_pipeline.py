"""Pipeline: lossless round trips, probe/skip semantics, chunk independence."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from znn.codecs import SelectionMode
from znn.container import Method, container_from_bytes
from znn.dtypes import BF16, FP16, FP32, OPAQUE
from znn.errors import ChecksumMismatch, CorruptPayload, InvalidHeader, MisalignedInput
from znn.pipeline import (
    CompressConfig,
    GroupProbeState,
    ProbeDecision,
    compress,
    compress_stream,
    decompress,
    decompress_chunk,
    decompress_stream,
    probe_or_skip,
    record_probe_result,
)

from conftest import gaussian_bf16_bytes


# --- probe/skip state machine --------------------------------------------------

def test_fresh_state_probes():
    assert probe_or_skip(GroupProbeState()) is ProbeDecision.PROBE


def test_incompressible_probe_skips_window_then_probes():
    cfg = CompressConfig(dtype=OPAQUE, skip_window=15)
    state = GroupProbeState()
    assert probe_or_skip(state) is ProbeDecision.PROBE          # chunk 1
    record_probe_result(state, ratio=1.0, cfg=cfg)
    decisions = [probe_or_skip(state) for _ in range(16)]        # chunks 2..17
    assert decisions[:15] == [ProbeDecision.STORE_RAW] * 15
    assert decisions[15] is ProbeDecision.PROBE                  # 17th chunk probes


def test_compressible_probes_never_skip():
    cfg = CompressConfig(dtype=OPAQUE, skip_window=15)
    state = GroupProbeState()
    for _ in range(50):
        assert probe_or_skip(state) is ProbeDecision.PROBE
        record_probe_result(state, ratio=0.5, cfg=cfg)
        assert not state.last_probe_incompressible


def test_threshold_is_strict():
    cfg = CompressConfig(dtype=OPAQUE, skip_window=3)
    state = GroupProbeState()
    record_probe_result(state, ratio=cfg.incompressible_threshold, cfg=cfg)
    assert state.remaining_skips == 0
    record_probe_result(state, ratio=cfg.incompressible_threshold + 1e-9, cfg=cfg)
    assert state.remaining_skips == 3


# --- config validation ----------------------------------------------------------

def test_config_validation():
    with pytest.raises(InvalidHeader):
        CompressConfig(dtype=FP32, chunk_size=100)
    with pytest.raises(InvalidHeader):
        CompressConfig(dtype=BF16, skip_window=-1)
    with pytest.raises(InvalidHeader):
        CompressConfig(dtype=BF16, incompressible_threshold=0.0)
    with pytest.raises(InvalidHeader):
        CompressConfig(dtype=BF16, worker_count=0)


# --- round trips -----------------------------------------------------------------

@given(
    dtype=st.sampled_from([OPAQUE, FP32, BF16, FP16]),
    n_elems=st.integers(0, 40000),
    chunk_mult=st.sampled_from([1, 3, 64]),
    workers=st.sampled_from([1, 4]),
    kind=st.sampled_from(["random", "gauss", "zero", "sparse"]),
    seed=st.integers(0, 2**31),
)
@settings(deadline=None, max_examples=60)
def test_lossless_property(dtype, n_elems, chunk_mult, workers, kind, seed):
    rng = np.random.default_rng(seed)
    n = n_elems * dtype.element_bytes
    if kind == "random":
        data = rng.integers(0, 256, n, dtype=np.uint32).astype(np.uint8).tobytes()
    elif kind == "gauss":
        data = rng.normal(0, 0.02, n // 4 * 4 // 4).astype(np.float32).tobytes()[:n - n % dtype.element_bytes]
    elif kind == "zero":
        data = bytes(n)
    else:
        arr = np.zeros(n, dtype=np.uint8)
        idx = rng.integers(0, n, max(n // 50, 1)) if n else []
        arr[idx] = rng.integers(1, 256, len(idx) if n else 0)
        data = arr.tobytes()
    cfg = CompressConfig(
        dtype=dtype, chunk_size=chunk_mult * 8 * dtype.element_bytes, worker_count=workers
    )
    c = compress_stream(data, cfg)
    assert decompress_stream(c, workers) == data
    assert c.byte_size <= len(data) + c.header.byte_size + 5 * c.methods.size + 4


def test_worker_counts_agree():
    data = gaussian_bf16_bytes(3 << 20, seed=9)
    blobs = []
    for workers in (1, 8):
        cfg = CompressConfig(dtype=BF16, worker_count=workers)
        blobs.append(compress_stream(data, cfg).to_bytes())
    assert blobs[0] == blobs[1]
    c = container_from_bytes(blobs[0])
    assert decompress_stream(c, 1) == decompress_stream(c, 8) == data


def test_chunk_independence():
    data = gaussian_bf16_bytes(2 << 20, seed=10)
    c = compress_stream(data, CompressConfig(dtype=BF16))
    offs = c.offsets
    for ci in range(c.header.chunk_count):
        lo = ci * c.header.chunk_size
        hi = min(lo + c.header.chunk_size, len(data))
        assert decompress_chunk(c, ci, offs) == data[lo:hi]


def test_single_group_random_access():
    # any (chunk, group) payload is decodable from header + table alone
    from znn.codecs import decode_group
    from znn.regroup import regroup

    data = gaussian_bf16_bytes(1 << 20, seed=11)
    c = compress_stream(data, CompressConfig(dtype=BF16))
    offs = c.offsets
    for ci in (0, c.header.chunk_count - 1):
        lo = ci * c.header.chunk_size
        expected = regroup(data[lo:lo + c.header.chunk_raw_len(ci)], BF16)
        for g in range(2):
            payload = c.group_payload(ci, g, offs)
            decoded = decode_group(int(c.methods[ci, g]), payload, c.header.group_raw_len(ci))
            assert decoded == expected.groups[g].tobytes()


def test_checksum_mismatch_on_flipped_byte():
    data = gaussian_bf16_bytes(1 << 18, seed=12)
    blob = bytearray(compress_stream(data, CompressConfig(dtype=BF16)).to_bytes())
    # flip a byte well inside the payload
    blob[len(blob) // 2] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        decompress_stream(container_from_bytes(bytes(blob)))


def test_misaligned_input_rejected():
    with pytest.raises(MisalignedInput):
        compress_stream(b"\x00" * 7, CompressConfig(dtype=FP32))


def test_group_stream_sizes_follow_dtype():
    # 256KB chunks: BF16 groups are 128KB, FP32 groups are 64KB
    data = bytes(1 << 20)
    c16 = compress_stream(data, CompressConfig(dtype=BF16))
    assert c16.header.group_raw_len(0) == 131072
    c32 = compress_stream(data, CompressConfig(dtype=FP32))
    assert c32.header.group_raw_len(0) == 65536


def test_all_zero_collapses():
    data = bytes(4 << 20)
    c = compress_stream(data, CompressConfig(dtype=BF16))
    assert (c.methods == Method.ZERO_TRUNCATED).all()
    assert c.byte_size < len(data) * 0.01
    assert decompress_stream(c) == data


def test_random_opaque_stored_with_bounded_overhead():
    rng = np.random.default_rng(13)
    data = rng.integers(0, 256, 4 << 20, dtype=np.uint32).astype(np.uint8).tobytes()
    c = compress_stream(data, CompressConfig(dtype=OPAQUE))
    assert (c.methods == Method.STORED).all()
    overhead = c.header.byte_size + 5 * c.methods.size + 4
    assert c.byte_size == len(data) + overhead
    assert decompress_stream(c) == data


def test_force_stored_mode_is_verbatim():
    data = gaussian_bf16_bytes(1 << 19, seed=14)
    c = compress_stream(data, CompressConfig(dtype=BF16, mode=SelectionMode.FORCE_STORED))
    assert (c.methods == Method.STORED).all()
    assert decompress_stream(c) == data


def test_skip_window_only_costs_ratio_not_correctness():
    # half compressible, half random junk alternating by chunk keeps the
    # probe machine busy; both settings must round-trip, skipping only
    # trades compressed size
    rng = np.random.default_rng(15)
    parts = []
    for i in range(24):
        if i % 2:
            parts.append(rng.integers(0, 256, 131072, dtype=np.uint32).astype(np.uint8).tobytes())
        else:
            parts.append(bytes([3, 1, 4, 1, 5, 9]) * (131072 // 6) + b"\x00\x00")
    data = b"".join(parts)
    sizes = {}
    for window in (0, 15):
        cfg = CompressConfig(dtype=OPAQUE, chunk_size=65536, skip_window=window)
        c = compress_stream(data, cfg)
        assert decompress_stream(c) == data
        sizes[window] = c.byte_size
    assert sizes[15] >= sizes[0]


def test_exponent_group_never_skipped():
    # group 0 of a float dtype is probed every chunk even when it starts
    # out incompressible: compressible content later in the stream is found
    rng = np.random.default_rng(16)
    junk = rng.integers(0, 256, 1 << 20, dtype=np.uint32).astype(np.uint8).tobytes()
    model = gaussian_bf16_bytes(1 << 20, seed=17)
    c = compress_stream(junk + model, CompressConfig(dtype=BF16, chunk_size=65536))
    half = c.header.chunk_count // 2
    assert (c.methods[half + 1:, 0] == Method.HUFFMAN).all()
    assert decompress_stream(c) == junk + model


def test_decompress_validates_table():
    data = gaussian_bf16_bytes(1 << 18, seed=18)
    c = compress_stream(data, CompressConfig(dtype=BF16))
    bad = container_from_bytes(c.to_bytes())
    bad.methods[0, 0] = 7
    with pytest.raises(CorruptPayload):
        decompress_stream(bad)


def test_empty_input():
    for dtype in (OPAQUE, BF16):
        blob = compress(b"", dtype)
        assert decompress(blob) == b""


def test_convenience_wrappers():
    data = gaussian_bf16_bytes(1 << 16, seed=19)
    assert decompress(compress(data, BF16), worker_count=2) == data
