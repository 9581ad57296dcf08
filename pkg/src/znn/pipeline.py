"""Chunked compression pipeline.

The stream is cut into fixed-size chunks (256KB by default), each chunk is
regrouped into per-byte-position streams, and every (chunk, group) cell is
encoded independently.  Method decisions are resolved strictly in chunk
order by a cheap sequential pass (histogram + code lengths give the exact
Huffman payload size without packing any bits), then the actual encoding
runs in parallel over chunks.  Decisions therefore never depend on worker
scheduling and output is deterministic for any worker count.

Incompressibility skip: when a probed group's ratio exceeds the configured
threshold, the following ``skip_window`` chunks of that group stream are
stored raw without probing.  The exponent group of floating-point dtypes is
exempt and is probed every chunk.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import codecs
from .codecs import SelectionMode
from .container import Container, ContainerHeader, Method, make_header
from .crc import crc32c
from .dtypes import DType
from .errors import ChecksumMismatch, CorruptPayload, InvalidHeader, MisalignedInput
from .regroup import GroupedChunk, regroup, ungroup

DEFAULT_CHUNK_SIZE = 262144
DEFAULT_SKIP_WINDOW = 15


@dataclass
class CompressConfig:
    dtype: DType
    chunk_size: int = DEFAULT_CHUNK_SIZE
    mode: SelectionMode = SelectionMode.MODEL
    skip_window: int = DEFAULT_SKIP_WINDOW
    incompressible_threshold: float = codecs.INCOMPRESSIBLE_RATIO
    worker_count: int = 1

    def __post_init__(self):
        step = 8 * self.dtype.element_bytes
        if self.chunk_size <= 0 or self.chunk_size % step != 0:
            raise InvalidHeader(
                f"chunk_size {self.chunk_size} must be a positive multiple of {step}"
            )
        if self.skip_window < 0:
            raise InvalidHeader("skip_window must be >= 0")
        if not 0 < self.incompressible_threshold <= 1:
            raise InvalidHeader("incompressible_threshold must be in (0, 1]")
        if self.worker_count < 1:
            raise InvalidHeader("worker_count must be >= 1")


class ProbeDecision(Enum):
    PROBE = "probe"
    STORE_RAW = "store_raw"


@dataclass
class GroupProbeState:
    remaining_skips: int = 0
    last_probe_incompressible: bool = False


def probe_or_skip(state: GroupProbeState) -> ProbeDecision:
    """Counter semantics of the skip heuristic: consume one pending skip or
    probe.  The caller reports probe outcomes via record_probe_result."""
    if state.remaining_skips > 0:
        state.remaining_skips -= 1
        return ProbeDecision.STORE_RAW
    return ProbeDecision.PROBE


def record_probe_result(state: GroupProbeState, ratio: float, cfg: CompressConfig) -> None:
    state.last_probe_incompressible = ratio > cfg.incompressible_threshold
    if state.last_probe_incompressible:
        state.remaining_skips = cfg.skip_window


@dataclass
class _GroupPlan:
    method: Method
    # HUFFMAN keeps its code lengths and exact payload size from the probe;
    # LZ keeps the payload computed during the sequential pass
    lengths: np.ndarray | None = None
    payload_size: int = 0
    payload: bytes | None = None


class _ChunkResult:
    __slots__ = ("methods", "lens", "payloads")

    def __init__(self, methods, lens, payloads):
        self.methods = methods
        self.lens = lens
        self.payloads = payloads


def _as_u8(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        if data.dtype != np.uint8:
            raise TypeError("expected a uint8 array")
        return data
    return np.frombuffer(data, dtype=np.uint8)


class _Encoder:
    def __init__(self, data: np.ndarray, cfg: CompressConfig, header: ContainerHeader):
        self.data = data
        self.cfg = cfg
        self.header = header
        self.states = [GroupProbeState() for _ in range(cfg.dtype.group_count)]

    def plan_group(self, g: int, arr: np.ndarray) -> _GroupPlan:
        cfg = self.cfg
        if cfg.mode is SelectionMode.FORCE_STORED:
            return _GroupPlan(Method.STORED)
        # the exponent stream is universally compressible; never skip it
        exempt = g == 0 and not cfg.dtype.is_opaque
        if not exempt and probe_or_skip(self.states[g]) is ProbeDecision.STORE_RAW:
            return _GroupPlan(Method.STORED)

        counts = codecs.byte_histogram(arr)
        zero_count = int(counts[0])
        if zero_count == arr.size:
            return _GroupPlan(Method.ZERO_TRUNCATED)
        method = codecs.select_method(arr, cfg.mode, zero_count=zero_count)

        if method == Method.HUFFMAN:
            lengths, nbytes = codecs.huffman_plan(counts)
            ratio = nbytes / arr.size
            if not exempt:
                record_probe_result(self.states[g], ratio, cfg)
            if nbytes >= arr.size:
                return _GroupPlan(Method.STORED)
            return _GroupPlan(Method.HUFFMAN, lengths=lengths, payload_size=nbytes)

        payload = zlib.compress(arr.tobytes(), codecs.DEFLATE_LEVEL)
        ratio = len(payload) / arr.size
        if not exempt:
            record_probe_result(self.states[g], ratio, cfg)
        if len(payload) >= arr.size:
            return _GroupPlan(Method.STORED)
        return _GroupPlan(Method.LZ_ENTROPY, payload=payload)

    def plan_chunk(self, c: int) -> tuple[list[np.ndarray], list[_GroupPlan]]:
        start = c * self.cfg.chunk_size
        stop = min(start + self.cfg.chunk_size, self.header.total_size)
        grouped = regroup(self.data[start:stop], self.cfg.dtype)
        return grouped.groups, [self.plan_group(g, arr) for g, arr in enumerate(grouped.groups)]

    @staticmethod
    def encode_chunk(groups: list[np.ndarray], plans: list[_GroupPlan]) -> _ChunkResult:
        gc = len(groups)
        methods = np.empty(gc, dtype=np.uint8)
        lens = np.empty(gc, dtype=np.int64)
        payloads: list[bytes] = []
        for g, (arr, plan) in enumerate(zip(groups, plans)):
            if plan.method == Method.STORED:
                payload = arr.tobytes()
            elif plan.method == Method.ZERO_TRUNCATED:
                payload = b""
            elif plan.method == Method.HUFFMAN:
                payload = codecs.huffman_encode_planned(arr, plan.lengths, plan.payload_size)
            else:
                payload = plan.payload
            methods[g] = plan.method
            lens[g] = len(payload)
            payloads.append(payload)
        return _ChunkResult(methods, lens, payloads)


def iter_encoded_chunks(data, cfg: CompressConfig, header: ContainerHeader):
    """Yield one _ChunkResult per chunk, in order, with bounded memory.

    Decisions run sequentially wave by wave; the bit-level encoding of a
    wave fans out to cfg.worker_count threads.
    """
    enc = _Encoder(data, cfg, header)
    wave = max(8, 4 * cfg.worker_count)
    pool = ThreadPoolExecutor(cfg.worker_count) if cfg.worker_count > 1 else None
    try:
        for wave_start in range(0, header.chunk_count, wave):
            wave_chunks = [
                enc.plan_chunk(c)
                for c in range(wave_start, min(wave_start + wave, header.chunk_count))
            ]
            if pool is None:
                results = [enc.encode_chunk(g, p) for g, p in wave_chunks]
            else:
                results = list(pool.map(lambda gp: enc.encode_chunk(*gp), wave_chunks))
            yield from results
    finally:
        if pool is not None:
            pool.shutdown()


def compress_stream(data, cfg: CompressConfig, *, delta_base_digest: bytes | None = None,
                    safetensors: bool = False) -> Container:
    """Compress a whole buffer into an in-memory Container."""
    data = _as_u8(data)
    if not cfg.dtype.is_opaque and data.size % cfg.dtype.element_bytes != 0:
        raise MisalignedInput(
            f"{data.size} bytes is not a multiple of {cfg.dtype.element_bytes} "
            f"({cfg.dtype.name})"
        )
    header = make_header(
        cfg.dtype, cfg.chunk_size, data.size,
        delta=delta_base_digest is not None,
        safetensors=safetensors,
        base_digest=delta_base_digest,
    )
    gc = cfg.dtype.group_count
    methods = np.zeros((header.chunk_count, gc), dtype=np.uint8)
    lens = np.zeros((header.chunk_count, gc), dtype=np.int64)
    payloads: list[bytes] = []
    for c, res in enumerate(iter_encoded_chunks(data, cfg, header)):
        methods[c] = res.methods
        lens[c] = res.lens
        payloads.extend(res.payloads)
    return Container(header=header, methods=methods, stored_lens=lens, payload=b"".join(payloads))


def write_container(data, cfg: CompressConfig, out, *, delta_base_digest: bytes | None = None,
                    safetensors: bool = False, payload_spool=None) -> dict:
    """Stream-compress into the writable file object ``out``.

    The payload goes to a spool (a temp file) while the chunk table
    accumulates, then header/table/payload/checksum are written in order.
    Returns summary stats for reporting.  Working memory stays bounded by
    the wave size regardless of input length.
    """
    import struct
    import tempfile

    data = _as_u8(data)
    if not cfg.dtype.is_opaque and data.size % cfg.dtype.element_bytes != 0:
        raise MisalignedInput(
            f"{data.size} bytes is not a multiple of {cfg.dtype.element_bytes}"
        )
    header = make_header(
        cfg.dtype, cfg.chunk_size, data.size,
        delta=delta_base_digest is not None,
        safetensors=safetensors,
        base_digest=delta_base_digest,
    )
    gc = cfg.dtype.group_count
    methods = np.zeros((header.chunk_count, gc), dtype=np.uint8)
    lens = np.zeros((header.chunk_count, gc), dtype=np.int64)
    crc = 0
    own_spool = payload_spool is None
    spool = payload_spool if payload_spool is not None else tempfile.TemporaryFile()
    try:
        spool.seek(0)
        spool.truncate()
        for c, res in enumerate(iter_encoded_chunks(data, cfg, header)):
            methods[c] = res.methods
            lens[c] = res.lens
            for p in res.payloads:
                crc = crc32c(p, crc)
                spool.write(p)
        from .container import RECORD_DTYPE, encode_header

        out.write(encode_header(header))
        records = np.empty(header.chunk_count * gc, dtype=RECORD_DTYPE)
        records["method"] = methods.reshape(-1)
        records["len"] = lens.reshape(-1)
        out.write(records.tobytes())
        spool.seek(0)
        payload_len = 0
        while True:
            block = spool.read(1 << 22)
            if not block:
                break
            payload_len += len(block)
            out.write(block)
        out.write(struct.pack("<I", crc))
        container_bytes = header.byte_size + records.nbytes + payload_len + 4
        return {
            "raw_bytes": int(data.size),
            "container_bytes": container_bytes,
            "methods": methods,
            "stored_lens": lens,
            "header": header,
        }
    finally:
        if own_spool:
            spool.close()


def _decode_chunk(container: Container, offsets: np.ndarray, c: int) -> bytes:
    header = container.header
    raw = header.chunk_raw_len(c)
    group_len = header.group_raw_len(c)
    groups = []
    for g in range(header.dtype.group_count):
        method = int(container.methods[c, g])
        payload = container.group_payload(c, g, offsets)
        decoded = codecs.decode_group(method, payload, group_len)
        groups.append(np.frombuffer(decoded, dtype=np.uint8))
    out = ungroup(GroupedChunk(groups, group_len, header.dtype))
    if len(out) != raw:
        raise CorruptPayload(f"chunk {c} decoded to {len(out)} bytes, expected {raw}")
    return out


def decompress_chunk(container: Container, c: int, offsets: np.ndarray | None = None) -> bytes:
    """Random access: decode a single chunk using only header + table."""
    offs = container.offsets if offsets is None else offsets
    return _decode_chunk(container, offs, c)


def _validate_table(container: Container) -> None:
    header = container.header
    if container.methods.size == 0:
        return
    if int(container.methods.max()) > int(Method.ZERO_TRUNCATED):
        raise CorruptPayload(f"unknown method tag {int(container.methods.max())}")
    zt = container.methods == Method.ZERO_TRUNCATED
    if int(container.stored_lens[zt].sum()) != 0:
        raise CorruptPayload("zero-truncated record with nonzero stored_len")
    stored = container.methods == Method.STORED
    if stored.any():
        group_lens = np.array(
            [header.group_raw_len(c) for c in range(header.chunk_count)], dtype=np.int64
        )[:, None]
        if not (container.stored_lens[stored] == np.broadcast_to(
                group_lens, container.stored_lens.shape)[stored]).all():
            raise CorruptPayload("stored record length does not match chunk geometry")


def validate_container(container: Container) -> np.ndarray:
    """Checksum + structural validation; returns the payload offsets."""
    if crc32c(container.payload) != container.checksum:
        raise ChecksumMismatch("payload CRC32C does not match container checksum")
    offsets = container.offsets
    _validate_table(container)
    return offsets


def decompress_stream(container: Container, worker_count: int = 1) -> bytes:
    """Decode a container back to the original bytes, verifying the payload
    checksum first.  Chunks decode independently (in parallel if asked)."""
    offsets = validate_container(container)
    header = container.header
    out = np.empty(header.total_size, dtype=np.uint8)

    def run(c: int) -> None:
        chunk = _decode_chunk(container, offsets, c)
        start = c * header.chunk_size
        out[start:start + len(chunk)] = np.frombuffer(chunk, dtype=np.uint8)

    if worker_count > 1 and header.chunk_count > 1:
        with ThreadPoolExecutor(worker_count) as pool:
            list(pool.map(run, range(header.chunk_count)))
    else:
        for c in range(header.chunk_count):
            run(c)
    return out.tobytes()


def iter_decoded_chunks(container: Container, worker_count: int = 1):
    """Yield decoded chunks in order with bounded memory (wave-parallel)."""
    offsets = validate_container(container)
    cc = container.header.chunk_count
    if worker_count <= 1 or cc <= 1:
        for c in range(cc):
            yield _decode_chunk(container, offsets, c)
        return
    wave = 4 * worker_count
    with ThreadPoolExecutor(worker_count) as pool:
        for start in range(0, cc, wave):
            idx = range(start, min(start + wave, cc))
            yield from pool.map(lambda c: _decode_chunk(container, offsets, c), idx)


def compress(data, dtype: DType, **kwargs) -> bytes:
    """Convenience: buffer -> container bytes."""
    cfg = CompressConfig(dtype=dtype, **kwargs)
    return compress_stream(data, cfg).to_bytes()


def decompress(blob, worker_count: int = 1) -> bytes:
    """Convenience: container bytes -> original buffer."""
    from .container import container_from_bytes

    return decompress_stream(container_from_bytes(blob), worker_count)
