"""File-level operations: safetensors parsing and .znn file assembly.

Two file shapes exist:

* raw containers — the entire input as one stream with a caller-supplied
  dtype (the standalone Container layout from container.py).
* safetensors-aware containers — an envelope holding the original JSON
  header verbatim plus one standalone inner container per tensor, each
  compressed with its own dtype, chunking restarted at tensor boundaries.

Envelope layout after the envelope header (safetensors flag set,
total_size = 0, chunk_count = 0):

    u32 manifest_len | manifest JSON | original header blob |
    inner containers back-to-back | u32 CRC32C(manifest + header blob)

The manifest records the original file size, blob length and, per tensor,
its name/dtype/shape, byte range in the data region, and the inner
container's length, so any tensor can be located without touching the
others.  Inner containers carry their own checksums.
"""

from __future__ import annotations

import hashlib
import json
import struct
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .codecs import SelectionMode
from .container import (
    CHECKSUM_LEN,
    Container,
    ContainerHeader,
    container_from_bytes,
    decode_header,
    encode_header,
    make_header,
)
from .crc import crc32c
from .delta import apply_delta, compress_delta, sha256
from .dtypes import BF16, FP16, FP32, OPAQUE, DType
from .errors import (
    BaseDigestMismatch,
    ChecksumMismatch,
    InvalidHeader,
    LengthMismatch,
    MalformedHeader,
    OverlappingSpans,
    SpanOutOfBounds,
)
from .pipeline import CompressConfig, write_container

_SAFETENSORS_DTYPES = {"F32": FP32, "BF16": BF16, "F16": FP16}


@dataclass(frozen=True)
class TensorSpan:
    name: str
    dtype: DType
    shape: tuple[int, ...]
    start: int  # relative to the data region
    end: int


def parse_safetensors(file_bytes) -> tuple[bytes, list[TensorSpan]]:
    """Extract the JSON header bytes and the tensor spans of a safetensors
    file.  Spans must tile the data region exactly, without overlaps."""
    buf = memoryview(file_bytes)
    if len(buf) < 8:
        raise MalformedHeader(f"{len(buf)} bytes is too short for a length prefix")
    (n,) = struct.unpack("<Q", buf[:8])
    if 8 + n > len(buf):
        raise MalformedHeader(f"header length {n} exceeds file size {len(buf)}")
    header_json = bytes(buf[8:8 + n])
    try:
        doc = json.loads(header_json)
    except (ValueError, UnicodeDecodeError) as e:
        raise MalformedHeader(f"header is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise MalformedHeader("header JSON is not an object")
    data_len = len(buf) - 8 - n

    spans = []
    for name, info in doc.items():
        if name == "__metadata__":
            continue
        if not isinstance(info, dict) or not {"dtype", "shape", "data_offsets"} <= info.keys():
            raise MalformedHeader(f"tensor {name!r} is missing required keys")
        offs = info["data_offsets"]
        if (not isinstance(offs, (list, tuple)) or len(offs) != 2
                or not all(isinstance(o, int) for o in offs)):
            raise MalformedHeader(f"tensor {name!r} has malformed data_offsets")
        start, end = offs
        if start < 0 or end < start:
            raise MalformedHeader(f"tensor {name!r} has negative or inverted offsets")
        if end > data_len:
            raise SpanOutOfBounds(f"tensor {name!r} ends at {end}, data region is {data_len}")
        shape = tuple(info["shape"])
        dtype = _SAFETENSORS_DTYPES.get(info["dtype"], OPAQUE)
        if not dtype.is_opaque:
            expected = dtype.element_bytes * int(np.prod(shape, dtype=np.int64)) if shape else dtype.element_bytes
            if end - start != expected:
                raise MalformedHeader(
                    f"tensor {name!r}: span of {end - start} bytes does not match "
                    f"shape {shape} ({expected} bytes)"
                )
        spans.append(TensorSpan(name, dtype, shape, start, end))

    spans.sort(key=lambda s: (s.start, s.end, s.name))
    cursor = 0
    for s in spans:
        if s.start < cursor:
            raise OverlappingSpans(f"tensor {s.name!r} overlaps the previous span")
        if s.start > cursor:
            raise MalformedHeader(f"gap in data region before tensor {s.name!r}")
        cursor = max(cursor, s.end)
    if cursor != data_len:
        raise MalformedHeader(f"spans cover {cursor} of {data_len} data bytes")
    return header_json, spans


def map_file(path: str) -> np.ndarray:
    import os

    size = os.path.getsize(path)
    if size == 0:
        return np.empty(0, dtype=np.uint8)
    return np.memmap(path, dtype=np.uint8, mode="r")


def file_sha256(data) -> bytes:
    h = hashlib.sha256()
    view = memoryview(data)
    for pos in range(0, len(view), 1 << 24):
        h.update(view[pos:pos + (1 << 24)])
    return h.digest()


def _tensor_configs(spans: list[TensorSpan], cfg: CompressConfig):
    for span in spans:
        # chunk_size must stay a multiple of 8*element_bytes for each dtype
        step = 8 * span.dtype.element_bytes
        chunk = cfg.chunk_size - cfg.chunk_size % step
        if chunk <= 0:
            chunk = step
        yield span, replace(cfg, dtype=span.dtype, chunk_size=chunk)


def _manifest_bytes(file_size: int, blob_len: int, rows: list[dict], delta: bool) -> bytes:
    return json.dumps({
        "file_size": file_size,
        "header_blob_len": blob_len,
        "delta": delta,
        "tensors": rows,
    }, sort_keys=True).encode()


def compress_safetensors_file(data, out, cfg: CompressConfig) -> dict:
    """Compress a parsed safetensors byte buffer into the envelope format,
    streaming inner containers through a temp file."""
    header_json, spans = parse_safetensors(data)
    blob_len = 8 + len(header_json)
    blob = bytes(memoryview(data)[:blob_len])
    region = np.frombuffer(data, dtype=np.uint8, offset=blob_len) if len(data) > blob_len \
        else np.empty(0, dtype=np.uint8)

    rows = []
    stats = []
    with tempfile.TemporaryFile() as inners:
        for span, tcfg in _tensor_configs(spans, cfg):
            start_pos = inners.tell()
            st = write_container(region[span.start:span.end], tcfg, inners)
            rows.append({
                "name": span.name,
                "dtype": span.dtype.name,
                "shape": list(span.shape),
                "data_start": span.start,
                "data_len": span.end - span.start,
                "container_len": inners.tell() - start_pos,
            })
            stats.append(st)
        manifest = _manifest_bytes(len(data), blob_len, rows, delta=False)
        env_header = make_header(OPAQUE, cfg.chunk_size - cfg.chunk_size % 8 or 8, 0,
                                 safetensors=True)
        out.write(encode_header(env_header))
        out.write(struct.pack("<I", len(manifest)))
        out.write(manifest)
        out.write(blob)
        inners.seek(0)
        while True:
            block = inners.read(1 << 22)
            if not block:
                break
            out.write(block)
        out.write(struct.pack("<I", crc32c(manifest + blob)))
    return {"tensors": rows, "stats": stats, "blob_len": blob_len, "file_size": len(data)}


@dataclass
class Envelope:
    header: "ContainerHeader"
    manifest: dict
    blob: bytes
    inner_offsets: list[int]  # absolute offsets of inner containers
    raw: np.ndarray

    def inner_container(self, i: int) -> Container:
        start = self.inner_offsets[i]
        length = self.manifest["tensors"][i]["container_len"]
        return container_from_bytes(self.raw[start:start + length])


def read_envelope(data) -> Envelope:
    raw = data if isinstance(data, np.ndarray) else np.frombuffer(data, dtype=np.uint8)
    header = decode_header(raw)
    if not header.safetensors:
        raise InvalidHeader("not a safetensors envelope")
    pos = header.byte_size
    if len(raw) < pos + 4:
        raise InvalidHeader("envelope truncated before manifest")
    (mlen,) = struct.unpack("<I", raw[pos:pos + 4])
    pos += 4
    if len(raw) < pos + mlen:
        raise InvalidHeader("envelope truncated inside manifest")
    manifest_bytes = bytes(raw[pos:pos + mlen])
    pos += mlen
    try:
        manifest = json.loads(manifest_bytes)
    except ValueError as e:
        raise InvalidHeader(f"bad manifest JSON: {e}") from None
    blob_len = manifest["header_blob_len"]
    if len(raw) < pos + blob_len:
        raise InvalidHeader("envelope truncated inside header blob")
    blob = bytes(raw[pos:pos + blob_len])
    pos += blob_len
    offsets = []
    for row in manifest["tensors"]:
        offsets.append(pos)
        pos += row["container_len"]
    if len(raw) != pos + CHECKSUM_LEN:
        raise InvalidHeader(f"envelope length {len(raw)} != expected {pos + CHECKSUM_LEN}")
    (crc,) = struct.unpack("<I", raw[pos:pos + CHECKSUM_LEN])
    if crc32c(manifest_bytes + blob) != crc:
        raise ChecksumMismatch("envelope metadata checksum mismatch")
    return Envelope(header, manifest, blob, offsets, raw)


def decompress_safetensors_file(data, out, worker_count: int = 1) -> int:
    """Rebuild the original safetensors file from an envelope; returns the
    byte count written."""
    from .pipeline import iter_decoded_chunks

    env = read_envelope(data)
    if env.header.delta:
        raise InvalidHeader("delta container requires a base (use patch)")
    out.write(env.blob)
    written = len(env.blob)
    for i, row in enumerate(env.manifest["tensors"]):
        tensor_written = 0
        for chunk in iter_decoded_chunks(env.inner_container(i), worker_count):
            out.write(chunk)
            tensor_written += len(chunk)
        if tensor_written != row["data_len"]:
            raise LengthMismatch(
                f"tensor {row['name']!r} decoded to {tensor_written} bytes, "
                f"expected {row['data_len']}"
            )
        written += tensor_written
    if written != env.manifest["file_size"]:
        raise LengthMismatch(
            f"reassembled {written} bytes, expected {env.manifest['file_size']}"
        )
    return written


def compress_model_file(in_path: str, out_path: str, cfg: CompressConfig,
                        raw_dtype: DType | None = None) -> dict:
    """Compress a model file.  With raw_dtype the whole file is one stream;
    otherwise the file must parse as safetensors and each tensor is
    compressed with its own dtype."""
    data = map_file(in_path)
    with open(out_path, "wb") as out:
        if raw_dtype is not None:
            rcfg = replace(cfg, dtype=raw_dtype)
            return {"raw": write_container(data, rcfg, out)}
        return compress_safetensors_file(data, out, cfg)


def decompress_model_file(in_path: str, out_path: str, worker_count: int = 1) -> int:
    from .pipeline import iter_decoded_chunks

    data = map_file(in_path)
    header = decode_header(data)
    with open(out_path, "wb") as out:
        if header.safetensors:
            return decompress_safetensors_file(data, out, worker_count)
        if header.delta:
            raise InvalidHeader("delta container requires a base (use patch)")
        written = 0
        for chunk in iter_decoded_chunks(container_from_bytes(data), worker_count):
            out.write(chunk)
            written += len(chunk)
        return written


def _same_layout(a: list[TensorSpan], b: list[TensorSpan]) -> bool:
    return a == b


def delta_model_file(base_path: str, target_path: str, out_path: str,
                     cfg: CompressConfig, raw_dtype: DType | None = None) -> dict:
    """Write a delta container for target against base.

    safetensors pairs with identical tensor layouts get per-tensor deltas
    (the target's header blob is stored verbatim); anything else falls back
    to a whole-file XOR with the supplied raw dtype.
    """
    base = map_file(base_path)
    target = map_file(target_path)

    pair = None
    if raw_dtype is None:
        try:
            bj, bspans = parse_safetensors(base)
            tj, tspans = parse_safetensors(target)
            if _same_layout(bspans, tspans):
                pair = (bj, bspans, tj, tspans)
        except (MalformedHeader, OverlappingSpans, SpanOutOfBounds):
            pair = None

    if pair is None:
        if base.size != target.size:
            raise LengthMismatch(
                f"base is {base.size} bytes, target {target.size}; "
                "layout-matched safetensors or equal-length raw files required"
            )
        dtype = raw_dtype or OPAQUE
        dcfg = replace(cfg, dtype=dtype, mode=SelectionMode.DELTA_AUTO
                       if cfg.mode is SelectionMode.MODEL else cfg.mode)
        container = compress_delta(base, target, dcfg)
        blob = container.to_bytes()
        with open(out_path, "wb") as out:
            out.write(blob)
        return {"mode": "raw", "container_bytes": len(blob), "raw_bytes": int(target.size)}

    bj, bspans, tj, tspans = pair
    base_blob_len = 8 + len(bj)
    target_blob_len = 8 + len(tj)
    base_region = np.frombuffer(base, dtype=np.uint8, offset=base_blob_len) \
        if base.size > base_blob_len else np.empty(0, dtype=np.uint8)
    target_region = np.frombuffer(target, dtype=np.uint8, offset=target_blob_len) \
        if target.size > target_blob_len else np.empty(0, dtype=np.uint8)
    blob = bytes(memoryview(target)[:target_blob_len])

    rows = []
    total = 0
    with tempfile.TemporaryFile() as inners, open(out_path, "wb") as out:
        for span, tcfg in _tensor_configs(tspans, cfg):
            start_pos = inners.tell()
            container = compress_delta(
                base_region[span.start:span.end], target_region[span.start:span.end], tcfg
            )
            inner_blob = container.to_bytes()
            inners.write(inner_blob)
            rows.append({
                "name": span.name,
                "dtype": span.dtype.name,
                "shape": list(span.shape),
                "data_start": span.start,
                "data_len": span.end - span.start,
                "container_len": inners.tell() - start_pos,
            })
        manifest = _manifest_bytes(int(target.size), target_blob_len, rows, delta=True)
        env_header = make_header(OPAQUE, cfg.chunk_size - cfg.chunk_size % 8 or 8, 0,
                                 safetensors=True, delta=True,
                                 base_digest=file_sha256(base))
        out.write(encode_header(env_header))
        out.write(struct.pack("<I", len(manifest)))
        out.write(manifest)
        out.write(blob)
        inners.seek(0)
        while True:
            block = inners.read(1 << 22)
            if not block:
                break
            total += len(block)
            out.write(block)
        out.write(struct.pack("<I", crc32c(manifest + blob)))
    import os

    return {"mode": "safetensors", "container_bytes": os.path.getsize(out_path),
            "raw_bytes": int(target.size), "tensors": rows}


def patch_model_file(base_path: str, delta_path: str, out_path: str,
                     worker_count: int = 1) -> int:
    """Apply a delta file to its base, reconstructing the target file."""
    base = map_file(base_path)
    data = map_file(delta_path)
    header = decode_header(data)
    if not header.delta:
        raise InvalidHeader("not a delta container")
    if header.safetensors:
        env = read_envelope(data)
        if file_sha256(base) != header.base_digest:
            raise BaseDigestMismatch("base file does not match the delta's digest")
        _, bspans = parse_safetensors(base)
        base_blob_len = 8 + struct.unpack("<Q", bytes(memoryview(base)[:8]))[0]
        base_region = np.frombuffer(base, dtype=np.uint8, offset=base_blob_len) \
            if base.size > base_blob_len else np.empty(0, dtype=np.uint8)
        spans_by_name = {s.name: s for s in bspans}
        with open(out_path, "wb") as out:
            out.write(env.blob)
            written = len(env.blob)
            for i, row in enumerate(env.manifest["tensors"]):
                span = spans_by_name[row["name"]]
                chunk = apply_delta(
                    base_region[span.start:span.end], env.inner_container(i), worker_count
                )
                out.write(chunk)
                written += len(chunk)
        return written
    container = container_from_bytes(data)
    out_bytes = apply_delta(base, container, worker_count)
    with open(out_path, "wb") as out:
        out.write(out_bytes)
    return len(out_bytes)
