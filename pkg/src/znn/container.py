"""The .znn container format.

Layout (all integers little-endian):

    magic       4 bytes  "ZNN1"
    version     u8       1
    flags       u8       bit0 delta, bit1 safetensors payload,
                         bits 2-3 reserved (0), bits 4-7 LZ backend id
                         (0 = deflate, the only backend of this build)
    dtype_code  u8
    group_count u8
    chunk_size  u32      uncompressed bytes per chunk
    total_size  u64      uncompressed byte count
    chunk_count u64      == ceil(total_size / chunk_size)
    base_digest 32 bytes SHA-256 of the delta base, present iff bit0 set

    chunk table: chunk_count * group_count records, chunk-major then
                 group-minor, each [method u8][stored_len u32]
    payload:     group payloads concatenated in table order
    checksum:    u32 CRC32C over payload

The header and table are contiguous so a parallel decompressor makes one
sequential metadata read and can then locate any (chunk, group) payload
from the prefix sums of stored_len.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .crc import crc32c
from .dtypes import DTYPES_BY_CODE, DType
from .errors import BadMagic, InvalidHeader, Overflow, UnsupportedBackend, UnsupportedVersion

MAGIC = b"ZNN1"
VERSION = 1
FIXED_HEADER_LEN = 28
DIGEST_LEN = 32
RECORD_LEN = 5
CHECKSUM_LEN = 4

FLAG_DELTA = 0x01
FLAG_SAFETENSORS = 0x02
_FLAG_RESERVED_MASK = 0x0C
BACKEND_SHIFT = 4
BACKEND_DEFLATE = 0

_HEADER_STRUCT = struct.Struct("<4sBBBBIQQ")

RECORD_DTYPE = np.dtype([("method", "u1"), ("len", "<u4")])


class Method(IntEnum):
    STORED = 0
    HUFFMAN = 1
    LZ_ENTROPY = 2
    ZERO_TRUNCATED = 3


def chunk_count_for(total_size: int, chunk_size: int) -> int:
    return -(-total_size // chunk_size)


@dataclass(frozen=True)
class ContainerHeader:
    dtype: DType
    chunk_size: int
    total_size: int
    chunk_count: int
    delta: bool = False
    safetensors: bool = False
    backend: int = BACKEND_DEFLATE
    base_digest: bytes | None = None

    @property
    def byte_size(self) -> int:
        return FIXED_HEADER_LEN + (DIGEST_LEN if self.delta else 0)

    def chunk_raw_len(self, c: int) -> int:
        if c < 0 or c >= self.chunk_count:
            raise IndexError(c)
        if c == self.chunk_count - 1:
            return self.total_size - (self.chunk_count - 1) * self.chunk_size
        return self.chunk_size

    def group_raw_len(self, c: int) -> int:
        """Raw byte length of each byte-group of chunk c (one byte per element)."""
        raw = self.chunk_raw_len(c)
        return raw // self.dtype.element_bytes if not self.dtype.is_opaque else raw


def make_header(dtype: DType, chunk_size: int, total_size: int, *, delta: bool = False,
                safetensors: bool = False, base_digest: bytes | None = None) -> ContainerHeader:
    return ContainerHeader(
        dtype=dtype,
        chunk_size=chunk_size,
        total_size=total_size,
        chunk_count=chunk_count_for(total_size, chunk_size) if chunk_size > 0 else 0,
        delta=delta,
        safetensors=safetensors,
        base_digest=base_digest,
    )


def _validate_header(h: ContainerHeader) -> None:
    if h.dtype.code not in DTYPES_BY_CODE:
        raise InvalidHeader(f"unknown dtype code {h.dtype.code}")
    if h.chunk_size <= 0 or h.chunk_size % (8 * h.dtype.element_bytes) != 0:
        raise InvalidHeader(
            f"chunk_size {h.chunk_size} must be a positive multiple of "
            f"{8 * h.dtype.element_bytes} for {h.dtype.name}"
        )
    if not 0 <= h.total_size < 1 << 64:
        raise InvalidHeader(f"total_size {h.total_size} out of u64 range")
    if h.chunk_count != chunk_count_for(h.total_size, h.chunk_size):
        raise InvalidHeader(
            f"chunk_count {h.chunk_count} != ceil({h.total_size}/{h.chunk_size})"
        )
    if h.backend != BACKEND_DEFLATE:
        raise InvalidHeader(f"unknown backend id {h.backend}")
    if h.delta:
        if h.base_digest is None or len(h.base_digest) != DIGEST_LEN:
            raise InvalidHeader("delta container requires a 32-byte base digest")
    elif h.base_digest is not None:
        raise InvalidHeader("base_digest present without delta flag")


def encode_header(h: ContainerHeader) -> bytes:
    _validate_header(h)
    flags = (
        (FLAG_DELTA if h.delta else 0)
        | (FLAG_SAFETENSORS if h.safetensors else 0)
        | (h.backend << BACKEND_SHIFT)
    )
    out = _HEADER_STRUCT.pack(
        MAGIC, VERSION, flags, h.dtype.code, h.dtype.group_count,
        h.chunk_size, h.total_size, h.chunk_count,
    )
    if h.delta:
        out += h.base_digest
    return out


def decode_header(b: bytes) -> ContainerHeader:
    if len(b) < len(MAGIC):
        raise InvalidHeader(f"{len(b)} bytes is too short for a header")
    if bytes(b[:4]) != MAGIC:
        raise BadMagic(f"bad magic {bytes(b[:4])!r}")
    if len(b) < FIXED_HEADER_LEN:
        raise InvalidHeader(f"truncated header: {len(b)} < {FIXED_HEADER_LEN} bytes")
    _, version, flags, dtype_code, group_count, chunk_size, total_size, chunk_count = (
        _HEADER_STRUCT.unpack(bytes(b[:FIXED_HEADER_LEN]))
    )
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if flags & _FLAG_RESERVED_MASK:
        raise InvalidHeader(f"reserved flag bits set: {flags:#04x}")
    backend = flags >> BACKEND_SHIFT
    if backend != BACKEND_DEFLATE:
        raise UnsupportedBackend(f"backend id {backend}")
    dtype = DTYPES_BY_CODE.get(dtype_code)
    if dtype is None:
        raise InvalidHeader(f"unknown dtype code {dtype_code}")
    if group_count != dtype.group_count:
        raise InvalidHeader(
            f"group_count {group_count} does not match {dtype.name} ({dtype.group_count})"
        )
    delta = bool(flags & FLAG_DELTA)
    digest = None
    if delta:
        if len(b) < FIXED_HEADER_LEN + DIGEST_LEN:
            raise InvalidHeader("truncated header: missing base digest")
        digest = bytes(b[FIXED_HEADER_LEN:FIXED_HEADER_LEN + DIGEST_LEN])
    h = ContainerHeader(
        dtype=dtype,
        chunk_size=chunk_size,
        total_size=total_size,
        chunk_count=chunk_count,
        delta=delta,
        safetensors=bool(flags & FLAG_SAFETENSORS),
        backend=backend,
        base_digest=digest,
    )
    _validate_header(h)
    return h


def compute_payload_offsets(stored_lens: np.ndarray) -> tuple[np.ndarray, int]:
    """Exclusive prefix sums of stored_len in (chunk, group) order.

    Returns (offsets, total) where offsets has the table's shape.  The sums
    are tracked in u64; a wrap raises Overflow.
    """
    lens = np.asarray(stored_lens)
    if lens.size == 0:
        return np.zeros(lens.shape, dtype=np.uint64), 0
    if (lens < 0).any():
        raise InvalidHeader("negative stored_len in chunk table")
    flat = lens.reshape(-1).astype(np.uint64)
    csum = np.cumsum(flat)
    if np.any(csum[1:] < csum[:-1]):
        raise Overflow("payload size exceeds u64")
    return (csum - flat).reshape(lens.shape), int(csum[-1])


@dataclass
class Container:
    """A parsed or freshly assembled compressed artifact.

    payload may be bytes or a uint8 array view (e.g. into a memory-mapped
    file), so parsing a container does not copy its payload.
    """

    header: ContainerHeader
    methods: np.ndarray      # uint8, shape (chunk_count, group_count)
    stored_lens: np.ndarray  # int64, shape (chunk_count, group_count)
    payload: bytes | np.ndarray
    checksum: int = field(default=-1)

    def __post_init__(self):
        if self.checksum < 0:
            self.checksum = crc32c(self.payload)

    @property
    def offsets(self) -> np.ndarray:
        offs, total = compute_payload_offsets(self.stored_lens)
        if total != len(self.payload):
            raise InvalidHeader(
                f"payload length {len(self.payload)} != table sum {total}"
            )
        return offs

    def group_payload(self, c: int, g: int, offsets: np.ndarray | None = None):
        offs = self.offsets if offsets is None else offsets
        start = int(offs[c, g])
        return memoryview(self.payload)[start:start + int(self.stored_lens[c, g])]

    @property
    def byte_size(self) -> int:
        return self.header.byte_size + self.methods.size * RECORD_LEN + len(self.payload) + CHECKSUM_LEN

    def to_bytes(self) -> bytes:
        gc = self.header.dtype.group_count
        cc = self.header.chunk_count
        if self.methods.shape != (cc, gc) or self.stored_lens.shape != (cc, gc):
            raise InvalidHeader(
                f"table shape {self.methods.shape} does not match header ({cc},{gc})"
            )
        if self.stored_lens.size and int(self.stored_lens.max()) > 0xFFFFFFFF:
            raise Overflow("stored_len exceeds u32")
        records = np.empty(cc * gc, dtype=RECORD_DTYPE)
        records["method"] = self.methods.reshape(-1)
        records["len"] = self.stored_lens.reshape(-1)
        parts = [
            encode_header(self.header),
            records.tobytes(),
            self.payload if isinstance(self.payload, bytes) else self.payload.tobytes(),
            struct.pack("<I", self.checksum),
        ]
        return b"".join(parts)


def container_from_bytes(buf) -> Container:
    """Parse a standalone container; structural validation only (the payload
    checksum is verified by decompression, which owns that error).

    The payload is kept as a view into buf, not copied.
    """
    arr = buf if isinstance(buf, np.ndarray) else np.frombuffer(buf, dtype=np.uint8)
    header = decode_header(arr)
    pos = header.byte_size
    n_records = header.chunk_count * header.dtype.group_count
    table_len = n_records * RECORD_LEN
    if len(arr) < pos + table_len + CHECKSUM_LEN:
        raise InvalidHeader("container truncated inside chunk table")
    records = np.frombuffer(arr[pos:pos + table_len], dtype=RECORD_DTYPE)
    pos += table_len
    methods = records["method"].reshape(header.chunk_count, header.dtype.group_count)
    stored_lens = records["len"].astype(np.int64).reshape(methods.shape)
    _, total = compute_payload_offsets(stored_lens)
    if len(arr) != pos + total + CHECKSUM_LEN:
        raise InvalidHeader(
            f"container length {len(arr)} != expected {pos + total + CHECKSUM_LEN}"
        )
    payload = arr[pos:pos + total]
    (checksum,) = struct.unpack("<I", arr[pos + total:pos + total + CHECKSUM_LEN])
    return Container(
        header=header,
        methods=np.ascontiguousarray(methods),
        stored_lens=stored_lens,
        payload=payload,
        checksum=checksum,
    )
