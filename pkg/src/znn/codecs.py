"""Per-group encoders and the compression-method selector.

Four encodings exist at the group level:

* HUFFMAN        — canonical byte-level Huffman, depth-limited to 12 bits.
                   Payload = 128-byte table (256 packed 4-bit lengths,
                   symbol 2i in the low nibble of byte i) followed by the
                   codes bit-packed LSB-first.  raw_len is not stored; the
                   caller knows it from chunk geometry.
* LZ_ENTROPY     — the pluggable repetition-removal backend (deflate).
* STORED         — verbatim bytes, the universal fallback; guarantees no
                   encoding ever expands beyond raw_len.
* ZERO_TRUNCATED — all-zero group, empty payload.

Encoders are pure functions of their input bytes: canonical code
construction with a fixed tie-break makes output byte-identical across
runs.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .container import Method
from .errors import CorruptPayload, CorruptTable, EmptyInput, ExcessBits, LengthMismatch, TruncatedPayload

TABLE_BYTES = 128
TABLE_BITS = 8 * TABLE_BYTES

# an encoding counts as incompressible when payload/raw_len exceeds this
INCOMPRESSIBLE_RATIO = 0.98

# §4.2 auto-detection thresholds: LZ wins past 90% zeros or a zero run
# of 3% of the chunk
ZERO_FRACTION_THRESHOLD = 0.90
ZERO_RUN_FRACTION = 0.03

DEFLATE_LEVEL = 6


class SelectionMode(Enum):
    MODEL = "model"
    DELTA_AUTO = "auto"
    FORCE_HUFFMAN = "huffman"
    FORCE_LZ = "lz"
    FORCE_STORED = "stored"


@dataclass
class GroupEncoding:
    method: Method
    payload: bytes
    raw_len: int


def _as_u8(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return data
    return np.frombuffer(data, dtype=np.uint8)


def byte_histogram(data: np.ndarray) -> np.ndarray:
    return _kernels.byte_histogram_kernel(data)


def huffman_plan(counts: np.ndarray) -> tuple[np.ndarray, int]:
    """Code lengths plus the exact payload size (table + packed bits) the
    encoder would produce for this histogram."""
    lengths = _kernels.build_code_lengths(counts)
    bits = int((counts * lengths).sum())
    return lengths, TABLE_BYTES + (bits + 7) // 8


def _pack_table(lengths: np.ndarray) -> bytes:
    pairs = lengths.reshape(128, 2)
    return (pairs[:, 0] | (pairs[:, 1] << 4)).astype(np.uint8).tobytes()


def _unpack_table(table: np.ndarray) -> np.ndarray:
    lengths = np.empty(256, dtype=np.uint8)
    lengths[0::2] = table & 0x0F
    lengths[1::2] = table >> 4
    return lengths


def huffman_encode_planned(data: np.ndarray, lengths: np.ndarray,
                           payload_size: int | None = None) -> bytes:
    codes = _kernels.canonical_codes(lengths)
    rev = _kernels.reversed_codes(codes, lengths)
    if payload_size is None:
        _, payload_size = huffman_plan(byte_histogram(data))
    out = np.empty(payload_size - TABLE_BYTES, dtype=np.uint8)
    n = _kernels.pack_payload(data, rev, lengths, out)
    return _pack_table(lengths) + out[:n].tobytes()


def huffman_compress(data) -> GroupEncoding:
    data = _as_u8(data)
    if data.size == 0:
        raise EmptyInput("cannot encode an empty group")
    counts = byte_histogram(data)
    if counts[0] == data.size:
        return GroupEncoding(Method.ZERO_TRUNCATED, b"", data.size)
    lengths, nbytes = huffman_plan(counts)
    if nbytes >= data.size:
        return GroupEncoding(Method.STORED, data.tobytes(), data.size)
    return GroupEncoding(Method.HUFFMAN, huffman_encode_planned(data, lengths, nbytes), data.size)


def huffman_decompress(payload, raw_len: int) -> bytes:
    payload = _as_u8(payload)
    if payload.size < TABLE_BYTES:
        raise TruncatedPayload(f"payload of {payload.size} bytes has no complete table")
    lengths = _unpack_table(payload[:TABLE_BYTES])
    if int(lengths.max(initial=0)) > _kernels.MAX_CODE_LEN:
        raise CorruptTable(f"code length {int(lengths.max())} exceeds {_kernels.MAX_CODE_LEN}")
    used = lengths > 0
    kraft = int((1 << (_kernels.MAX_CODE_LEN - lengths[used].astype(np.int64))).sum())
    if kraft > _kernels.DECODE_LUT_SIZE:
        raise CorruptTable(f"Kraft sum {kraft}/{_kernels.DECODE_LUT_SIZE} exceeds 1")
    if raw_len > 0 and not used.any():
        raise CorruptTable("table assigns no codes")
    codes = _kernels.canonical_codes(lengths)
    sym_lut, len_lut = _kernels.build_decode_lut(codes, lengths)
    out = np.empty(raw_len, dtype=np.uint8)
    status = _kernels.decode_payload(payload[TABLE_BYTES:], raw_len, sym_lut, len_lut, out)
    if status == _kernels.DECODE_TRUNCATED:
        raise TruncatedPayload(f"bitstream ended before {raw_len} symbols")
    if status == _kernels.DECODE_BAD_CODE:
        raise CorruptPayload("bit pattern matches no code")
    if status == _kernels.DECODE_EXCESS_BITS:
        raise ExcessBits("more than 7 trailing pad bits")
    return out.tobytes()


def lz_entropy_compress(data) -> GroupEncoding:
    data = _as_u8(data)
    if data.size == 0:
        raise EmptyInput("cannot encode an empty group")
    if not data.any():
        return GroupEncoding(Method.ZERO_TRUNCATED, b"", data.size)
    payload = zlib.compress(data.tobytes(), DEFLATE_LEVEL)
    if len(payload) >= data.size:
        return GroupEncoding(Method.STORED, data.tobytes(), data.size)
    return GroupEncoding(Method.LZ_ENTROPY, payload, data.size)


def lz_entropy_decompress(payload, raw_len: int) -> bytes:
    try:
        out = zlib.decompress(bytes(payload))
    except zlib.error as e:
        raise CorruptPayload(f"backend decode failed: {e}") from None
    if len(out) != raw_len:
        raise LengthMismatch(f"backend produced {len(out)} bytes, expected {raw_len}")
    return out


def zero_stats(data) -> tuple[float, int]:
    """(zero byte fraction, longest run of zero bytes)."""
    data = _as_u8(data)
    if data.size == 0:
        raise EmptyInput("zero_stats of empty input")
    zeros = data.size - int(np.count_nonzero(data))
    if zeros == 0:
        return 0.0, 0
    return zeros / data.size, int(_kernels.longest_zero_run(data))


def select_method(data, mode: SelectionMode, zero_count: int | None = None) -> Method:
    """Pick HUFFMAN or LZ_ENTROPY for one group (ZERO_TRUNCATED and STORED
    are decided downstream by the encoders themselves).

    DELTA_AUTO counts zeros and the longest zero run: LZ wins when zeros
    exceed 90% of the chunk or some run reaches 3% of it.
    """
    data = _as_u8(data)
    if data.size == 0:
        raise EmptyInput("select_method of empty input")
    if mode is SelectionMode.FORCE_HUFFMAN or mode is SelectionMode.MODEL:
        return Method.HUFFMAN
    if mode is SelectionMode.FORCE_LZ:
        return Method.LZ_ENTROPY
    if mode is not SelectionMode.DELTA_AUTO:
        raise ValueError(f"select_method does not handle mode {mode}")
    if zero_count is None:
        zero_count = data.size - int(np.count_nonzero(data))
    if zero_count / data.size > ZERO_FRACTION_THRESHOLD:
        return Method.LZ_ENTROPY
    if zero_count and int(_kernels.longest_zero_run(data)) >= ZERO_RUN_FRACTION * data.size:
        return Method.LZ_ENTROPY
    return Method.HUFFMAN


def decode_group(method: int, payload, raw_len: int) -> bytes:
    if method == Method.STORED:
        if len(payload) != raw_len:
            raise LengthMismatch(f"stored group has {len(payload)} bytes, expected {raw_len}")
        return bytes(payload)
    if method == Method.ZERO_TRUNCATED:
        if len(payload) != 0:
            raise CorruptPayload("zero-truncated group with a payload")
        return bytes(raw_len)
    if method == Method.HUFFMAN:
        return huffman_decompress(payload, raw_len)
    if method == Method.LZ_ENTROPY:
        return lz_entropy_decompress(payload, raw_len)
    raise CorruptPayload(f"unknown method tag {method}")
