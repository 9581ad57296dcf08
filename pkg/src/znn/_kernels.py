"""Bit-serial kernels compiled with numba.

Everything here is a tight integer loop that numpy cannot express without
per-symbol Python overhead: canonical code construction, LSB-first bit
packing/unpacking, CRC32C, and zero-run scanning.  All kernels are pure
functions over plain arrays so they can be called from worker threads
(nogil) and produce identical results regardless of scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_CODE_LEN = 12
DECODE_LUT_SIZE = 1 << MAX_CODE_LEN

# decode_payload status values
DECODE_OK = 0
DECODE_TRUNCATED = -1
DECODE_BAD_CODE = -2
DECODE_EXCESS_BITS = -3


@njit(cache=True, nogil=True)
def byte_histogram_kernel(data):
    counts = np.zeros(256, dtype=np.int64)
    for i in range(data.size):
        counts[data[i]] += 1
    return counts


@njit(cache=True, nogil=True)
def build_code_lengths(counts):
    """Depth-limited canonical Huffman code lengths from a byte histogram.

    Ties in frequency are broken by symbol value; overlong codes are fixed
    by the deflate-style reassignment, which keeps the Kraft sum exactly 1.
    Returns a uint8[256] of lengths in 0..12 (0 = symbol absent).
    """
    lengths = np.zeros(256, dtype=np.uint8)
    n = 0
    for s in range(256):
        if counts[s] > 0:
            n += 1
    if n == 0:
        return lengths
    if n == 1:
        for s in range(256):
            if counts[s] > 0:
                lengths[s] = 1
        return lengths

    # sort symbols by (count, symbol); the composite key makes the order
    # total, so the sort algorithm's stability does not matter
    keys = np.empty(n, dtype=np.int64)
    i = 0
    for s in range(256):
        if counts[s] > 0:
            keys[i] = counts[s] * 256 + s
            i += 1
    keys.sort()

    # two-queue Huffman merge; leaves 0..n-1 (sorted), internals n..2n-2
    weight = np.empty(2 * n - 1, dtype=np.int64)
    parent = np.full(2 * n - 1, -1, dtype=np.int32)
    for i in range(n):
        weight[i] = keys[i] >> 8
    leaf = 0
    inode = n
    for newn in range(n, 2 * n - 1):
        w = np.int64(0)
        for _ in range(2):
            # prefer the leaf on ties so equal-frequency order follows symbols
            if leaf < n and (inode >= newn or weight[leaf] <= weight[inode]):
                pick = leaf
                leaf += 1
            else:
                pick = inode
                inode += 1
            parent[pick] = newn
            w += weight[pick]
        weight[newn] = w

    depth = np.zeros(2 * n - 1, dtype=np.int32)
    for v in range(2 * n - 3, -1, -1):
        depth[v] = depth[parent[v]] + 1

    # bucket leaf depths, clamping anything deeper than MAX_CODE_LEN
    bl = np.zeros(MAX_CODE_LEN + 1, dtype=np.int64)
    overflow = False
    for i in range(n):
        d = depth[i]
        if d > MAX_CODE_LEN:
            d = MAX_CODE_LEN
            overflow = True
        bl[d] += 1
    if overflow:
        kraft = np.int64(0)
        for b in range(1, MAX_CODE_LEN + 1):
            kraft += bl[b] << (MAX_CODE_LEN - b)
        while kraft > (1 << MAX_CODE_LEN):
            b = MAX_CODE_LEN - 1
            while bl[b] == 0:
                b -= 1
            bl[b] -= 1
            bl[b + 1] += 2
            bl[MAX_CODE_LEN] -= 1
            kraft -= 1

    # hand lengths back: ascending frequency gets the deepest remaining slot
    li = 0
    for b in range(MAX_CODE_LEN, 0, -1):
        for _ in range(bl[b]):
            lengths[keys[li] & 0xFF] = b
            li += 1
    return lengths


@njit(cache=True, nogil=True)
def canonical_codes(lengths):
    """Canonical codes (MSB-first values) from lengths, by (length, symbol)."""
    bl = np.zeros(MAX_CODE_LEN + 2, dtype=np.int64)
    for s in range(256):
        bl[lengths[s]] += 1
    bl[0] = 0
    codes = np.zeros(256, dtype=np.uint16)
    next_code = np.zeros(MAX_CODE_LEN + 2, dtype=np.int64)
    code = 0
    for b in range(1, MAX_CODE_LEN + 1):
        code = (code + bl[b - 1]) << 1
        next_code[b] = code
    for s in range(256):
        L = lengths[s]
        if L > 0:
            codes[s] = next_code[L]
            next_code[L] += 1
    return codes


@njit(cache=True, nogil=True)
def reversed_codes(codes, lengths):
    """Bit-reverse each code so it can be emitted into an LSB-first stream."""
    rev = np.zeros(256, dtype=np.uint16)
    for s in range(256):
        L = lengths[s]
        c = codes[s]
        r = 0
        for _ in range(L):
            r = (r << 1) | (c & 1)
            c >>= 1
        rev[s] = r
    return rev


@njit(cache=True, nogil=True)
def pack_payload(data, rev_codes, lengths, out):
    """Bit-pack codes LSB-first into out; returns the byte count written."""
    acc = 0
    nbits = 0
    pos = 0
    for i in range(data.size):
        s = data[i]
        acc |= np.int64(rev_codes[s]) << nbits
        nbits += lengths[s]
        while nbits >= 8:
            out[pos] = acc & 0xFF
            acc >>= 8
            nbits -= 8
            pos += 1
    if nbits > 0:
        out[pos] = acc & 0xFF
        pos += 1
    return pos


@njit(cache=True, nogil=True)
def build_decode_lut(codes, lengths):
    """4096-entry direct lookup: low 12 peeked bits -> (symbol, length)."""
    sym_lut = np.zeros(DECODE_LUT_SIZE, dtype=np.uint8)
    len_lut = np.zeros(DECODE_LUT_SIZE, dtype=np.uint8)
    for s in range(256):
        L = lengths[s]
        if L == 0:
            continue
        c = codes[s]
        r = 0
        for _ in range(L):
            r = (r << 1) | (c & 1)
            c >>= 1
        step = 1 << L
        for idx in range(r, DECODE_LUT_SIZE, step):
            sym_lut[idx] = s
            len_lut[idx] = L
    return sym_lut, len_lut


@njit(cache=True, nogil=True)
def decode_payload(payload, raw_len, sym_lut, len_lut, out):
    """Decode raw_len symbols from an LSB-first bitstream.

    Returns DECODE_OK, or a negative status when the stream is truncated,
    hits a bit pattern with no assigned code, or carries 8+ trailing bits.
    """
    acc = 0
    nbits = 0
    pos = 0
    n = payload.size
    for i in range(raw_len):
        if nbits < MAX_CODE_LEN:
            if pos + 4 <= n:
                acc |= (
                    np.int64(payload[pos])
                    | (np.int64(payload[pos + 1]) << 8)
                    | (np.int64(payload[pos + 2]) << 16)
                    | (np.int64(payload[pos + 3]) << 24)
                ) << nbits
                nbits += 32
                pos += 4
            else:
                while nbits < MAX_CODE_LEN and pos < n:
                    acc |= np.int64(payload[pos]) << nbits
                    nbits += 8
                    pos += 1
        w = acc & (DECODE_LUT_SIZE - 1)
        L = len_lut[w]
        if L == 0:
            return DECODE_BAD_CODE
        if L > nbits:
            return DECODE_TRUNCATED
        out[i] = sym_lut[w]
        acc >>= L
        nbits -= L
    if nbits + 8 * (n - pos) >= 8:
        return DECODE_EXCESS_BITS
    return DECODE_OK


@njit(cache=True, nogil=True)
def crc32c_kernel(buf, crc, tables):
    """Slice-by-8 CRC32C; tables is the 8x256 lookup from crc._TABLES."""
    c = np.int64(crc ^ 0xFFFFFFFF)
    i = 0
    n = buf.size
    while i + 8 <= n:
        lo = c ^ (
            np.int64(buf[i])
            | (np.int64(buf[i + 1]) << 8)
            | (np.int64(buf[i + 2]) << 16)
            | (np.int64(buf[i + 3]) << 24)
        )
        hi = (
            np.int64(buf[i + 4])
            | (np.int64(buf[i + 5]) << 8)
            | (np.int64(buf[i + 6]) << 16)
            | (np.int64(buf[i + 7]) << 24)
        )
        c = (
            np.int64(tables[7, lo & 0xFF])
            ^ np.int64(tables[6, (lo >> 8) & 0xFF])
            ^ np.int64(tables[5, (lo >> 16) & 0xFF])
            ^ np.int64(tables[4, (lo >> 24) & 0xFF])
            ^ np.int64(tables[3, hi & 0xFF])
            ^ np.int64(tables[2, (hi >> 8) & 0xFF])
            ^ np.int64(tables[1, (hi >> 16) & 0xFF])
            ^ np.int64(tables[0, (hi >> 24) & 0xFF])
        )
        i += 8
    while i < n:
        c = np.int64(tables[0, (c ^ buf[i]) & 0xFF]) ^ (c >> 8)
        i += 1
    return (c ^ 0xFFFFFFFF) & 0xFFFFFFFF


@njit(cache=True, nogil=True)
def longest_zero_run(buf):
    best = 0
    run = 0
    for i in range(buf.size):
        if buf[i] == 0:
            run += 1
            if run > best:
                best = run
        else:
            run = 0
    return best
