"""XOR delta compression between equal-size models, plus base scheduling.

The delta is the bytewise XOR of base and target: trivially reversible,
needs no extra bits, and after byte grouping the unchanged bytes collapse
into zero-heavy streams that the auto-selected backend removes.  Delta
containers bind to their base by SHA-256 of the base content, so patching
the wrong base fails before any XOR is attempted.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .codecs import SelectionMode
from .container import Container
from .errors import BaseDigestMismatch, InvalidHeader, InvalidPeriod, LengthMismatch
from .pipeline import CompressConfig, compress_stream, decompress_stream


def _as_u8(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return data
    return np.frombuffer(data, dtype=np.uint8)


def xor_bytes(a, b) -> bytes:
    a = _as_u8(a)
    b = _as_u8(b)
    if a.size != b.size:
        raise LengthMismatch(f"buffers differ in length: {a.size} != {b.size}")
    return np.bitwise_xor(a, b).tobytes()


def sha256(data) -> bytes:
    return hashlib.sha256(data).digest()


def compress_delta(base, target, cfg: CompressConfig) -> Container:
    """Compress target as an XOR delta against base (same length, same dtype).

    The XOR stream goes through the normal pipeline with byte grouping and
    DELTA_AUTO selection; the container records the delta flag and the
    base's SHA-256.
    """
    base = _as_u8(base)
    target = _as_u8(target)
    if base.size != target.size:
        raise LengthMismatch(f"base {base.size} != target {target.size} bytes")
    delta_cfg = replace(cfg, mode=SelectionMode.DELTA_AUTO) if cfg.mode in (
        SelectionMode.MODEL, SelectionMode.DELTA_AUTO) else cfg
    delta = np.bitwise_xor(base, target)
    return compress_stream(delta, delta_cfg, delta_base_digest=sha256(base))


def apply_delta(base, container: Container, worker_count: int = 1) -> bytes:
    """Reconstruct the target from its base and a delta container."""
    base = _as_u8(base)
    if not container.header.delta:
        raise InvalidHeader("container is not a delta")
    if sha256(base) != container.header.base_digest:
        raise BaseDigestMismatch("base content does not match the container's digest")
    delta = decompress_stream(container, worker_count)
    return xor_bytes(base, delta)


class ScheduleMode(Enum):
    CHAIN = "chain"
    FIXED_BASE = "fixed_base"


class Storage(Enum):
    FULL = "full"
    DELTA = "delta"


@dataclass(frozen=True)
class ScheduleEntry:
    index: int
    storage: Storage
    base_index: int | None = None


@dataclass(frozen=True)
class BaseSchedule:
    entries: tuple[ScheduleEntry, ...]
    period: int
    mode: ScheduleMode

    def recovery_chain(self, index: int) -> list[int]:
        """Container indices touched to materialize checkpoint ``index``,
        ending at a FULL entry."""
        chain = [index]
        e = self.entries[index]
        while e.storage is Storage.DELTA:
            chain.append(e.base_index)
            e = self.entries[e.base_index]
        return chain

    def to_json(self) -> str:
        return json.dumps({
            "period": self.period,
            "mode": self.mode.value,
            "entries": [
                {"index": e.index, "storage": e.storage.value,
                 **({"base_index": e.base_index} if e.storage is Storage.DELTA else {})}
                for e in self.entries
            ],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BaseSchedule":
        doc = json.loads(text)
        entries = tuple(
            ScheduleEntry(e["index"], Storage(e["storage"]), e.get("base_index"))
            for e in doc["entries"]
        )
        return cls(entries, doc["period"], ScheduleMode(doc["mode"]))


def plan_bases(n_checkpoints: int, period: int, mode: ScheduleMode = ScheduleMode.CHAIN) -> BaseSchedule:
    """Assign FULL/DELTA storage to a run of checkpoints.

    A full checkpoint is stored every ``period`` entries (checkpoint 0 is
    always full).  CHAIN deltas reference the previous checkpoint, bounding
    recovery chains by period; FIXED_BASE deltas always reference the most
    recent full checkpoint, bounding recovery to one hop.
    """
    if period < 1:
        raise InvalidPeriod(f"period {period} must be >= 1")
    if n_checkpoints < 1:
        raise InvalidPeriod(f"need at least one checkpoint, got {n_checkpoints}")
    entries = []
    last_full = 0
    for i in range(n_checkpoints):
        if i % period == 0:
            entries.append(ScheduleEntry(i, Storage.FULL))
            last_full = i
        elif mode is ScheduleMode.CHAIN:
            entries.append(ScheduleEntry(i, Storage.DELTA, i - 1))
        else:
            entries.append(ScheduleEntry(i, Storage.DELTA, last_full))
    return BaseSchedule(tuple(entries), period, mode)
