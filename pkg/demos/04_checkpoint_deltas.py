"""Checkpoint storage with XOR deltas and periodic bases.

Run:  python demos/04_checkpoint_deltas.py
"""

import numpy as np

from znn import (
    BF16,
    CompressConfig,
    ScheduleMode,
    Storage,
    apply_delta,
    compress_delta,
    compress_stream,
    decompress_stream,
    plan_bases,
)


def to_bf16(f32):
    u = f32.view(np.uint32)
    return ((u + 0x7FFF + ((u >> 16) & 1)) >> 16).astype(np.uint16)


rng = np.random.default_rng(3)
vals = rng.normal(0, 0.02, 1_000_000).astype(np.float32)

# simulate 8 training epochs: each step nudges the weights a little
checkpoints = []
for _ in range(8):
    vals = (vals + rng.normal(0, 2e-4, vals.size).astype(np.float32)).astype(np.float32)
    checkpoints.append(to_bf16(vals).tobytes())

cfg = CompressConfig(dtype=BF16)
standalone = compress_stream(checkpoints[-1], cfg).byte_size
consecutive = compress_delta(checkpoints[-2], checkpoints[-1], cfg).byte_size
distant = compress_delta(checkpoints[0], checkpoints[-1], cfg).byte_size
raw = len(checkpoints[-1])
print(f"standalone checkpoint:        {standalone / raw * 100:5.1f}%")
print(f"delta vs previous epoch:      {consecutive / raw * 100:5.1f}%")
print(f"delta vs 7 epochs ago:        {distant / raw * 100:5.1f}%")

# A schedule trades recovery chain length against delta quality: store a
# full container every `period` checkpoints, deltas in between.
for mode in (ScheduleMode.CHAIN, ScheduleMode.FIXED_BASE):
    schedule = plan_bases(len(checkpoints), period=4, mode=mode)
    stored = {}
    total = 0
    for e in schedule.entries:
        if e.storage is Storage.FULL:
            stored[e.index] = ("full", compress_stream(checkpoints[e.index], cfg))
        else:
            stored[e.index] = ("delta", compress_delta(
                checkpoints[e.base_index], checkpoints[e.index], cfg))
        total += stored[e.index][1].byte_size

    # recover the last checkpoint by walking its chain
    def materialize(i):
        kind, container = stored[i]
        if kind == "full":
            return decompress_stream(container)
        return apply_delta(materialize(schedule.entries[i].base_index), container)

    assert materialize(7) == checkpoints[7]
    longest = max(len(schedule.recovery_chain(i)) for i in range(8))
    print(f"{mode.value:10s}: 8 checkpoints stored in {total / (8 * raw) * 100:5.1f}% "
          f"of raw, longest recovery chain {longest}")
