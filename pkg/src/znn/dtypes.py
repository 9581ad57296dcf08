"""Element-type descriptors.

A DType pins down how one parameter is laid out in memory: how many bytes
it occupies, how those bytes split into positional compression groups, and
where the sign/exponent/fraction fields sit.  OPAQUE is the catch-all for
anything that is not one of the three supported floating-point layouts; it
is compressed as a single byte stream.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["DType", "OPAQUE", "FP32", "BF16", "FP16", "DTYPES_BY_CODE", "DTYPES_BY_NAME"]


@dataclass(frozen=True)
class DType:
    name: str
    code: int
    element_bytes: int
    group_count: int
    sign_bits: int
    exponent_bits: int
    fraction_bits: int

    def __post_init__(self):
        if self.code != 0:
            assert self.element_bytes == self.group_count
            assert self.sign_bits + self.exponent_bits + self.fraction_bits == 8 * self.element_bytes

    @property
    def is_opaque(self) -> bool:
        return self.code == 0


OPAQUE = DType("opaque", 0, 1, 1, 0, 0, 0)
FP32 = DType("fp32", 1, 4, 4, 1, 8, 23)
BF16 = DType("bf16", 2, 2, 2, 1, 8, 7)
FP16 = DType("fp16", 3, 2, 2, 1, 5, 10)

DTYPES_BY_CODE = {d.code: d for d in (OPAQUE, FP32, BF16, FP16)}
DTYPES_BY_NAME = {d.name: d for d in (OPAQUE, FP32, BF16, FP16)}
