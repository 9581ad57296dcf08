"""Lossless compression for neural-network weight files.

The compressor splits each parameter into positional byte groups so the
highly skewed exponent bits form their own stream, entropy-codes the
compressible groups with canonical Huffman, skips incompressible ones, and
stores everything in a chunk-parallel container.  XOR deltas between
similar checkpoints reuse the same pipeline with an auto-selected backend.
"""

from .analysis import entropy_bits_per_byte, exponent_histogram, model_report, sample_middle, zero_stats
from .codecs import (
    GroupEncoding,
    SelectionMode,
    huffman_compress,
    huffman_decompress,
    lz_entropy_compress,
    lz_entropy_decompress,
    select_method,
)
from .container import Container, ContainerHeader, Method, compute_payload_offsets, container_from_bytes, decode_header, encode_header
from .delta import (
    BaseSchedule,
    ScheduleEntry,
    ScheduleMode,
    Storage,
    apply_delta,
    compress_delta,
    plan_bases,
    xor_bytes,
)
from .dtypes import BF16, DTYPES_BY_NAME, FP16, FP32, OPAQUE, DType
from .errors import ZnnError
from .ingest import TensorSpan, compress_model_file, decompress_model_file, parse_safetensors
from .pipeline import CompressConfig, compress, compress_stream, decompress, decompress_chunk, decompress_stream
from .regroup import GroupedChunk, regroup, ungroup

__version__ = "0.1.0"
