"""Error taxonomy shared by every layer of the library.

Each exception carries a stable ``code`` string so the CLI can map failures
to exit codes and the bindings can surface them without parsing messages.
"""


class ZnnError(Exception):
    """Base class for all library errors."""

    code = "ERROR"


class InvalidHeader(ZnnError):
    code = "INVALID_HEADER"


class BadMagic(ZnnError):
    code = "BAD_MAGIC"


class UnsupportedVersion(ZnnError):
    code = "UNSUPPORTED_VERSION"


class UnsupportedBackend(ZnnError):
    code = "UNSUPPORTED_BACKEND"


class Overflow(ZnnError):
    code = "OVERFLOW"


class MisalignedInput(ZnnError):
    code = "MISALIGNED_INPUT"


class LengthMismatch(ZnnError):
    code = "LENGTH_MISMATCH"


class EmptyInput(ZnnError):
    code = "EMPTY_INPUT"


class CorruptTable(ZnnError):
    code = "CORRUPT_TABLE"


class TruncatedPayload(ZnnError):
    code = "TRUNCATED_PAYLOAD"


class ExcessBits(ZnnError):
    code = "EXCESS_BITS"


class CorruptPayload(ZnnError):
    code = "CORRUPT_PAYLOAD"


class ChecksumMismatch(ZnnError):
    code = "CHECKSUM_MISMATCH"


class BaseDigestMismatch(ZnnError):
    code = "BASE_DIGEST_MISMATCH"


class InvalidPeriod(ZnnError):
    code = "INVALID_PERIOD"


class MalformedHeader(ZnnError):
    code = "MALFORMED_HEADER"


class OverlappingSpans(ZnnError):
    code = "OVERLAPPING_SPANS"


class SpanOutOfBounds(ZnnError):
    code = "SPAN_OUT_OF_BOUNDS"


class OpaqueUnsupported(ZnnError):
    code = "OPAQUE_UNSUPPORTED"
