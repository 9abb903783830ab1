"""Typed errors raised across the toolkit.

Every failure mode callers are expected to handle has its own class so that
tests and the CLI can dispatch on type instead of parsing messages.
"""

from __future__ import annotations


class OtmetricsError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# embedding file format


class MalformedHeader(OtmetricsError):
    pass


class DimensionMismatch(OtmetricsError):
    def __init__(self, record_id: str, expected: int, got: int, token_index: int | None = None):
        self.record_id = record_id
        self.expected = expected
        self.got = got
        self.token_index = token_index
        where = f", token {token_index}" if token_index is not None else ""
        super().__init__(f"segment {record_id!r}{where}: expected dim {expected}, got {got}")


class BadContinuationFlag(OtmetricsError):
    def __init__(self, record_id: str, token_index: int):
        self.record_id = record_id
        self.token_index = token_index
        super().__init__(
            f"segment {record_id!r}, token {token_index}: is_first_piece contradicts the '##' marker"
        )


class BadWordIndex(OtmetricsError):
    def __init__(self, record_id: str, token_index: int, detail: str):
        self.record_id = record_id
        self.token_index = token_index
        super().__init__(f"segment {record_id!r}, token {token_index}: {detail}")


class NonFiniteComponent(OtmetricsError):
    """A stored vector contains NaN or infinity."""

    def __init__(self, record_id: str, token_index: int):
        self.record_id = record_id
        self.token_index = token_index
        super().__init__(f"segment {record_id!r}, token {token_index}: non-finite vector component")


class MalformedSegment(OtmetricsError):
    """A segment line is not valid JSON or misses required fields."""

    def __init__(self, record_id: str, detail: str):
        self.record_id = record_id
        super().__init__(f"segment {record_id!r}: {detail}")


# ---------------------------------------------------------------------------
# preprocessing


class LayerIndexOutOfRange(OtmetricsError):
    pass


class NonRealResult(OtmetricsError):
    """A power mean is undefined for the given coordinates and exponent."""


# ---------------------------------------------------------------------------
# idf


class EmptyCorpus(OtmetricsError):
    pass


class PoolTooSmall(OtmetricsError):
    pass


# ---------------------------------------------------------------------------
# transport


class TransportDimensionMismatch(OtmetricsError):
    pass


class NumericalFailure(OtmetricsError):
    """The exact solver stalled or could not certify optimality."""


class DegenerateKernel(OtmetricsError):
    """All Gibbs kernel entries underflowed even in log domain."""


class SupportMismatch(OtmetricsError):
    pass


# ---------------------------------------------------------------------------
# metrics


class EmptySide(OtmetricsError):
    """A side has too few units after preprocessing; the pair must be skipped.

    This is a typed skip, not a hard failure: the harness records it and
    excludes the pair from correlations.
    """

    def __init__(self, side: str, needed: int, got: int):
        self.side = side
        self.needed = needed
        self.got = got
        super().__init__(f"{side} side has {got} units, needs at least {needed}")


class EmptyScores(OtmetricsError):
    pass


# ---------------------------------------------------------------------------
# statistics


class DegenerateSeries(OtmetricsError):
    """Zero variance (or no usable pairs) makes the statistic undefined."""


class ZeroReference(OtmetricsError):
    pass


class ZeroMean(OtmetricsError):
    pass


class TooFewValues(OtmetricsError):
    pass


# ---------------------------------------------------------------------------
# harness


class MissingColumn(OtmetricsError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"declared column {name!r} not present in header")


class DuplicateJudgment(OtmetricsError):
    def __init__(self, segment_id: str, system_id: str):
        self.segment_id = segment_id
        self.system_id = system_id
        super().__init__(f"duplicate judgment for segment {segment_id!r}, system {system_id!r}")


class NonNumericScore(OtmetricsError):
    def __init__(self, row: int, value: str):
        self.row = row
        self.value = value
        super().__init__(f"row {row}: score {value!r} is not a number")


class MissingEmbedding(OtmetricsError):
    def __init__(self, segment_id: str, system_id: str | None = None):
        self.segment_id = segment_id
        self.system_id = system_id
        who = f"segment {segment_id!r}" + (f", system {system_id!r}" if system_id else "")
        super().__init__(f"no embeddings for judged {who}")


class GridError(OtmetricsError):
    """A sweep grid file does not match the documented schema."""
