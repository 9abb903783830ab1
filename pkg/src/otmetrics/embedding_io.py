"""Token-embedding interchange format.

Line-delimited JSON: the first line is a header object, every following line
is one segment. The format is the only contract between this package and
whatever model pipeline produced the vectors.

Header line::

    {"dim": 4, "n_layers": 2, "model_id": "...", "version": "1"}

Segment line::

    {"segment_id": "s1", "role": "reference", "system_id": null, "lang": "en",
     "tokens": [{"surface": "smart", "word_index": 0, "is_first_piece": true,
                 "is_punct": false, "layers": [[...], [...]]}, ...]}

Layers are ordered shallow to deep. Vector components are written as decimals
with at most 9 significant digits; parsing accepts any JSON number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    BadContinuationFlag,
    BadWordIndex,
    DimensionMismatch,
    MalformedHeader,
    MalformedSegment,
    NonFiniteComponent,
)

ROLES = ("reference", "hypothesis")

FORMAT_VERSION = "1"


@dataclass(frozen=True)
class EmbeddingFileHeader:
    dim: int
    n_layers: int
    model_id: str
    version: str = FORMAT_VERSION

    def __post_init__(self) -> None:
        if not (isinstance(self.dim, int) and self.dim >= 1):
            raise MalformedHeader(f"dim must be a positive integer, got {self.dim!r}")
        if not (isinstance(self.n_layers, int) and self.n_layers >= 1):
            raise MalformedHeader(f"n_layers must be a positive integer, got {self.n_layers!r}")
        if not isinstance(self.model_id, str) or not isinstance(self.version, str):
            raise MalformedHeader("model_id and version must be strings")


@dataclass(frozen=True)
class TokenRecord:
    surface: str
    word_index: int
    is_first_piece: bool
    is_punct: bool
    layers: np.ndarray  # (n_layers, dim), float64

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", np.asarray(self.layers, dtype=np.float64))
        if self.layers.ndim != 2:
            raise MalformedSegment("?", f"token layers must be a 2-d stack, got shape {self.layers.shape}")
        self.layers.setflags(write=False)


@dataclass(frozen=True)
class SegmentRecord:
    segment_id: str
    role: str
    system_id: str | None
    lang: str
    tokens: tuple[TokenRecord, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.segment_id:
            raise MalformedSegment("", "segment_id must be non-empty")
        if self.role not in ROLES:
            raise MalformedSegment(self.segment_id, f"role must be one of {ROLES}, got {self.role!r}")
        if self.role == "hypothesis" and not self.system_id:
            raise MalformedSegment(self.segment_id, "hypothesis records must carry a system_id")


def validate_segment(segment: SegmentRecord, header: EmbeddingFileHeader) -> None:
    """Check a segment against the header invariants, raising typed errors."""
    prev_word = None
    for t_idx, tok in enumerate(segment.tokens):
        n_layers, dim = tok.layers.shape
        if n_layers != header.n_layers:
            raise DimensionMismatch(segment.segment_id, header.n_layers, n_layers, t_idx)
        if dim != header.dim:
            raise DimensionMismatch(segment.segment_id, header.dim, dim, t_idx)
        if not np.all(np.isfinite(tok.layers)):
            raise NonFiniteComponent(segment.segment_id, t_idx)
        if tok.is_first_piece == tok.surface.startswith("##"):
            raise BadContinuationFlag(segment.segment_id, t_idx)
        if tok.word_index < 0:
            raise BadWordIndex(segment.segment_id, t_idx, "word_index must be non-negative")
        if prev_word is not None:
            if tok.word_index < prev_word:
                raise BadWordIndex(segment.segment_id, t_idx, "word_index decreased")
            if tok.word_index > prev_word and not tok.is_first_piece:
                raise BadWordIndex(
                    segment.segment_id, t_idx, "word_index increased at a continuation piece"
                )
        prev_word = tok.word_index


def _parse_header_line(line: str) -> EmbeddingFileHeader:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"header line is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedHeader("header line must be a JSON object")
    try:
        return EmbeddingFileHeader(
            dim=obj["dim"],
            n_layers=obj["n_layers"],
            model_id=obj["model_id"],
            version=obj.get("version", FORMAT_VERSION),
        )
    except KeyError as exc:
        raise MalformedHeader(f"header misses field {exc.args[0]!r}") from exc


def _segment_from_obj(obj: dict) -> SegmentRecord:
    seg_id = str(obj.get("segment_id", ""))
    try:
        tokens = tuple(
            TokenRecord(
                surface=str(t["surface"]),
                word_index=int(t["word_index"]),
                is_first_piece=bool(t["is_first_piece"]),
                is_punct=bool(t["is_punct"]),
                layers=np.asarray(t["layers"], dtype=np.float64),
            )
            for t in obj["tokens"]
        )
        return SegmentRecord(
            segment_id=seg_id,
            role=obj["role"],
            system_id=obj.get("system_id"),
            lang=str(obj.get("lang", "")),
            tokens=tokens,
        )
    except MalformedSegment:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSegment(seg_id or "?", f"bad segment object: {exc}") from exc


def _iter_segments(path: Path, header: EmbeddingFileHeader) -> Iterator[SegmentRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        fh.readline()  # header, already parsed
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedSegment(f"line {line_no}", f"not valid JSON: {exc}") from exc
            segment = _segment_from_obj(obj)
            validate_segment(segment, header)
            yield segment


def parse_embedding_file(path: str | Path) -> tuple[EmbeddingFileHeader, Iterator[SegmentRecord]]:
    """Parse an interchange file, returning the header and a lazy segment stream.

    Memory stays bounded by one segment; every yielded record has been
    validated against the header.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    if not first.strip():
        raise MalformedHeader(f"{path}: empty file, expected a header line")
    header = _parse_header_line(first)
    return header, _iter_segments(path, header)


def _fmt_float(x: float) -> str:
    # up to 9 significant decimal digits, reproducible across platforms
    return format(float(x), ".9g")


def _segment_to_json(segment: SegmentRecord) -> str:
    tokens = [
        {
            "surface": tok.surface,
            "word_index": tok.word_index,
            "is_first_piece": tok.is_first_piece,
            "is_punct": tok.is_punct,
            "layers": [[float(_fmt_float(v)) for v in layer] for layer in tok.layers],
        }
        for tok in segment.tokens
    ]
    obj = {
        "segment_id": segment.segment_id,
        "role": segment.role,
        "system_id": segment.system_id,
        "lang": segment.lang,
        "tokens": tokens,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_embedding_file(
    path: str | Path, header: EmbeddingFileHeader, segments: Iterable[SegmentRecord]
) -> Path:
    """Write an interchange file. Validation runs before any byte is written."""
    path = Path(path)
    segments = list(segments)
    for segment in segments:
        validate_segment(segment, header)
    header_obj = {
        "dim": header.dim,
        "n_layers": header.n_layers,
        "model_id": header.model_id,
        "version": header.version,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header_obj, ensure_ascii=False, separators=(",", ":")) + "\n")
        for segment in segments:
            fh.write(_segment_to_json(segment) + "\n")
    return path


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "io" | "schema" | "numeric"
    message: str


def validate_embedding_file(path: str | Path) -> list[Diagnostic]:
    """Validate a whole file, collecting one diagnostic per violation.

    Unlike :func:`parse_embedding_file` this does not stop at the first bad
    segment; it continues so the caller can report every problem at once.
    """
    path = Path(path)
    diags: list[Diagnostic] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
            if not first.strip():
                return [Diagnostic("schema", "empty file, expected a header line")]
            try:
                header = _parse_header_line(first)
            except MalformedHeader as exc:
                return [Diagnostic("schema", str(exc))]
            for line_no, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                try:
                    segment = _segment_from_obj(json.loads(line))
                    validate_segment(segment, header)
                except NonFiniteComponent as exc:
                    diags.append(Diagnostic("numeric", str(exc)))
                except json.JSONDecodeError as exc:
                    diags.append(Diagnostic("schema", f"line {line_no}: not valid JSON: {exc}"))
                except (MalformedSegment, DimensionMismatch, BadContinuationFlag, BadWordIndex) as exc:
                    diags.append(Diagnostic("schema", str(exc)))
    except OSError as exc:
        return [Diagnostic("io", str(exc))]
    return diags


def segments_roundtrip_equal(a: SegmentRecord, b: SegmentRecord, sig_digits: int = 9) -> bool:
    """True when two segments are equal up to float formatting at sig_digits."""
    if (a.segment_id, a.role, a.system_id, a.lang) != (b.segment_id, b.role, b.system_id, b.lang):
        return False
    if len(a.tokens) != len(b.tokens):
        return False
    for ta, tb in zip(a.tokens, b.tokens):
        if (ta.surface, ta.word_index, ta.is_first_piece, ta.is_punct) != (
            tb.surface,
            tb.word_index,
            tb.is_first_piece,
            tb.is_punct,
        ):
            return False
        if ta.layers.shape != tb.layers.shape:
            return False
        for va, vb in zip(ta.layers.ravel(), tb.layers.ravel()):
            if format(va, f".{sig_digits}g") != format(vb, f".{sig_digits}g"):
                if not (math.isclose(va, vb, rel_tol=10 ** -(sig_digits - 1), abs_tol=0.0)):
                    return False
    return True
