"""Filtering and layer aggregation that turn a segment into metric-ready units.

One :class:`PreprocessConfig` is one point of the preprocessing factor matrix:
stopword set, punctuation removal, subword strategy, layer aggregation. The
filtering order is fixed: subword strategy, then punctuation removal, then
stopword removal, so sweeps over the factors stay comparable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .embedding_io import SegmentRecord, TokenRecord
from .errors import LayerIndexOutOfRange, NonRealResult


class SubwordStrategy(enum.Enum):
    FIRST_PIECE = "first"
    ALL_PIECES = "all"
    AVERAGE_ALL = "ave-all"


@dataclass(frozen=True)
class SingleLayer:
    """Pick one stored layer. Positive indices count from 1 at the shallow
    end; negative indices count from the deep end (-1 = deepest)."""

    index: int


@dataclass(frozen=True)
class PowerMeans:
    """Concatenated coordinate-wise power means over all stored layers.

    Exponents must be finite nonzero reals or +/-inf (max/min). For exponents
    that are not odd integers, coordinates are shifted by +(1 + |min
    coordinate over the layer stack|) before the mean and shifted back after;
    the shift is part of the contract, keeping the mean real on negative
    coordinates.
    """

    exponents: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponents", tuple(float(p) for p in self.exponents))
        if not self.exponents:
            raise ValueError("PowerMeans needs at least one exponent")
        for p in self.exponents:
            if math.isnan(p) or p == 0.0:
                raise ValueError(f"exponent must be a nonzero real or +/-inf, got {p}")


LayerAggregation = SingleLayer | PowerMeans


@dataclass(frozen=True)
class PreprocessConfig:
    stopwords: frozenset[str] = frozenset()
    remove_punct: bool = False
    subword: SubwordStrategy = SubwordStrategy.ALL_PIECES
    layer_agg: LayerAggregation = SingleLayer(-1)
    stopword_list_id: str = "none"

    def __post_init__(self) -> None:
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        if (self.stopword_list_id == "none") != (len(self.stopwords) == 0):
            raise ValueError("stopword_list_id must be 'none' exactly when the stopword set is empty")


# Defaults mirror the released tools this package models: the mover-style
# pipeline averages the stored layer stack (files are expected to carry the
# five deepest encoder layers), keeps first pieces only and drops punctuation;
# the bertscore-style pipeline reads hidden layer 9 and keeps everything.
MOVER_DEFAULT_PREP = PreprocessConfig(
    remove_punct=True,
    subword=SubwordStrategy.FIRST_PIECE,
    layer_agg=PowerMeans((1.0,)),
)
BERTSCORE_DEFAULT_PREP = PreprocessConfig(
    remove_punct=False,
    subword=SubwordStrategy.ALL_PIECES,
    layer_agg=SingleLayer(9),
)


@dataclass(frozen=True)
class ProcessedToken:
    unit: str
    vector: np.ndarray
    source_word_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float64))
        self.vector.setflags(write=False)


def match_key(unit: str) -> str:
    """Key used for stopword and IDF lookups: '##' marker stripped, lowercased."""
    if unit.startswith("##"):
        unit = unit[2:]
    return unit.lower()


def _resolve_layer(index: int, n_layers: int) -> int:
    if index >= 1 and index <= n_layers:
        return index - 1
    if index < 0 and -index <= n_layers:
        return n_layers + index
    raise LayerIndexOutOfRange(f"layer index {index} does not resolve within {n_layers} stored layers")


_ODD_INT_LIMIT = 2**53


def _is_odd_integer(p: float) -> bool:
    return abs(p) < _ODD_INT_LIMIT and p == int(p) and int(p) % 2 != 0


def _power_mean(layers: np.ndarray, p: float) -> np.ndarray:
    """Coordinate-wise power mean across the layer axis."""
    if math.isinf(p):
        return layers.max(axis=0) if p > 0 else layers.min(axis=0)
    if p == 1.0:
        return layers.mean(axis=0)
    if _is_odd_integer(p):
        # odd powers preserve sign, so no shift is needed; guard zeros for p < 0
        if p < 0 and np.any(layers == 0.0):
            raise NonRealResult(f"power mean with exponent {p} undefined on zero coordinates")
        with np.errstate(over="raise", divide="raise"):
            try:
                m = np.mean(layers**p, axis=0)
                return np.sign(m) * np.abs(m) ** (1.0 / p)
            except FloatingPointError as exc:
                raise NonRealResult(f"power mean with exponent {p} overflowed") from exc
    shift = 1.0 + abs(float(layers.min()))
    shifted = layers + shift
    with np.errstate(over="raise", divide="raise", invalid="raise"):
        try:
            m = np.mean(shifted**p, axis=0) ** (1.0 / p)
        except FloatingPointError as exc:
            raise NonRealResult(f"power mean with exponent {p} not representable") from exc
    return m - shift


def aggregate_layers(token: TokenRecord, agg: LayerAggregation) -> np.ndarray:
    """Collapse a token's layer stack into one vector.

    SingleLayer returns the chosen layer. PowerMeans returns the concatenation
    of one power mean per exponent, in exponent order, so the output width is
    dim * len(exponents).
    """
    layers = token.layers
    if layers.shape[0] == 0:
        raise LayerIndexOutOfRange("token has no stored layers")
    if isinstance(agg, SingleLayer):
        return layers[_resolve_layer(agg.index, layers.shape[0])]
    parts = [_power_mean(layers, p) for p in agg.exponents]
    out = np.concatenate(parts)
    if not np.all(np.isfinite(out)):
        raise NonRealResult("aggregated vector has non-finite components")
    return out


def _word_groups(tokens: tuple[TokenRecord, ...]) -> list[list[TokenRecord]]:
    groups: list[list[TokenRecord]] = []
    for tok in tokens:
        if tok.is_first_piece or not groups:
            groups.append([tok])
        else:
            groups[-1].append(tok)
    return groups


def _reconstruct_word(pieces: list[TokenRecord]) -> str:
    return pieces[0].surface + "".join(p.surface[2:] for p in pieces[1:])


def preprocess_segment(segment: SegmentRecord, config: PreprocessConfig) -> list[ProcessedToken]:
    """Apply the subword strategy, punctuation and stopword filters in order.

    May return an empty list; degenerate segments are the caller's problem
    (metrics turn them into typed skips).
    """
    units: list[tuple[str, np.ndarray, int, bool]] = []  # (unit, vector, word_index, is_punct)
    if config.subword is SubwordStrategy.AVERAGE_ALL:
        for pieces in _word_groups(segment.tokens):
            vecs = [aggregate_layers(p, config.layer_agg) for p in pieces]
            word = _reconstruct_word(pieces)
            units.append(
                (word, np.mean(vecs, axis=0), pieces[0].word_index, all(p.is_punct for p in pieces))
            )
    else:
        keep_all = config.subword is SubwordStrategy.ALL_PIECES
        for tok in segment.tokens:
            if keep_all or tok.is_first_piece:
                units.append(
                    (tok.surface, aggregate_layers(tok, config.layer_agg), tok.word_index, tok.is_punct)
                )
    out: list[ProcessedToken] = []
    for unit, vector, word_index, is_punct in units:
        if config.remove_punct and is_punct:
            continue
        if config.stopwords and match_key(unit) in config.stopwords:
            continue
        out.append(ProcessedToken(unit=unit, vector=vector, source_word_index=word_index))
    return out


def preprocess_segment_per_layer(
    segment: SegmentRecord, config: PreprocessConfig, n_layers_used: int
) -> list[list[ProcessedToken]]:
    """Layer-aggregation bypass: filtered units for each of the deepest
    n_layers_used layers separately, shallow to deep.

    Filtering decisions do not depend on the layer, so every returned list
    holds the same units in the same order.
    """
    if n_layers_used < 1:
        raise LayerIndexOutOfRange("n_layers_used must be >= 1")
    per_layer = []
    for i in range(n_layers_used):
        cfg = replace(config, layer_agg=SingleLayer(i - n_layers_used))
        per_layer.append(preprocess_segment(segment, cfg))
    return per_layer


def load_stopword_list(path: str | Path) -> set[str]:
    """Read a one-entry-per-line stopword file: trimmed, lowercased, deduplicated.

    An empty file is not an error; it yields the disabled setting.
    """
    out: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip().lower()
            if entry:
                out.add(entry)
    return out


def config_with_stopwords(base: PreprocessConfig, words: set[str], list_id: str) -> PreprocessConfig:
    """Attach a stopword list to a config, keeping the id/set invariant."""
    if not words:
        return replace(base, stopwords=frozenset(), stopword_list_id="none")
    return replace(base, stopwords=frozenset(words), stopword_list_id=list_id)


def bundled_stopword_path(size: int) -> Path:
    """Path of a shipped English stopword list (153 or 179 entries)."""
    path = Path(__file__).parent / "data" / f"stopwords_en_{size}.txt"
    if not path.exists():
        raise FileNotFoundError(f"no bundled stopword list of size {size}")
    return path
