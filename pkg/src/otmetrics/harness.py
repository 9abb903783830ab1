"""Evaluation harness: judgments, scoring runs, correlations, sweeps.

Judgment files are CSV/TSV with a mandatory header row, and columns are bound
strictly by declared name, never by position; grabbing an adjacent numeric
column must be structurally impossible.

A sweep varies one preprocessing factor at a time (stopword list, IDF source,
subword/punctuation handling) while the other factors stay at their default
settings, then summarizes each factor's correlations with the spread and
difference statistics from the stats module.
"""

from __future__ import annotations

import csv
import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from . import stats
from .embedding_io import EmbeddingFileHeader, SegmentRecord, parse_embedding_file
from .errors import (
    DuplicateJudgment,
    EmptySide,
    GridError,
    MissingColumn,
    MissingEmbedding,
    NonNumericScore,
    ZeroMean,
)
from .idf import (
    DISABLED_TABLE,
    Disabled,
    ExternalCorpus,
    IdfMode,
    IdfScope,
    IdfTable,
    Original,
    SampledCorpus,
    build_idf,
    sample_idf_corpus,
)
from .metrics import (
    BaryConfig,
    BaryDistance,
    BertScoreConfig,
    BertScoreVariant,
    MetricConfig,
    MoverConfig,
    MultiRefStrategy,
    ScoredPair,
    aggregate_multi_reference,
    bary_score_from_sides,
    bary_side_distribution,
    bert_score_pair,
    mover_score,
)
from .preprocess import (
    PowerMeans,
    PreprocessConfig,
    SingleLayer,
    SubwordStrategy,
    config_with_stopwords,
    load_stopword_list,
    match_key,
    preprocess_segment,
    preprocess_segment_per_layer,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# judgments


class JudgmentKind(enum.Enum):
    DIRECT_ASSESSMENT = "da"
    RELATIVE_RANKING = "darr"
    SUMMARY_CRITERION = "summary"


@dataclass(frozen=True)
class JudgmentSchema:
    """Column names for a judgment file; binding is by name only."""

    kind: JudgmentKind
    segment_col: str = "segment_id"
    system_col: str = "system_id"
    score_col: str = "score"
    better_col: str = "better_system"
    worse_col: str = "worse_system"
    criterion_col: str | None = None
    criterion: str = ""


@dataclass(frozen=True)
class JudgmentDataset:
    kind: JudgmentKind
    lang_pair: str = ""
    criterion: str = ""
    scores: Mapping[tuple[str, str], float] = field(default_factory=dict)
    rankings: tuple[tuple[str, str, str], ...] = ()  # (segment, better, worse)

    def judged_keys(self) -> list[tuple[str, str]]:
        if self.kind is JudgmentKind.RELATIVE_RANKING:
            seen: dict[tuple[str, str], None] = {}
            for seg, better, worse in self.rankings:
                seen.setdefault((seg, better))
                seen.setdefault((seg, worse))
            return list(seen)
        return list(self.scores)


def _open_rows(path: Path) -> tuple[list[str], list[dict[str, str]]]:
    delimiter = "\t" if path.suffix.lower() == ".tsv" else ","
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise MissingColumn("<header row>")
        return list(reader.fieldnames), list(reader)


def load_judgments(path: str | Path, schema: JudgmentSchema, lang_pair: str = "") -> JudgmentDataset:
    """Load a judgment file, resolving every column strictly by declared name."""
    path = Path(path)
    header, rows = _open_rows(path)
    if schema.kind is JudgmentKind.RELATIVE_RANKING:
        needed = [schema.segment_col, schema.better_col, schema.worse_col]
    else:
        needed = [schema.segment_col, schema.system_col, schema.score_col]
        if schema.criterion_col:
            needed.append(schema.criterion_col)
    for name in needed:
        if name not in header:
            raise MissingColumn(name)
    extra = [c for c in header if c not in needed]
    if extra:
        logger.info("ignoring extra columns %s in %s", extra, path.name)

    if schema.kind is JudgmentKind.RELATIVE_RANKING:
        rankings = tuple(
            (row[schema.segment_col], row[schema.better_col], row[schema.worse_col]) for row in rows
        )
        return JudgmentDataset(kind=schema.kind, lang_pair=lang_pair, rankings=rankings)

    scores: dict[tuple[str, str], float] = {}
    for row_no, row in enumerate(rows, start=2):
        if schema.criterion_col and row[schema.criterion_col] != schema.criterion:
            continue
        key = (row[schema.segment_col], row[schema.system_col])
        if key in scores:
            raise DuplicateJudgment(*key)
        raw = row[schema.score_col]
        try:
            value = float(raw)
        except (TypeError, ValueError) as exc:
            raise NonNumericScore(row_no, str(raw)) from exc
        scores[key] = value
    return JudgmentDataset(
        kind=schema.kind, lang_pair=lang_pair, criterion=schema.criterion, scores=scores
    )


# ---------------------------------------------------------------------------
# embeddings


@dataclass
class EmbeddingStore:
    """All segments of one interchange file, indexed for judged lookups."""

    header: EmbeddingFileHeader
    references: dict[str, list[SegmentRecord]]
    hypotheses: dict[tuple[str, str], SegmentRecord]
    segments: list[SegmentRecord]

    @classmethod
    def from_file(cls, path: str | Path) -> "EmbeddingStore":
        header, stream = parse_embedding_file(path)
        refs: dict[str, list[SegmentRecord]] = {}
        hyps: dict[tuple[str, str], SegmentRecord] = {}
        segments: list[SegmentRecord] = []
        for seg in stream:
            segments.append(seg)
            if seg.role == "reference":
                refs.setdefault(seg.segment_id, []).append(seg)
            else:
                hyps[(seg.segment_id, seg.system_id or "")] = seg
        return cls(header=header, references=refs, hypotheses=hyps, segments=segments)

    @classmethod
    def merge(cls, refs_path: str | Path, hyps_path: str | Path) -> "EmbeddingStore":
        a = cls.from_file(refs_path)
        b = cls.from_file(hyps_path)
        if (a.header.dim, a.header.n_layers) != (b.header.dim, b.header.n_layers):
            raise GridError("reference and hypothesis files disagree on dim/n_layers")
        refs = dict(a.references)
        for k, v in b.references.items():
            refs.setdefault(k, []).extend(v)
        hyps = dict(a.hypotheses)
        hyps.update(b.hypotheses)
        return cls(header=a.header, references=refs, hypotheses=hyps, segments=a.segments + b.segments)


# ---------------------------------------------------------------------------
# scoring runs


@dataclass(frozen=True)
class SkipRecord:
    segment_id: str
    system_id: str
    reason: str


@dataclass(frozen=True)
class ScoreRun:
    pairs: tuple[ScoredPair, ...]
    skips: tuple[SkipRecord, ...]
    n_judged: int


def _idf_documents(segments: Sequence[SegmentRecord], prep: PreprocessConfig) -> list[list[str]]:
    return [[match_key(u.unit) for u in preprocess_segment(seg, prep)] for seg in segments]


def _build_tables(
    store: EmbeddingStore, prep: PreprocessConfig, mode: IdfMode, scope: IdfScope
) -> tuple[IdfTable, IdfTable]:
    """Reference-side and hypothesis-side weight tables for one run."""
    if isinstance(mode, Disabled):
        return DISABLED_TABLE, DISABLED_TABLE
    if isinstance(mode, Original):
        ref_segments = [s for s in store.segments if s.role == "reference"]
        hyp_segments = [s for s in store.segments if s.role == "hypothesis"]
        if scope is IdfScope.REF_AND_HYP_SEPARATE:
            ref_table = build_idf(_idf_documents(ref_segments, prep), mode, scope)
            hyp_table = build_idf(_idf_documents(hyp_segments, prep), mode, scope)
            return ref_table, hyp_table
        if scope is IdfScope.REF_ONLY:
            table = build_idf(_idf_documents(ref_segments, prep), mode, scope)
            return table, table
        table = build_idf(_idf_documents(store.segments, prep), mode, scope)
        return table, table
    if isinstance(mode, SampledCorpus):
        pool = store.segments
        sampled = sample_idf_corpus(pool, mode.k, mode.seed)
        table = build_idf(_idf_documents(sampled, prep), mode, IdfScope.SINGLE_CORPUS)
        return table, table
    if isinstance(mode, ExternalCorpus):
        docs: list[list[str]] = []
        with open(mode.path, "r", encoding="utf-8") as fh:
            for line in fh:
                keys = line.split()
                if keys:
                    docs.append(keys)
        table = build_idf(docs, mode, IdfScope.SINGLE_CORPUS)
        return table, table
    raise TypeError(f"unknown idf mode {mode!r}")


def score_dataset(
    store: EmbeddingStore,
    judgments: JudgmentDataset,
    metric: MetricConfig,
    prep: PreprocessConfig,
    idf_mode: IdfMode,
    multi_ref: MultiRefStrategy = MultiRefStrategy.MEAN,
) -> ScoreRun:
    """Score every judged (segment, system) pair. Deterministic given inputs."""
    return _score_keys(store, judgments.judged_keys(), metric, prep, idf_mode, multi_ref)


def score_all_pairs(
    store: EmbeddingStore,
    metric: MetricConfig,
    prep: PreprocessConfig,
    idf_mode: IdfMode,
    multi_ref: MultiRefStrategy = MultiRefStrategy.MEAN,
) -> ScoreRun:
    """Score every hypothesis in the store against its references."""
    return _score_keys(store, sorted(store.hypotheses), metric, prep, idf_mode, multi_ref)


def _score_keys(
    store: EmbeddingStore,
    keys: list[tuple[str, str]],
    metric: MetricConfig,
    prep: PreprocessConfig,
    idf_mode: IdfMode,
    multi_ref: MultiRefStrategy,
) -> ScoreRun:
    for seg_id, sys_id in keys:
        if (seg_id, sys_id) not in store.hypotheses:
            raise MissingEmbedding(seg_id, sys_id)
        if seg_id not in store.references:
            raise MissingEmbedding(seg_id)

    ref_table, hyp_table = _build_tables(store, prep, idf_mode, metric.idf_scope)

    prep_cache: dict[int, list] = {}
    bary_cache: dict[int, object] = {}

    def units(segment: SegmentRecord) -> list:
        key = id(segment)
        if key not in prep_cache:
            if isinstance(metric, BaryConfig):
                prep_cache[key] = preprocess_segment_per_layer(segment, prep, metric.n_layers_used)
            else:
                prep_cache[key] = preprocess_segment(segment, prep)
        return prep_cache[key]

    def bary_side(segment: SegmentRecord, table, side_name: str):
        # side distributions are reused across every pair the segment enters
        key = id(segment)
        if key not in bary_cache:
            layer_units = units(segment)
            if not layer_units or not layer_units[0]:
                bary_cache[key] = None
            else:
                weights = table if metric.mass_weighting == "idf" else None
                bary_cache[key] = bary_side_distribution(layer_units, metric, weights)
        if bary_cache[key] is None:
            raise EmptySide(side_name, 1, 0)
        return bary_cache[key]

    def score_one(ref_seg: SegmentRecord, hyp_seg: SegmentRecord, seg_id: str, sys_id: str) -> ScoredPair:
        if isinstance(metric, MoverConfig):
            return mover_score(
                units(ref_seg), units(hyp_seg), ref_table, hyp_table, metric.n, seg_id, sys_id
            )
        if isinstance(metric, BertScoreConfig):
            return bert_score_pair(
                units(ref_seg), units(hyp_seg), ref_table, metric.variant, seg_id, sys_id
            )
        return bary_score_from_sides(
            bary_side(ref_seg, ref_table, "reference"),
            bary_side(hyp_seg, hyp_table, "hypothesis"),
            metric, seg_id, sys_id,
        ).pair

    pairs: list[ScoredPair] = []
    skips: list[SkipRecord] = []
    for seg_id, sys_id in keys:
        hyp_seg = store.hypotheses[(seg_id, sys_id)]
        ref_scores: list[float] = []
        raws: list[float] = []
        ref_skips = 0
        hyp_empty = False
        for ref_seg in store.references[seg_id]:
            try:
                scored = score_one(ref_seg, hyp_seg, seg_id, sys_id)
            except EmptySide as exc:
                if exc.side == "hypothesis":
                    hyp_empty = True
                    break
                ref_skips += 1
                continue
            ref_scores.append(scored.score)
            if scored.raw_distance is not None:
                raws.append(scored.raw_distance)
        if hyp_empty:
            skips.append(SkipRecord(seg_id, sys_id, "hypothesis-empty"))
            continue
        if not ref_scores:
            skips.append(SkipRecord(seg_id, sys_id, "reference-empty"))
            continue
        if ref_skips:
            logger.info("segment %s/%s: %d of %d references skipped", seg_id, sys_id,
                        ref_skips, ref_skips + len(ref_scores))
        score = aggregate_multi_reference(ref_scores, multi_ref)
        raw = raws[0] if len(raws) == 1 and len(ref_scores) == 1 else None
        pairs.append(ScoredPair(seg_id, sys_id, metric.label, score, raw))
    return ScoreRun(pairs=tuple(pairs), skips=tuple(skips), n_judged=len(keys))


# ---------------------------------------------------------------------------
# correlation levels


class Level(enum.Enum):
    SEGMENT = "segment"
    SYSTEM = "system"
    SUMMARY = "summary"


def statistics_for(level: Level, kind: JudgmentKind) -> list[str]:
    if level is Level.SYSTEM:
        return ["pearson"]
    if level is Level.SUMMARY:
        return ["pearson", "spearman", "kendall"]
    if kind is JudgmentKind.RELATIVE_RANKING:
        return ["wmt_kendall_like"]
    return ["abs_pearson"]


def correlate(
    pairs: Sequence[ScoredPair], judgments: JudgmentDataset, level: Level
) -> dict[str, float]:
    """Correlate metric scores with human judgments at the requested level.

    Pairs missing on either side (for example typed skips) are excluded
    pairwise.
    """
    scores = {(p.segment_id, p.system_id): p.score for p in pairs}

    if level is Level.SEGMENT and judgments.kind is JudgmentKind.RELATIVE_RANKING:
        items = [
            (scores[(seg, better)], scores[(seg, worse)])
            for seg, better, worse in judgments.rankings
            if (seg, better) in scores and (seg, worse) in scores
        ]
        return {"wmt_kendall_like": stats.wmt_kendall_like(stats.RelativeRankingSet(tuple(items)))}

    keyed = sorted(k for k in judgments.scores if k in scores)
    xs = [scores[k] for k in keyed]
    ys = [judgments.scores[k] for k in keyed]

    if level is Level.SYSTEM:
        by_system: dict[str, list[tuple[float, float]]] = {}
        for (seg, sys_id), x, y in zip(keyed, xs, ys):
            by_system.setdefault(sys_id, []).append((x, y))
        systems = sorted(by_system)
        sys_x = [sum(v[0] for v in by_system[s]) / len(by_system[s]) for s in systems]
        sys_y = [sum(v[1] for v in by_system[s]) / len(by_system[s]) for s in systems]
        return {"pearson": stats.pearson(stats.PairedSeries(tuple(sys_x), tuple(sys_y)))}

    series = stats.PairedSeries(tuple(xs), tuple(ys))
    if level is Level.SUMMARY:
        return {
            "pearson": stats.pearson(series),
            "spearman": stats.spearman(series),
            "kendall": stats.kendall_tau_b(series),
        }
    return {"abs_pearson": stats.abs_pearson(series)}


# ---------------------------------------------------------------------------
# sweeps


STOPWORD_FACTOR = "stopwords"
IDF_FACTOR = "idf"
SUBWORD_FACTOR = "subword_punct"

_SUB_LABELS = {
    (SubwordStrategy.FIRST_PIECE, True): "first+pr",
    (SubwordStrategy.ALL_PIECES, True): "all+pr",
    (SubwordStrategy.AVERAGE_ALL, True): "ave-all+pr",
    (SubwordStrategy.FIRST_PIECE, False): "first",
    (SubwordStrategy.ALL_PIECES, False): "all",
    (SubwordStrategy.AVERAGE_ALL, False): "ave-all",
}

DEFAULT_STOPWORD_LABEL = "none"
DEFAULT_IDF_LABEL = "ori"
DEFAULT_SUB_LABEL = "first+pr"


@dataclass(frozen=True)
class SweepGrid:
    """Declarative factor matrix for one sweep."""

    stopword_settings: tuple[tuple[str, frozenset[str]], ...]
    idf_settings: tuple[tuple[str, IdfMode], ...]
    subword_punct_settings: tuple[tuple[SubwordStrategy, bool], ...]
    metrics: tuple[MetricConfig, ...]
    seed: int = 0
    level: Level = Level.SEGMENT
    multi_ref: MultiRefStrategy = MultiRefStrategy.MEAN
    bertscore_layer: int = -1
    mover_exponents: tuple[float, ...] = (1.0,)

    def __post_init__(self) -> None:
        if not (self.stopword_settings and self.idf_settings
                and self.subword_punct_settings and self.metrics):
            raise GridError("every factor list must be non-empty")
        stop_labels = [label for label, _ in self.stopword_settings]
        idf_labels = [label for label, _ in self.idf_settings]
        sub_labels = [_SUB_LABELS[s] for s in self.subword_punct_settings]
        for labels, what in ((stop_labels, "stopword"), (idf_labels, "idf"), (sub_labels, "subword")):
            if len(set(labels)) != len(labels):
                raise GridError(f"duplicate {what} setting labels: {labels}")


def assign_idf_seeds(grid: SweepGrid) -> tuple[tuple[str, IdfMode], ...]:
    """Give the i-th sampled-corpus setting the seed grid.seed + i."""
    out = []
    rand_index = 0
    for label, mode in grid.idf_settings:
        if isinstance(mode, SampledCorpus):
            mode = SampledCorpus(k=mode.k, seed=grid.seed + rand_index)
            rand_index += 1
        out.append((label, mode))
    return tuple(out)


@dataclass(frozen=True)
class FactorStats:
    cv: float | None
    value_range: float | None
    best: str


def factor_statistics(
    correlations: Mapping[str, float],
    default_label: str,
    spread_labels: Sequence[str] | None = None,
) -> FactorStats:
    """Spread and best-setting summary of one factor's correlations.

    cv and range cover spread_labels (all labels when omitted) and are absent
    when fewer than two of them have values. The best setting is the highest
    correlation over all labels, ties broken toward the default.
    """
    if spread_labels is None:
        spread_labels = list(correlations)
    spread = [correlations[lab] for lab in spread_labels if lab in correlations]
    cv_val = range_val = None
    if len(spread) >= 2:
        try:
            cv_val = stats.cv(spread)
        except ZeroMean:
            cv_val = None
        range_val = stats.range_of(spread)
    best = max(correlations, key=lambda lab: (correlations[lab], lab == default_label))
    return FactorStats(cv=cv_val, value_range=range_val, best=best)


@dataclass(frozen=True)
class CellResult:
    correlations: dict[str, float] | None
    error: str | None
    skipped: int
    n_judged: int


@dataclass
class SensitivityReport:
    seed: int
    level: str
    statistic_names: list[str]
    cells: dict[str, CellResult]
    factors: dict[str, dict[str, dict]]  # metric -> factor -> report dict
    comparisons: dict[str, dict[str, dict]]  # metric -> stat -> comparison values
    best_setting_tally: dict[str, dict[str, int]]
    flagged_cells: list[str]
    total_skipped: int

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "level": self.level,
            "statistics": self.statistic_names,
            "cells": {
                key: {
                    "correlations": cell.correlations,
                    "error": cell.error,
                    "skipped": cell.skipped,
                    "n_judged": cell.n_judged,
                }
                for key, cell in sorted(self.cells.items())
            },
            "factors": self.factors,
            "comparisons": self.comparisons,
            "best_setting_tally": self.best_setting_tally,
            "flagged_cells": self.flagged_cells,
            "total_skipped": self.total_skipped,
        }


def _base_layer_agg(metric: MetricConfig, grid: SweepGrid):
    if isinstance(metric, BertScoreConfig):
        return SingleLayer(grid.bertscore_layer)
    return PowerMeans(grid.mover_exponents)


def _cell_key(metric_label: str, stop: str, idf_label: str, sub: str) -> str:
    return f"{metric_label}|stop={stop}|idf={idf_label}|sub={sub}"


def run_sweep(
    grid: SweepGrid,
    store: EmbeddingStore,
    judgments: JudgmentDataset,
    threads: int = 1,
) -> SensitivityReport:
    """One-factor-at-a-time sweep over the grid, reduced to a sensitivity report.

    Cell jobs are independent and may run in parallel; the report is defined
    to be independent of scheduling because sampled-corpus seeds derive from
    the grid seed and setting position, never from execution order.
    """
    idf_settings = assign_idf_seeds(grid)
    idf_by_label = dict(idf_settings)
    stop_by_label = dict(grid.stopword_settings)
    sub_by_label = {_SUB_LABELS[s]: s for s in grid.subword_punct_settings}

    stop_labels = [label for label, _ in grid.stopword_settings]
    idf_labels = [label for label, _ in idf_settings]
    sub_labels = list(sub_by_label)

    stop_default = DEFAULT_STOPWORD_LABEL if DEFAULT_STOPWORD_LABEL in stop_by_label else stop_labels[0]
    idf_default = DEFAULT_IDF_LABEL if DEFAULT_IDF_LABEL in idf_by_label else idf_labels[0]
    sub_default = DEFAULT_SUB_LABEL if DEFAULT_SUB_LABEL in sub_by_label else sub_labels[0]

    # one-factor-at-a-time cell set, deduplicated on the full setting tuple
    cell_specs: dict[str, tuple[MetricConfig, str, str, str]] = {}
    for metric in grid.metrics:
        for stop in stop_labels:
            key = _cell_key(metric.label, stop, idf_default, sub_default)
            cell_specs.setdefault(key, (metric, stop, idf_default, sub_default))
        for idf_label in idf_labels:
            key = _cell_key(metric.label, stop_default, idf_label, sub_default)
            cell_specs.setdefault(key, (metric, stop_default, idf_label, sub_default))
        for sub in sub_labels:
            key = _cell_key(metric.label, stop_default, idf_default, sub)
            cell_specs.setdefault(key, (metric, stop_default, idf_default, sub))

    def run_cell(spec: tuple[MetricConfig, str, str, str]) -> CellResult:
        metric, stop, idf_label, sub = spec
        try:
            strategy, remove_punct = sub_by_label[sub]
            prep = PreprocessConfig(
                remove_punct=remove_punct,
                subword=strategy,
                layer_agg=_base_layer_agg(metric, grid),
            )
            prep = config_with_stopwords(prep, set(stop_by_label[stop]), stop)
            run = score_dataset(store, judgments, metric, prep, idf_by_label[idf_label], grid.multi_ref)
            corr = correlate(run.pairs, judgments, grid.level)
            return CellResult(
                correlations=corr, error=None, skipped=len(run.skips), n_judged=run.n_judged
            )
        except Exception as exc:  # noqa: BLE001 - cell failures are data, not crashes
            return CellResult(correlations=None, error=f"{type(exc).__name__}: {exc}", skipped=0, n_judged=0)

    keys = sorted(cell_specs)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_cell, (cell_specs[k] for k in keys)))
        cells = dict(zip(keys, results))
    else:
        cells = {k: run_cell(cell_specs[k]) for k in keys}

    stat_names = statistics_for(grid.level, judgments.kind)
    rand_labels = [label for label, mode in idf_settings if isinstance(mode, SampledCorpus)]
    sub_spread_labels = [
        lab for lab in ("first+pr", "all+pr", "ave-all+pr") if lab in sub_by_label
    ]

    def cell_value(metric: MetricConfig, stop: str, idf_label: str, sub: str, stat: str) -> float | None:
        cell = cells[_cell_key(metric.label, stop, idf_label, sub)]
        if cell.correlations is None:
            return None
        return cell.correlations.get(stat)

    factors: dict[str, dict[str, dict]] = {}
    comparisons: dict[str, dict[str, dict]] = {}
    tally: dict[str, dict[str, int]] = {
        STOPWORD_FACTOR: {}, IDF_FACTOR: {}, SUBWORD_FACTOR: {},
    }

    for metric in grid.metrics:
        factors[metric.label] = {}
        comparisons[metric.label] = {}
        factor_plan = [
            (STOPWORD_FACTOR, stop_labels, stop_default, None,
             lambda lab, stat: cell_value(metric, lab, idf_default, sub_default, stat)),
            (IDF_FACTOR, idf_labels, idf_default,
             ([idf_default] + rand_labels) if idf_default == DEFAULT_IDF_LABEL else rand_labels,
             lambda lab, stat: cell_value(metric, stop_default, lab, sub_default, stat)),
            (SUBWORD_FACTOR, sub_labels, sub_default, sub_spread_labels,
             lambda lab, stat: cell_value(metric, stop_default, idf_default, lab, stat)),
        ]
        for factor, labels, default, spread, getter in factor_plan:
            per_stat: dict[str, dict] = {}
            for stat in stat_names:
                corrs = {lab: v for lab in labels if (v := getter(lab, stat)) is not None}
                if not corrs:
                    per_stat[stat] = {"settings": {}, "cv": None, "range": None, "best": None}
                    continue
                fs = factor_statistics(corrs, default, spread)
                per_stat[stat] = {
                    "settings": corrs,
                    "cv": fs.cv,
                    "range": fs.value_range,
                    "best": fs.best,
                }
                tally[factor][fs.best] = tally[factor].get(fs.best, 0) + 1
            factors[metric.label][factor] = per_stat

        for stat in stat_names:
            idf_corr = {lab: cell_value(metric, stop_default, lab, sub_default, stat) for lab in idf_labels}
            sub_corr = {lab: cell_value(metric, stop_default, idf_default, lab, stat) for lab in sub_labels}
            comp: dict[str, float | list | None] = {}
            ori, dis = idf_corr.get("ori"), idf_corr.get("dis")
            comp["rd_dis_ori"] = stats.rd(dis, ori) if dis is not None and ori not in (None, 0.0) else None
            comp["ad_dis_ori"] = stats.ad(dis, ori) if dis is not None and ori is not None else None
            pr_on = sub_corr.get("first+pr")
            pr_off = sub_corr.get("first")
            comp["rd_dis_pr"] = (
                stats.rd(pr_off, pr_on) if pr_off is not None and pr_on not in (None, 0.0) else None
            )
            comp["ad_dis_pr"] = stats.ad(pr_off, pr_on) if pr_off is not None and pr_on is not None else None
            rands = [idf_corr[lab] for lab in rand_labels if idf_corr.get(lab) is not None]
            comp["rd_rand_dis"] = (
                [stats.rd(r, dis) for r in rands] if rands and dis not in (None, 0.0) else None
            )
            comp["rd_rand_ori"] = (
                [stats.rd(r, ori) for r in rands] if rands and ori not in (None, 0.0) else None
            )
            comparisons[metric.label][stat] = comp

    flagged = []
    total_skipped = 0
    for key, cell in sorted(cells.items()):
        total_skipped += cell.skipped
        if cell.n_judged and cell.skipped / cell.n_judged > 0.05:
            flagged.append(key)

    return SensitivityReport(
        seed=grid.seed,
        level=grid.level.value,
        statistic_names=stat_names,
        cells=cells,
        factors=factors,
        comparisons=comparisons,
        best_setting_tally=tally,
        flagged_cells=flagged,
        total_skipped=total_skipped,
    )


# ---------------------------------------------------------------------------
# grid files


_GRID_KEYS = {
    "stopwords", "idf", "subword_punct", "metrics", "seed", "level", "multi_ref",
    "judgments", "lang_pair", "bertscore_layer", "mover_exponents",
}


def _parse_metric(obj: dict) -> MetricConfig:
    kind = obj.get("kind")
    if kind == "mover":
        return MoverConfig(n=int(obj.get("n", 1)))
    if kind == "bertscore":
        variant = str(obj.get("variant", "f1"))
        if variant not in ("p", "r", "f1"):
            raise GridError(f"unknown bertscore variant {variant!r}")
        return BertScoreConfig(variant=BertScoreVariant(variant))
    if kind == "bary":
        distance = str(obj.get("distance", "wasserstein"))
        try:
            dist = BaryDistance(distance)
        except ValueError as exc:
            raise GridError(f"unknown bary distance {distance!r}") from exc
        return BaryConfig(
            distance=dist,
            epsilon=float(obj.get("epsilon", 0.01)),
            n_layers_used=int(obj.get("n_layers_used", 5)),
            mass_weighting=str(obj.get("mass_weighting", "uniform")),
            max_iter=int(obj.get("max_iter", 1000)),
            tol=float(obj.get("tol", 1e-6)),
        )
    raise GridError(f"unknown metric kind {kind!r}")


def parse_grid(obj: dict, base_dir: Path | None = None) -> tuple[SweepGrid, JudgmentSchema]:
    """Build a grid and judgment schema from a parsed grid JSON document."""
    unknown = set(obj) - _GRID_KEYS
    if unknown:
        raise GridError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
    base_dir = base_dir or Path(".")

    stop_settings: list[tuple[str, frozenset[str]]] = []
    for entry in obj.get("stopwords", [{"label": "none", "path": None}]):
        label = entry.get("label")
        path = entry.get("path")
        if label is None:
            raise GridError("stopword setting misses 'label'")
        words = frozenset() if path is None else frozenset(load_stopword_list(base_dir / path))
        stop_settings.append((label, words))

    idf_settings: list[tuple[str, IdfMode]] = []
    rand_count = 0
    for entry in obj.get("idf", ["ori"]):
        if entry == "ori":
            idf_settings.append(("ori", Original()))
        elif entry == "dis":
            idf_settings.append(("dis", Disabled()))
        elif isinstance(entry, dict) and "sampled_k" in entry:
            rand_count += 1
            idf_settings.append((f"rand{rand_count}", SampledCorpus(k=int(entry["sampled_k"]), seed=0)))
        elif isinstance(entry, dict) and "external" in entry:
            path = str(base_dir / entry["external"])
            idf_settings.append((entry.get("label", f"ext:{Path(path).stem}"), ExternalCorpus(path)))
        else:
            raise GridError(f"unknown idf setting {entry!r}")

    sub_settings: list[tuple[SubwordStrategy, bool]] = []
    by_label = {v: k for k, v in _SUB_LABELS.items()}
    for entry in obj.get("subword_punct", ["first+pr"]):
        if entry not in by_label:
            raise GridError(f"unknown subword/punctuation setting {entry!r}")
        sub_settings.append(by_label[entry])

    metric_entries = obj.get("metrics", [{"kind": "mover", "n": 1}])
    metrics = tuple(_parse_metric(m) for m in metric_entries)

    level = Level(str(obj.get("level", "segment")))
    multi_ref = MultiRefStrategy(str(obj.get("multi_ref", "mean")))

    judg = obj.get("judgments", {"kind": "da"})
    kind = JudgmentKind(str(judg.get("kind", "da")))
    schema = JudgmentSchema(
        kind=kind,
        segment_col=judg.get("segment_col", "segment_id"),
        system_col=judg.get("system_col", "system_id"),
        score_col=judg.get("score_col", "score"),
        better_col=judg.get("better_col", "better_system"),
        worse_col=judg.get("worse_col", "worse_system"),
        criterion_col=judg.get("criterion_col"),
        criterion=judg.get("criterion", ""),
    )

    grid = SweepGrid(
        stopword_settings=tuple(stop_settings),
        idf_settings=tuple(idf_settings),
        subword_punct_settings=tuple(sub_settings),
        metrics=metrics,
        seed=int(obj.get("seed", 0)),
        level=level,
        multi_ref=multi_ref,
        bertscore_layer=int(obj.get("bertscore_layer", -1)),
        mover_exponents=tuple(float(p) for p in obj.get("mover_exponents", [1.0])),
    )
    return grid, schema
