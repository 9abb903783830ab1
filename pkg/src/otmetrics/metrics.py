"""Reference-based similarity metrics over preprocessed token embeddings.

Three families: flow-based n-gram matching (exact Earth Mover Distance over
IDF-weighted n-gram clouds), greedy cosine alignment with precision, recall
and F1, and barycenter matching (per-layer token distributions collapsed into
one distribution per side, compared by exact or entropic transport).

Distances are mapped to similarities by score = 1 / (1 + distance). Any
strictly decreasing transform would induce the same rank correlations; the
raw distance is always reported so callers can apply their own.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyScores, EmptySide
from .idf import IdfScope, WeightSource
from .preprocess import ProcessedToken, match_key
from .transport import (
    DiscreteDistribution,
    barycenter_fixed_support,
    cost_matrix,
    emd_exact,
    sinkhorn,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MoverConfig:
    n: int = 1
    idf_scope: IdfScope = IdfScope.REF_AND_HYP_SEPARATE

    def __post_init__(self) -> None:
        if self.n not in (1, 2):
            raise ValueError(f"n-gram order must be 1 or 2, got {self.n}")

    @property
    def label(self) -> str:
        return f"mover-{self.n}"


class BertScoreVariant(enum.Enum):
    PRECISION = "p"
    RECALL = "r"
    F1 = "f1"


@dataclass(frozen=True)
class BertScoreConfig:
    variant: BertScoreVariant = BertScoreVariant.F1
    idf_scope: IdfScope = IdfScope.REF_ONLY

    @property
    def label(self) -> str:
        return f"bertscore-{self.variant.value}"


class BaryDistance(enum.Enum):
    WASSERSTEIN = "wasserstein"
    SINKHORN = "sinkhorn"


@dataclass(frozen=True)
class BaryConfig:
    distance: BaryDistance = BaryDistance.WASSERSTEIN
    epsilon: float = 0.01
    n_layers_used: int = 5
    mass_weighting: str = "uniform"  # "uniform" | "idf"
    idf_scope: IdfScope = IdfScope.REF_AND_HYP_SEPARATE
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.n_layers_used < 1:
            raise ValueError("n_layers_used must be >= 1")
        if self.mass_weighting not in ("uniform", "idf"):
            raise ValueError(f"unknown mass weighting {self.mass_weighting!r}")

    @property
    def label(self) -> str:
        return "bary-w" if self.distance is BaryDistance.WASSERSTEIN else "bary-s"


MetricConfig = MoverConfig | BertScoreConfig | BaryConfig


@dataclass(frozen=True)
class ScoredPair:
    segment_id: str
    system_id: str
    metric_label: str
    score: float
    raw_distance: float | None = None


class MultiRefStrategy(enum.Enum):
    MEAN = "mean"
    MAX = "max"


def _similarity(distance: float) -> float:
    return 1.0 / (1.0 + distance)


def _ngram_distribution(units: list[ProcessedToken], weights: WeightSource, n: int) -> DiscreteDistribution:
    w = np.array([weights.weight(match_key(u.unit)) for u in units])
    vecs = np.stack([u.vector for u in units])
    k = len(units) - n + 1
    support = np.stack([w[i : i + n] @ vecs[i : i + n] for i in range(k)])
    mass = np.array([w[i : i + n].sum() for i in range(k)])
    if mass.sum() <= 0:
        # every unit was weighted to zero; fall back to uniform gram masses
        mass = np.ones(k)
    return DiscreteDistribution(support=support, mass=mass)


def mover_score(
    ref: list[ProcessedToken],
    hyp: list[ProcessedToken],
    idf_ref: WeightSource,
    idf_hyp: WeightSource,
    n: int = 1,
    segment_id: str = "",
    system_id: str = "",
) -> ScoredPair:
    """Exact-transport n-gram matching score.

    Each side becomes a cloud of sliding-window n-gram embeddings (IDF-weighted
    sums of member vectors) with masses proportional to summed member weights.
    """
    if n not in (1, 2):
        raise ValueError(f"n-gram order must be 1 or 2, got {n}")
    if len(ref) < n:
        raise EmptySide("reference", n, len(ref))
    if len(hyp) < n:
        raise EmptySide("hypothesis", n, len(hyp))
    a = _ngram_distribution(ref, idf_ref, n)
    b = _ngram_distribution(hyp, idf_hyp, n)
    result = emd_exact(a, b, cost_matrix(a.support, b.support))
    return ScoredPair(
        segment_id=segment_id,
        system_id=system_id,
        metric_label=f"mover-{n}",
        score=_similarity(result.cost),
        raw_distance=result.cost,
    )


def _cosine_matrix(ref: list[ProcessedToken], hyp: list[ProcessedToken]) -> np.ndarray:
    rv = np.stack([t.vector for t in ref])
    hv = np.stack([t.vector for t in hyp])
    rn = np.linalg.norm(rv, axis=1)
    hn = np.linalg.norm(hv, axis=1)
    zero_r = rn == 0
    zero_h = hn == 0
    if np.any(zero_r) or np.any(zero_h):
        logger.warning(
            "zero vectors in cosine alignment (%d ref, %d hyp); their similarities count as 0",
            int(zero_r.sum()),
            int(zero_h.sum()),
        )
    rn[zero_r] = 1.0
    hn[zero_h] = 1.0
    sim = (rv / rn[:, None]) @ (hv / hn[:, None]).T
    sim[zero_r, :] = 0.0
    sim[:, zero_h] = 0.0
    return sim


def bert_score(
    ref: list[ProcessedToken], hyp: list[ProcessedToken], idf_ref: WeightSource
) -> tuple[float, float, float]:
    """Greedy cosine alignment: recall over the reference (IDF-weighted),
    precision over the hypothesis (uniform), and their harmonic mean."""
    if not ref:
        raise EmptySide("reference", 1, 0)
    if not hyp:
        raise EmptySide("hypothesis", 1, 0)
    sim = _cosine_matrix(ref, hyp)
    w = [idf_ref.weight(match_key(t.unit)) for t in ref]
    if sum(w) <= 0:
        w = [1.0] * len(ref)
    # sequential accumulation, so results match a plain double loop exactly
    ref_best = sim.max(axis=1)
    recall = sum(wi * float(si) for wi, si in zip(w, ref_best)) / sum(w)
    hyp_best = sim.max(axis=0)
    precision = sum(float(s) for s in hyp_best) / len(hyp)
    denom = precision + recall
    f1 = 0.0 if denom == 0 else 2.0 * precision * recall / denom
    return precision, recall, f1


def bert_score_pair(
    ref: list[ProcessedToken],
    hyp: list[ProcessedToken],
    idf_ref: WeightSource,
    variant: BertScoreVariant = BertScoreVariant.F1,
    segment_id: str = "",
    system_id: str = "",
) -> ScoredPair:
    p, r, f1 = bert_score(ref, hyp, idf_ref)
    score = {BertScoreVariant.PRECISION: p, BertScoreVariant.RECALL: r, BertScoreVariant.F1: f1}[variant]
    return ScoredPair(
        segment_id=segment_id,
        system_id=system_id,
        metric_label=f"bertscore-{variant.value}",
        score=score,
        raw_distance=None,
    )


@dataclass(frozen=True)
class BaryResult:
    pair: ScoredPair
    raw_wasserstein: float
    raw_sinkhorn: float
    sinkhorn_converged: bool


def _dedup_support(vectors: list[np.ndarray]) -> tuple[np.ndarray, list[int]]:
    """Exact-duplicate union of vectors: support array plus an index per input."""
    index: dict[bytes, int] = {}
    points: list[np.ndarray] = []
    where: list[int] = []
    for vec in vectors:
        key = vec.tobytes()
        if key not in index:
            index[key] = len(points)
            points.append(vec)
        where.append(index[key])
    return np.stack(points), where


def bary_side_distribution(
    layers: list[list[ProcessedToken]], cfg: BaryConfig, weights: WeightSource | None = None
) -> DiscreteDistribution:
    """One side's distribution: the uniform-weight barycenter of its per-layer
    token distributions on the union of that side's token vectors."""
    if not layers or not layers[0]:
        raise EmptySide("side", 1, 0)
    all_vecs = [t.vector for layer in layers for t in layer]
    support, where = _dedup_support(all_vecs)
    dists = []
    pos = 0
    for layer in layers:
        mass = np.zeros(support.shape[0])
        for tok in layer:
            m = 1.0 if weights is None else weights.weight(match_key(tok.unit))
            mass[where[pos]] += m
            pos += 1
        if mass.sum() <= 0:
            mass = np.zeros(support.shape[0])
            for idx in where[pos - len(layer) : pos]:
                mass[idx] += 1.0
        dists.append(DiscreteDistribution(support=support, mass=mass))
    result = barycenter_fixed_support(
        dists,
        np.full(len(dists), 1.0 / len(dists)),
        epsilon=cfg.epsilon,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
    )
    return result.distribution


def bary_score(
    ref_layers: list[list[ProcessedToken]],
    hyp_layers: list[list[ProcessedToken]],
    cfg: BaryConfig,
    idf_ref: WeightSource | None = None,
    idf_hyp: WeightSource | None = None,
    segment_id: str = "",
    system_id: str = "",
) -> BaryResult:
    """Barycenter matching over per-layer token distributions.

    Each side's layers become distributions on the union of that side's token
    vectors; their uniform-weight barycenter represents the side. Both the
    exact and the entropic distance between the two barycenters are reported.
    """
    if not ref_layers or not ref_layers[0]:
        raise EmptySide("reference", 1, 0)
    if not hyp_layers or not hyp_layers[0]:
        raise EmptySide("hypothesis", 1, 0)
    use_idf = cfg.mass_weighting == "idf"
    a = bary_side_distribution(ref_layers, cfg, idf_ref if use_idf else None)
    b = bary_side_distribution(hyp_layers, cfg, idf_hyp if use_idf else None)
    return bary_score_from_sides(a, b, cfg, segment_id, system_id)


def bary_score_from_sides(
    a: DiscreteDistribution,
    b: DiscreteDistribution,
    cfg: BaryConfig,
    segment_id: str = "",
    system_id: str = "",
) -> BaryResult:
    """Compare two precomputed side distributions (lets callers cache sides)."""
    C = cost_matrix(a.support, b.support)
    exact = emd_exact(a, b, C)
    entropic = sinkhorn(a, b, C, epsilon=cfg.epsilon, max_iter=cfg.max_iter * 100, tol=cfg.tol)
    raw = exact.cost if cfg.distance is BaryDistance.WASSERSTEIN else entropic.cost
    pair = ScoredPair(
        segment_id=segment_id,
        system_id=system_id,
        metric_label=cfg.label,
        score=_similarity(raw),
        raw_distance=raw,
    )
    return BaryResult(
        pair=pair,
        raw_wasserstein=exact.cost,
        raw_sinkhorn=entropic.cost,
        sinkhorn_converged=entropic.converged,
    )


def aggregate_multi_reference(scores: list[float], strategy: MultiRefStrategy) -> float:
    if not scores:
        raise EmptyScores("cannot aggregate zero scores")
    if strategy is MultiRefStrategy.MEAN:
        return float(np.mean(scores))
    return float(max(scores))
