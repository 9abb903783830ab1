"""Inverse-document-frequency weight tables.

Four regimes: the task corpus itself (original), disabled (uniform weights),
a seeded random sample of segments, or an external corpus file. Weights use
plus-one smoothing, w(t) = ln((N + 1) / (df(t) + 1)), with ln(N + 1) for
unseen tokens, so they stay finite and non-negative and disabling IDF is
exactly equivalent to all-ones weights.

A document is one segment; document frequency counts distinct match keys.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, TypeVar

from .errors import EmptyCorpus, PoolTooSmall

T = TypeVar("T")


@dataclass(frozen=True)
class Original:
    pass


@dataclass(frozen=True)
class Disabled:
    pass


@dataclass(frozen=True)
class SampledCorpus:
    k: int
    seed: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("SampledCorpus.k must be >= 1")


@dataclass(frozen=True)
class ExternalCorpus:
    path: str


IdfMode = Original | Disabled | SampledCorpus | ExternalCorpus


class IdfScope(enum.Enum):
    REF_AND_HYP_SEPARATE = "ref-and-hyp-separate"
    REF_ONLY = "ref-only"
    SINGLE_CORPUS = "single-corpus"


@dataclass(frozen=True)
class IdfTable:
    n_docs: int
    df: Mapping[str, int]
    mode: IdfMode
    scope: IdfScope = IdfScope.SINGLE_CORPUS

    def __post_init__(self) -> None:
        if self.n_docs < 1:
            raise ValueError("n_docs must be positive")
        for key, count in self.df.items():
            if not (0 < count <= self.n_docs):
                raise ValueError(f"df[{key!r}] = {count} outside (0, {self.n_docs}]")

    def weight(self, key: str) -> float:
        if isinstance(self.mode, Disabled):
            return 1.0
        return math.log((self.n_docs + 1) / (self.df.get(key, 0) + 1))


@dataclass(frozen=True)
class ExplicitWeights:
    """Caller-supplied weights with a default, interchangeable with IdfTable."""

    weights: Mapping[str, float]
    default: float = 1.0

    def weight(self, key: str) -> float:
        return self.weights.get(key, self.default)


WeightSource = IdfTable | ExplicitWeights

DISABLED_TABLE = IdfTable(n_docs=1, df={}, mode=Disabled())


def build_idf(
    documents: Sequence[Sequence[str]],
    mode: IdfMode,
    scope: IdfScope = IdfScope.SINGLE_CORPUS,
) -> IdfTable:
    """Count document frequencies over token-key documents.

    Callers pass match keys, not raw text, so IDF lookups agree with whatever
    preprocess config produced the scored units.
    """
    if isinstance(mode, Disabled):
        return IdfTable(n_docs=1, df={}, mode=mode, scope=scope)
    if not documents:
        raise EmptyCorpus("cannot build IDF weights from zero documents")
    df: dict[str, int] = {}
    for doc in documents:
        for key in set(doc):
            df[key] = df.get(key, 0) + 1
    return IdfTable(n_docs=len(documents), df=df, mode=mode, scope=scope)


def sample_idf_corpus(pool: Sequence[T], k: int, seed: int) -> list[T]:
    """Uniform sample of k segments without replacement, deterministic per seed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(pool) < k:
        raise PoolTooSmall(f"pool has {len(pool)} segments, need {k}")
    return random.Random(seed).sample(list(pool), k)
