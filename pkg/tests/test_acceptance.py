"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
Tolerances are pinned here and nowhere else.
"""

import json
import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from otmetrics import cli, stats
from otmetrics import metrics as mx
from otmetrics.idf import DISABLED_TABLE, Disabled, ExplicitWeights
from otmetrics.preprocess import ProcessedToken
from otmetrics.transport import (
    DiscreteDistribution,
    barycenter_fixed_support,
    cost_matrix,
    emd_exact,
    sinkhorn,
)

from oracles import emd_by_enumeration, greedy_precision, greedy_recall, random_small_instance

BUNDLE = Path(__file__).resolve().parents[1] / "data" / "synthetic"


def report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


def make_units(vectors, names=None):
    names = names or [f"t{i}" for i in range(len(vectors))]
    return [
        ProcessedToken(unit=n, vector=np.asarray(v, dtype=float), source_word_index=i)
        for i, (n, v) in enumerate(zip(names, vectors))
    ]


def test_ot_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(2024)
    for _ in range(200):
        a_units, b_units, q, x, y = random_small_instance(rng, max_points=4, max_q=6)
        a = DiscreteDistribution(x, a_units / q)
        b = DiscreteDistribution(y, b_units / q)
        C = cost_matrix(x, y)
        expected = emd_by_enumeration(a_units, b_units, q, C)
        result = emd_exact(a, b, C)
        assert abs(result.cost - expected) <= 1e-9
        assert result.duality_gap <= 1e-7 * (1.0 + result.cost)
    elapsed = time.time() - start
    assert elapsed < 10.0, f"oracle sweep took {elapsed:.1f}s"
    report(f"ot-oracle-equivalence (200 instances, {elapsed:.1f}s)")


def test_sinkhorn_convergence_to_exact():
    start = time.time()
    rng = np.random.default_rng(7)
    for _ in range(20):
        m, n = rng.integers(3, 8), rng.integers(3, 8)
        x, y = rng.random((m, 2)), rng.random((n, 2))
        a = DiscreteDistribution(x, rng.random(m) + 0.05)
        b = DiscreteDistribution(y, rng.random(n) + 0.05)
        C = cost_matrix(x, y)
        exact = emd_exact(a, b, C).cost
        approx = sinkhorn(a, b, C, epsilon=1e-3, max_iter=300000, tol=1e-6).cost
        assert abs(approx - exact) <= 1e-2 * (1.0 + exact)
    elapsed = time.time() - start
    assert elapsed < 30.0, f"sinkhorn suite took {elapsed:.1f}s"
    report(f"sinkhorn-convergence (20 instances, {elapsed:.1f}s)")


def test_metric_axioms():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = rng.normal(size=(rng.integers(1, 6), 3))
        d = DiscreteDistribution(x, rng.random(len(x)) + 0.01)
        assert emd_exact(d, d, cost_matrix(x, x)).cost == 0.0
    for _ in range(50):
        m, n = rng.integers(1, 6), rng.integers(1, 6)
        x, y = rng.normal(size=(m, 3)), rng.normal(size=(n, 3))
        a = DiscreteDistribution(x, rng.random(m) + 0.01)
        b = DiscreteDistribution(y, rng.random(n) + 0.01)
        C = cost_matrix(x, y)
        assert emd_exact(a, b, C).cost == emd_exact(b, a, np.ascontiguousarray(C.T)).cost
    for _ in range(100):
        size = int(rng.integers(2, 5))
        pts = [rng.normal(size=(size, 2)) for _ in range(3)]
        ds = [DiscreteDistribution(p, rng.random(size) + 0.05) for p in pts]
        d_ab = emd_exact(ds[0], ds[1], cost_matrix(pts[0], pts[1])).cost
        d_bc = emd_exact(ds[1], ds[2], cost_matrix(pts[1], pts[2])).cost
        d_ac = emd_exact(ds[0], ds[2], cost_matrix(pts[0], pts[2])).cost
        assert d_ac <= d_ab + d_bc + 1e-7
    report("metric-axioms (identity exact, symmetry exact, 100 triangles)")


def test_greedy_alignment_oracle():
    rng = np.random.default_rng(13)
    for _ in range(100):
        m, n = rng.integers(1, 6), rng.integers(1, 6)
        ref = make_units(rng.normal(size=(m, 3)))
        hyp = make_units(rng.normal(size=(n, 3)))
        w = rng.random(m) + 0.01
        table = ExplicitWeights({f"t{i}": float(w[i]) for i in range(m)})
        p, r, _ = mx.bert_score(ref, hyp, table)
        sim = mx._cosine_matrix(ref, hyp)
        assert r == greedy_recall(sim.tolist(), w.tolist())
        assert p == greedy_precision(sim.tolist())
    report("greedy-alignment-oracle (100 instances, exact)")


def test_paper_arithmetic_cv_range():
    correlations = [0.6698, 0.6615, 0.6615, 0.6385]
    cv = stats.cv(correlations)
    rng_ = stats.range_of(correlations)
    assert cv == pytest.approx(2.04, abs=0.01)
    assert rng_ == pytest.approx(0.0313, abs=1e-12)
    report(f"paper-arithmetic-cv-range (cv={cv:.4f}%, range={rng_:.4f})")


def test_paper_arithmetic_rd_ad():
    rd = stats.rd(0.3483, 0.3726)
    ad = stats.ad(0.3483, 0.3726)
    assert rd == pytest.approx(-6.51, abs=0.05)
    assert ad == pytest.approx(-0.0243, abs=1e-12)
    report(f"paper-arithmetic-rd-ad (rd={rd:.4f}%, ad={ad:.6f})")


def test_rank_statistic_invariance():
    rng = np.random.default_rng(17)
    transforms = (math.exp, lambda v: 2.5 * v + 7.0, lambda v: v**3)
    for _ in range(50):
        n = int(rng.integers(3, 15))
        x = tuple(rng.normal(size=n))
        y = tuple(rng.normal(size=n))
        s = stats.PairedSeries(x, y)
        base_sp, base_kt = stats.spearman(s), stats.kendall_tau_b(s)
        items = tuple((float(a), float(b)) for a, b in rng.normal(size=(n, 2)))
        base_wmt = stats.wmt_kendall_like(stats.RelativeRankingSet(items))
        for f in transforms:
            t = stats.PairedSeries(tuple(f(v) for v in x), y)
            assert stats.spearman(t) == base_sp
            assert stats.kendall_tau_b(t) == base_kt
            moved = stats.RelativeRankingSet(tuple((f(a), f(b)) for a, b in items))
            assert stats.wmt_kendall_like(moved) == base_wmt
    report("rank-statistic-invariance (50 series x 3 transforms, exact)")


def test_idf_coupling_bit_identical():
    rng = np.random.default_rng(19)
    ones = ExplicitWeights({}, default=1.0)
    vocab = [f"w{i}" for i in range(12)]
    for _ in range(20):
        m, n = rng.integers(2, 7), rng.integers(2, 7)
        ref = make_units(rng.normal(size=(m, 4)), list(rng.choice(vocab, m)))
        hyp = make_units(rng.normal(size=(n, 4)), list(rng.choice(vocab, n)))
        for ngram in (1, 2):
            if min(m, n) < ngram:
                continue
            a = mx.mover_score(ref, hyp, DISABLED_TABLE, DISABLED_TABLE, ngram)
            b = mx.mover_score(ref, hyp, ones, ones, ngram)
            assert a.score == b.score and a.raw_distance == b.raw_distance
        pa = mx.bert_score(ref, hyp, DISABLED_TABLE)
        pb = mx.bert_score(ref, hyp, ones)
        assert pa == pb
    report("idf-coupling (disabled == explicit ones, bit-identical, 20 segments)")


def test_stopword_inertness_bit_identical():
    from otmetrics.harness import EmbeddingStore, JudgmentDataset, JudgmentKind, score_dataset
    from otmetrics.idf import Original
    from otmetrics.metrics import MoverConfig
    from otmetrics.preprocess import (
        PowerMeans, PreprocessConfig, SubwordStrategy, config_with_stopwords,
    )

    store = EmbeddingStore.from_file(BUNDLE / "embeddings.jsonl")
    judged = JudgmentDataset(
        kind=JudgmentKind.DIRECT_ASSESSMENT,
        scores={key: 0.0 for key in sorted(store.hypotheses)},
    )
    base_list = {"the", "a", "of", "and", "is"}
    contractions = {"wouldn't", "haven't", "shouldn't", "it's", "that'll"}
    base_prep = PreprocessConfig(
        remove_punct=True, subword=SubwordStrategy.FIRST_PIECE, layer_agg=PowerMeans((1.0,))
    )
    with_base = config_with_stopwords(base_prep, base_list, "base")
    with_contractions = config_with_stopwords(base_prep, base_list | contractions, "plus")
    run_a = score_dataset(store, judged, MoverConfig(n=1), with_base, Original())
    run_b = score_dataset(store, judged, MoverConfig(n=1), with_contractions, Original())
    assert len(run_a.pairs) == len(run_b.pairs) > 0
    for pa, pb in zip(run_a.pairs, run_b.pairs):
        assert pa.score == pb.score and pa.raw_distance == pb.raw_distance
    report("stopword-inertness (contraction entries change nothing, bit-identical)")


def test_end_to_end_sweep_determinism(tmp_path):
    start = time.time()

    def sweep(out, threads):
        code = cli.main([
            "sweep", "--grid", str(BUNDLE / "grid.json"),
            "--embeddings", str(BUNDLE / "embeddings.jsonl"),
            "--judgments", str(BUNDLE / "judgments_da.csv"),
            "--out", str(out), "--threads", str(threads),
        ])
        assert code == 0

    sweep(tmp_path / "run1", 1)
    sweep(tmp_path / "run2", 1)
    sweep(tmp_path / "run8", 8)
    names = ("report.json", "cv_stop.csv", "cv_idf.csv", "cv_sub.csv", "rd.csv")
    for name in names:
        first = (tmp_path / "run1" / name).read_bytes()
        assert first == (tmp_path / "run2" / name).read_bytes()
        assert first == (tmp_path / "run8" / name).read_bytes()
    elapsed = time.time() - start
    assert elapsed < 120.0, f"end-to-end determinism took {elapsed:.1f}s"
    grid = json.loads((BUNDLE / "grid.json").read_text())
    shape = (len(grid["stopwords"]), len(grid["idf"]), len(grid["subword_punct"]))
    assert shape == (4, 5, 6)
    report(f"end-to-end-determinism (4x5x6 grid, 3 runs byte-identical, {elapsed:.1f}s)")


def test_barycenter_fixed_point():
    rng = np.random.default_rng(23)
    support = np.array([[0.0, 0.0], [1.5, 0.0], [0.0, 2.0], [2.5, 2.5]])
    d = DiscreteDistribution(support, rng.random(4) + 0.1)
    res = barycenter_fixed_support([d, d], [0.5, 0.5], epsilon=0.01, max_iter=5000, tol=1e-8)
    assert res.converged
    np.testing.assert_allclose(res.distribution.mass, d.mass, atol=1e-8)

    ref_vecs = rng.normal(size=(4, 3))
    hyp_vecs = rng.normal(size=(3, 3))
    bary = mx.bary_score(
        [make_units(ref_vecs)], [make_units(hyp_vecs)], mx.BaryConfig(n_layers_used=1)
    )
    a = DiscreteDistribution(ref_vecs, np.ones(4))
    b = DiscreteDistribution(hyp_vecs, np.ones(3))
    plain = emd_exact(a, b, cost_matrix(ref_vecs, hyp_vecs)).cost
    assert abs(bary.raw_wasserstein - plain) <= 1e-9
    report("barycenter-fixed-point (identity within tol, single-layer == plain emd)")
