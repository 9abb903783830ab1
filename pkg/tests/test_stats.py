import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from otmetrics import stats
from otmetrics.errors import DegenerateSeries, TooFewValues, ZeroMean, ZeroReference

from oracles import kendall_tau_b_pairs


SERIES = stats.PairedSeries((1.0, 2.0, 3.0, 4.0), (1.0, 3.0, 2.0, 4.0))


class TestCorrelations:
    def test_perfect_agreement(self):
        s = stats.PairedSeries((1.0, 2.0, 5.0), (1.0, 2.0, 5.0))
        assert stats.pearson(s) == pytest.approx(1.0)
        assert stats.spearman(s) == pytest.approx(1.0)
        assert stats.kendall_tau_b(s) == pytest.approx(1.0)

    def test_perfect_reversal(self):
        s = stats.PairedSeries((1.0, 2.0, 5.0), (-1.0, -2.0, -5.0))
        assert stats.pearson(s) == pytest.approx(-1.0)
        assert stats.spearman(s) == pytest.approx(-1.0)
        assert stats.kendall_tau_b(s) == pytest.approx(-1.0)

    def test_example_series(self):
        assert stats.kendall_tau_b(SERIES) == pytest.approx(2 / 3, abs=1e-12)
        assert stats.spearman(SERIES) == pytest.approx(0.8, abs=1e-12)

    def test_abs_pearson(self):
        s = stats.PairedSeries((1.0, 2.0, 5.0), (-1.0, -2.0, -5.0))
        assert stats.abs_pearson(s) == pytest.approx(1.0)
        t = stats.PairedSeries((1.0, 2.0, 5.0), (1.0, 2.0, 5.0))
        assert stats.abs_pearson(t) == pytest.approx(1.0)
        assert abs(stats.spearman(SERIES)) == pytest.approx(0.8, abs=1e-12)

    def test_degenerate_series(self):
        s = stats.PairedSeries((1.0, 1.0, 1.0), (1.0, 2.0, 3.0))
        with pytest.raises(DegenerateSeries):
            stats.pearson(s)
        with pytest.raises(DegenerateSeries):
            stats.kendall_tau_b(s)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            stats.PairedSeries((1.0, float("nan")), (1.0, 2.0))

    def test_tau_b_against_pair_counting_and_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = rng.integers(2, 15)
            x = rng.integers(0, 5, n).astype(float)
            y = rng.integers(0, 5, n).astype(float)
            try:
                mine = stats.kendall_tau_b(stats.PairedSeries(tuple(x), tuple(y)))
            except DegenerateSeries:
                continue
            assert mine == pytest.approx(kendall_tau_b_pairs(x, y), abs=1e-12)
            assert mine == pytest.approx(scipy.stats.kendalltau(x, y).statistic, abs=1e-12)
            assert -1.0 <= mine <= 1.0

    def test_tau_a_no_tie_correction(self):
        s = stats.PairedSeries((1.0, 1.0, 2.0), (1.0, 2.0, 3.0))
        assert stats.kendall_tau_a(s) == pytest.approx(2 / 3)


class TestWmtKendallLike:
    def test_all_concordant(self):
        r = stats.RelativeRankingSet(((2.0, 1.0), (5.0, 0.0)))
        assert stats.wmt_kendall_like(r) == 1.0

    def test_all_ties_are_discordant(self):
        r = stats.RelativeRankingSet(((1.0, 1.0),) * 4)
        assert stats.wmt_kendall_like(r) == -1.0

    def test_three_concordant_one_discordant(self):
        r = stats.RelativeRankingSet(((2.0, 1.0), (2.0, 1.0), (2.0, 1.0), (0.0, 1.0)))
        assert stats.wmt_kendall_like(r) == pytest.approx(0.5)

    def test_ties_excluded_rule(self):
        r = stats.RelativeRankingSet(((2.0, 1.0), (1.0, 1.0)))
        assert stats.wmt_kendall_like(r) == pytest.approx(0.0)
        assert stats.wmt_kendall_like(r, stats.TieRule.TIES_EXCLUDED) == pytest.approx(1.0)

    def test_all_ties_excluded_degenerate(self):
        r = stats.RelativeRankingSet(((1.0, 1.0),))
        with pytest.raises(DegenerateSeries):
            stats.wmt_kendall_like(r, stats.TieRule.TIES_EXCLUDED)


class TestSensitivityStatistics:
    def test_paper_rd_ad(self):
        assert stats.rd(0.3483, 0.3726) == pytest.approx(-6.51, abs=0.05)
        assert stats.ad(0.3483, 0.3726) == pytest.approx(-0.0243, abs=1e-12)

    def test_paper_cv_range(self):
        values = [0.6698, 0.6615, 0.6615, 0.6385]
        assert stats.cv(values) == pytest.approx(2.04, abs=0.01)
        assert stats.range_of(values) == pytest.approx(0.0313, abs=1e-12)

    def test_cv_uses_sample_std(self):
        # the population formula would give 1.77 here, not 2.04
        values = [0.6698, 0.6615, 0.6615, 0.6385]
        population = np.std(values) / np.mean(values) * 100
        assert population == pytest.approx(1.77, abs=0.01)
        assert stats.cv(values) > population

    def test_rd_self_is_zero(self):
        assert stats.rd(0.5, 0.5) == 0.0

    def test_cv_constant_list(self):
        assert stats.cv([2.0, 2.0, 2.0]) == 0.0
        with pytest.raises(ZeroMean):
            stats.cv([0.0, 0.0])

    def test_errors(self):
        with pytest.raises(ZeroReference):
            stats.rd(1.0, 0.0)
        with pytest.raises(TooFewValues):
            stats.cv([1.0])
        with pytest.raises(TooFewValues):
            stats.range_of([1.0])


increasing_transforms = (
    ("exp", math.exp),
    ("affine", lambda v: 3.5 * v + 2.0),
    ("cube", lambda v: v**3),
)


class TestInvariances:
    def test_rank_statistics_invariant_under_increasing_transforms(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            n = rng.integers(3, 12)
            x = tuple(rng.normal(size=n))
            y = tuple(rng.normal(size=n))
            s = stats.PairedSeries(x, y)
            base_sp = stats.spearman(s)
            base_kt = stats.kendall_tau_b(s)
            for _, f in increasing_transforms:
                t = stats.PairedSeries(tuple(f(v) for v in x), y)
                assert stats.spearman(t) == pytest.approx(base_sp, abs=1e-9)
                assert stats.kendall_tau_b(t) == pytest.approx(base_kt, abs=1e-12)

    def test_wmt_tau_invariant_under_joint_transforms(self):
        rng = np.random.default_rng(10)
        items = tuple((float(a), float(b)) for a, b in rng.normal(size=(20, 2)))
        base = stats.wmt_kendall_like(stats.RelativeRankingSet(items))
        for _, f in increasing_transforms:
            moved = tuple((f(a), f(b)) for a, b in items)
            assert stats.wmt_kendall_like(stats.RelativeRankingSet(moved)) == base

    @settings(max_examples=50, deadline=None)
    @given(
        xs=st.lists(st.floats(min_value=0.1, max_value=10), min_size=2, max_size=8),
        c=st.floats(min_value=0.1, max_value=50),
    )
    def test_cv_scale_invariant(self, xs, c):
        assert stats.cv([c * v for v in xs]) == pytest.approx(stats.cv(xs), rel=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(
        xs=st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=8),
        shift=st.floats(min_value=-50, max_value=50),
    )
    def test_range_translation_invariant(self, xs, shift):
        assert stats.range_of([v + shift for v in xs]) == pytest.approx(
            stats.range_of(xs), abs=1e-9
        )

    def test_cv_sign_flips_with_mean(self):
        xs = [1.0, 2.0, 3.0]
        assert stats.cv([-v for v in xs]) == pytest.approx(-stats.cv(xs), rel=1e-12)

    def test_pearson_bounds(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            n = rng.integers(2, 10)
            s = stats.PairedSeries(tuple(rng.normal(size=n)), tuple(rng.normal(size=n)))
            try:
                assert -1.0 <= stats.pearson(s) <= 1.0
            except DegenerateSeries:
                pass
