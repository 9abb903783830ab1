import math

import numpy as np
import pytest

from otmetrics.errors import DegenerateKernel, SupportMismatch, TransportDimensionMismatch
from otmetrics.transport import (
    DiscreteDistribution,
    barycenter_fixed_support,
    cost_matrix,
    emd_exact,
    sinkhorn,
)

from oracles import emd_by_enumeration, random_small_instance


def dist(points, masses=None):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if masses is None:
        masses = np.ones(points.shape[0])
    return DiscreteDistribution(points, np.asarray(masses, dtype=float))


def line(points, masses=None):
    return dist(np.asarray(points, dtype=float).reshape(-1, 1), masses)


class TestCostMatrix:
    def test_identical_points(self):
        np.testing.assert_array_equal(cost_matrix([[0.0]], [[0.0]]), [[0.0]])

    def test_one_dimensional(self):
        np.testing.assert_array_equal(cost_matrix([[0.0], [2.0]], [[1.0]]), [[1.0], [1.0]])

    def test_against_double_loop(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 4))
        y = rng.normal(size=(4, 4))
        got = cost_matrix(x, y)
        for i in range(3):
            for j in range(4):
                assert got[i, j] == pytest.approx(np.linalg.norm(x[i] - y[j]), abs=1e-12)
        np.testing.assert_array_equal(got.T, cost_matrix(y, x))

    def test_dimension_mismatch(self):
        with pytest.raises(TransportDimensionMismatch):
            cost_matrix([[0.0, 1.0]], [[0.0]])


class TestEmdExact:
    def test_identity_is_exactly_zero(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.normal(size=(rng.integers(1, 8), 3))
            d = dist(x, rng.random(len(x)) + 0.01)
            result = emd_exact(d, d, cost_matrix(x, x))
            assert result.cost == 0.0

    def test_enumerated_two_by_two(self):
        a = line([0.0, 1.0], [0.5, 0.5])
        b = line([0.0, 3.0], [0.5, 0.5])
        C = cost_matrix(a.support, b.support)
        oracle = emd_by_enumeration([1, 1], [1, 1], 2, C)
        result = emd_exact(a, b, C)
        assert oracle == pytest.approx(1.0)
        assert result.cost == pytest.approx(1.0, abs=1e-12)

    def test_unique_feasible_plan(self):
        a = line([0.0, 2.0], [0.5, 0.5])
        b = line([1.0], [1.0])
        result = emd_exact(a, b, cost_matrix(a.support, b.support))
        assert result.cost == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(result.plan, [[0.5], [0.5]], atol=1e-12)

    def test_oracle_equivalence_small_rational(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            a_units, b_units, q, x, y = random_small_instance(rng)
            a = dist(x, a_units / q)
            b = dist(y, b_units / q)
            C = cost_matrix(x, y)
            expected = emd_by_enumeration(a_units, b_units, q, C)
            result = emd_exact(a, b, C)
            assert abs(result.cost - expected) <= 1e-9
            assert result.duality_gap <= 1e-7 * (1 + result.cost)

    def test_symmetry_is_bitwise(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            m, n = rng.integers(1, 7), rng.integers(1, 7)
            x = rng.normal(size=(m, 2))
            y = rng.normal(size=(n, 2))
            a = dist(x, rng.random(m) + 0.01)
            b = dist(y, rng.random(n) + 0.01)
            C = cost_matrix(x, y)
            fwd = emd_exact(a, b, C)
            rev = emd_exact(b, a, np.ascontiguousarray(C.T))
            assert fwd.cost == rev.cost

    def test_triangle_inequality(self):
        rng = np.random.default_rng(13)
        for _ in range(40):
            size = rng.integers(2, 5)
            pts = [rng.normal(size=(size, 2)) for _ in range(3)]
            ds = [dist(p, rng.random(size) + 0.05) for p in pts]
            d_ab = emd_exact(ds[0], ds[1], cost_matrix(pts[0], pts[1])).cost
            d_bc = emd_exact(ds[1], ds[2], cost_matrix(pts[1], pts[2])).cost
            d_ac = emd_exact(ds[0], ds[2], cost_matrix(pts[0], pts[2])).cost
            assert d_ac <= d_ab + d_bc + 1e-7

    def test_marginals_within_tolerance(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            m, n = rng.integers(1, 9), rng.integers(1, 9)
            a = dist(rng.normal(size=(m, 3)), rng.random(m) + 0.01)
            b = dist(rng.normal(size=(n, 3)), rng.random(n) + 0.01)
            plan = emd_exact(a, b, cost_matrix(a.support, b.support)).plan
            assert np.abs(plan.sum(axis=1) - a.mass).max() <= 1e-9
            assert np.abs(plan.sum(axis=0) - b.mass).max() <= 1e-9
            assert np.all(plan >= 0)

    def test_zero_mass_points_reinserted_as_zero_rows(self):
        a = line([0.0, 5.0, 1.0], [0.5, 0.0, 0.5])
        b = line([0.0, 3.0], [0.5, 0.5])
        C = cost_matrix(a.support, b.support)
        result = emd_exact(a, b, C)
        assert result.cost == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_array_equal(result.plan[1], [0.0, 0.0])

    def test_cost_shape_checked(self):
        a = line([0.0], [1.0])
        b = line([0.0, 1.0], [0.5, 0.5])
        with pytest.raises(TransportDimensionMismatch):
            emd_exact(a, b, np.zeros((2, 2)))


class TestSinkhorn:
    def test_identical_distributions_small_bias(self):
        rng = np.random.default_rng(21)
        x = rng.random((6, 2))  # unit square
        d = dist(x, rng.random(6) + 0.1)
        result = sinkhorn(d, d, cost_matrix(x, x), epsilon=0.1, max_iter=20000, tol=1e-9)
        assert 0.0 <= result.cost <= 0.05

    def test_two_by_two_near_exact(self):
        a = line([0.0, 1.0], [0.5, 0.5])
        b = line([0.0, 3.0], [0.5, 0.5])
        C = cost_matrix(a.support, b.support)
        result = sinkhorn(a, b, C, epsilon=0.01, max_iter=50000, tol=1e-8)
        assert abs(result.cost - 1.0) <= 0.02

    def test_epsilon_to_zero_matches_exact(self):
        rng = np.random.default_rng(22)
        for _ in range(8):
            m, n = rng.integers(2, 7), rng.integers(2, 7)
            x, y = rng.random((m, 2)), rng.random((n, 2))
            a = dist(x, rng.random(m) + 0.05)
            b = dist(y, rng.random(n) + 0.05)
            C = cost_matrix(x, y)
            exact = emd_exact(a, b, C).cost
            approx = sinkhorn(a, b, C, epsilon=1e-3, max_iter=300000, tol=1e-6).cost
            assert abs(approx - exact) <= 1e-2 * (1 + exact)

    def test_infinite_tol_returns_normalized_start(self):
        a = line([0.0, 1.0], [0.5, 0.5])
        b = line([0.0, 3.0], [0.5, 0.5])
        C = cost_matrix(a.support, b.support)
        result = sinkhorn(a, b, C, epsilon=0.5, tol=math.inf)
        assert result.converged
        assert result.iterations == 0
        assert result.plan.sum() == pytest.approx(1.0, abs=1e-12)
        K = np.exp(-C / 0.5)
        start = a.mass[:, None] * K * b.mass[None, :]
        np.testing.assert_allclose(result.plan, start / start.sum(), rtol=1e-12)

    def test_marginals_converge(self):
        rng = np.random.default_rng(23)
        x, y = rng.random((4, 2)), rng.random((5, 2))
        a = dist(x, rng.random(4) + 0.1)
        b = dist(y, rng.random(5) + 0.1)
        result = sinkhorn(a, b, cost_matrix(x, y), epsilon=0.05, max_iter=50000, tol=1e-9)
        assert result.converged
        assert np.abs(result.plan.sum(axis=1) - a.mass).sum() <= 1e-9

    def test_degenerate_kernel(self):
        a = line([0.0], [1.0])
        b = line([1.0], [1.0])
        C = cost_matrix(a.support, b.support)
        with pytest.raises(DegenerateKernel):
            sinkhorn(a, b, C, epsilon=5e-324, max_iter=10, tol=1e-9)

    def test_zero_mass_entries_handled(self):
        a = line([0.0, 9.0, 1.0], [0.5, 0.0, 0.5])
        b = line([0.0, 3.0], [0.5, 0.5])
        C = cost_matrix(a.support, b.support)
        result = sinkhorn(a, b, C, epsilon=0.3, max_iter=50000, tol=1e-9)
        assert result.converged
        assert result.plan[1].sum() == pytest.approx(0.0, abs=1e-15)


def _entropic_cost(p, mu, K, C, iters=3000):
    """Scaling-form entropic OT value used as an independent objective."""
    u = np.ones_like(p)
    v = np.ones_like(mu)
    for _ in range(iters):
        u = p / (K @ v)
        v = mu / (K.T @ u)
    plan = u[:, None] * K * v[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(plan > 0, plan * np.log(plan), 0.0).sum()
    return float((C * plan).sum() + ent * K_EPS)


K_EPS = 0.3


class TestBarycenter:
    def test_identical_inputs_fixed_point(self):
        # support points at least 1 apart so the entropic blur exp(-d/eps)
        # stays far below the assertion tolerance
        rng = np.random.default_rng(31)
        x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [2.0, 3.0]])
        d = dist(x, rng.random(5) + 0.1)
        result = barycenter_fixed_support([d, d, d], [1 / 3, 1 / 3, 1 / 3],
                                          epsilon=0.01, max_iter=5000, tol=1e-8)
        assert result.converged
        np.testing.assert_allclose(result.distribution.mass, d.mass, atol=1e-6)

    def test_degenerate_weight_returns_first_input(self):
        sup = np.array([[0.0], [1.0]])
        d1 = DiscreteDistribution(sup, np.array([1.0, 0.0]))
        d2 = DiscreteDistribution(sup, np.array([0.0, 1.0]))
        result = barycenter_fixed_support([d1, d2], [1.0, 0.0])
        assert result.converged
        assert np.array_equal(result.distribution.mass, d1.mass)

    def test_single_input_returned_unchanged(self):
        sup = np.array([[0.0], [2.0]])
        d = DiscreteDistribution(sup, np.array([0.25, 0.75]))
        result = barycenter_fixed_support([d], [1.0])
        assert result.iterations == 0
        assert np.array_equal(result.distribution.mass, d.mass)

    def test_support_mismatch(self):
        d1 = line([0.0, 1.0], [0.5, 0.5])
        d2 = line([0.0, 2.0], [0.5, 0.5])
        with pytest.raises(SupportMismatch):
            barycenter_fixed_support([d1, d2], [0.5, 0.5])

    def test_mass_moves_to_uniform_as_epsilon_grows(self):
        sup = np.array([[0.0], [1.0]])
        d1 = DiscreteDistribution(sup, np.array([1.0, 0.0]))
        d2 = DiscreteDistribution(sup, np.array([0.0, 1.0]))
        first_masses = []
        for eps in (0.05, 0.1, 0.3, 1.0, 3.0):
            res = barycenter_fixed_support([d1, d2], [0.7, 0.3], epsilon=eps,
                                           max_iter=20000, tol=1e-12)
            assert res.converged
            first_masses.append(res.distribution.mass[0])
        # the exact barycenter with unequal weights is the better-weighted
        # point; entropy pulls toward the uniform split monotonically
        assert first_masses[0] > 0.99
        assert all(a > b for a, b in zip(first_masses, first_masses[1:]))
        assert first_masses[-1] < 0.55

    def test_symmetric_diracs_balance_exactly(self):
        sup = np.array([[0.0], [1.0]])
        d1 = DiscreteDistribution(sup, np.array([1.0, 0.0]))
        d2 = DiscreteDistribution(sup, np.array([0.0, 1.0]))
        res = barycenter_fixed_support([d1, d2], [0.5, 0.5], epsilon=0.2,
                                       max_iter=20000, tol=1e-12)
        np.testing.assert_allclose(res.distribution.mass, [0.5, 0.5], atol=1e-9)

    def test_against_grid_search_on_simplex(self):
        # the returned mass should minimize the entropic barycenter objective
        sup = np.array([[0.0], [1.0]])
        d1 = DiscreteDistribution(sup, np.array([1.0, 0.0]))
        d2 = DiscreteDistribution(sup, np.array([0.0, 1.0]))
        w = (0.7, 0.3)
        C = cost_matrix(sup, sup)
        K = np.exp(-C / K_EPS)

        def objective(t):
            p = np.array([t, 1 - t])
            return w[0] * _entropic_cost(p, d1.mass, K, C) + w[1] * _entropic_cost(
                p, d2.mass, K, C
            )

        grid = np.linspace(1e-6, 1 - 1e-6, 2001)
        best_t = grid[int(np.argmin([objective(t) for t in grid]))]
        res = barycenter_fixed_support([d1, d2], w, epsilon=K_EPS, max_iter=50000, tol=1e-13)
        assert res.converged
        assert abs(res.distribution.mass[0] - best_t) <= 2e-3
