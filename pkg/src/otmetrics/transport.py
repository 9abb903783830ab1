"""Optimal transport between discrete embedding clouds.

Three solvers:

* exact Earth Mover Distance via the transportation simplex, certified by a
  feasible dual potential,
* entropic Sinkhorn iteration, run in log domain unconditionally,
* fixed-support Wasserstein barycenters by iterative Bregman projections.

Problem sizes are token counts, so everything is plain float64 numpy with no
attempt at GPU or sparse paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateKernel, NumericalFailure, SupportMismatch, TransportDimensionMismatch

# anti-degeneracy perturbation added to supplies while pivoting; removed from
# the reported flows by re-solving the final basis with the true masses
_PERTURBATION = 1e-12

_MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteDistribution:
    """Non-negative masses over embedding support points, normalized to sum 1."""

    support: np.ndarray  # (n, d)
    mass: np.ndarray  # (n,)

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.float64)
        mass = np.asarray(self.mass, dtype=np.float64)
        if support.ndim != 2 or support.shape[0] == 0:
            raise ValueError("support must be a non-empty (n, d) array")
        if mass.shape != (support.shape[0],):
            raise ValueError("mass length must match support size")
        if not np.all(np.isfinite(support)) or not np.all(np.isfinite(mass)):
            raise ValueError("support and mass must be finite")
        if np.any(mass < 0):
            raise ValueError("masses must be non-negative")
        total = mass.sum()
        if total <= 0:
            raise ValueError("total mass must be positive")
        mass = mass / total
        support.setflags(write=False)
        mass.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    def __len__(self) -> int:
        return self.support.shape[0]


def cost_matrix(x: np.ndarray | Sequence, y: np.ndarray | Sequence) -> np.ndarray:
    """Pairwise Euclidean distances, entries[i][j] = ||x_i - y_j||."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[1] != y.shape[1]:
        raise TransportDimensionMismatch(f"point dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    out = np.empty((x.shape[0], y.shape[0]))
    for i in range(x.shape[0]):
        diff = y - x[i]
        out[i] = np.sqrt(np.einsum("jk,jk->j", diff, diff))
    return out


@dataclass(frozen=True)
class EmdResult:
    cost: float
    plan: np.ndarray
    source_potential: np.ndarray
    target_potential: np.ndarray
    duality_gap: float


@dataclass(frozen=True)
class SinkhornResult:
    cost: float
    plan: np.ndarray
    converged: bool
    iterations: int
    marginal_error: float


@dataclass(frozen=True)
class BarycenterResult:
    distribution: DiscreteDistribution
    converged: bool
    iterations: int


# ---------------------------------------------------------------------------
# exact solver


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    m, n = len(a), len(b)
    ra, rb = a.copy(), b.copy()
    basis: list[tuple[int, int]] = []
    flows: list[float] = []
    i = j = 0
    while True:
        x = min(ra[i], rb[j])
        basis.append((i, j))
        flows.append(x)
        ra[i] -= x
        rb[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if ra[i] <= rb[j] and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1
    return basis, flows


def _tree_adjacency(basis: set[tuple[int, int]], m: int, n: int):
    rows: list[list[int]] = [[] for _ in range(m)]
    cols: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    return rows, cols


def _duals_from_basis(C: np.ndarray, basis: set[tuple[int, int]], m: int, n: int):
    rows, cols = _tree_adjacency(basis, m, n)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in rows[idx]:
                if math.isnan(v[j]):
                    v[j] = C[idx, j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in cols[idx]:
                if math.isnan(u[i]):
                    u[i] = C[i, idx] - v[idx]
                    stack.append(("r", i))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise NumericalFailure("basis is not a spanning tree; duals undefined")
    return u, v


def _tree_path(basis: set[tuple[int, int]], m: int, n: int, start_row: int, end_col: int):
    """Cells along the unique tree path from row node start_row to col node end_col."""
    rows, cols = _tree_adjacency(basis, m, n)
    parent: dict[tuple[str, int], tuple[str, int, tuple[int, int]]] = {}
    seen = {("r", start_row)}
    stack = [("r", start_row)]
    while stack:
        kind, idx = stack.pop()
        if (kind, idx) == ("c", end_col):
            break
        if kind == "r":
            for j in rows[idx]:
                if ("c", j) not in seen:
                    seen.add(("c", j))
                    parent[("c", j)] = ("r", idx, (idx, j))
                    stack.append(("c", j))
        else:
            for i in cols[idx]:
                if ("r", i) not in seen:
                    seen.add(("r", i))
                    parent[("r", i)] = ("c", idx, (i, idx))
                    stack.append(("r", i))
    if ("c", end_col) not in parent and ("c", end_col) != ("r", start_row):
        raise NumericalFailure("entering cell endpoints are disconnected in the basis tree")
    path: list[tuple[int, int]] = []
    node = ("c", end_col)
    while node != ("r", start_row):
        kind, idx, cell = parent[node]
        path.append(cell)
        node = (kind, idx)
    return path


def _solve_tree_flows(
    basis: set[tuple[int, int]], a: np.ndarray, b: np.ndarray
) -> dict[tuple[int, int], float]:
    """Unique flows on a basis tree for the given marginals, by leaf peeling."""
    m, n = len(a), len(b)
    row_adj, col_adj = _tree_adjacency(basis, m, n)
    rows = [set(js) for js in row_adj]
    cols = [set(ks) for ks in col_adj]
    deg = {("r", i): len(rows[i]) for i in range(m)}
    deg.update({("c", j): len(cols[j]) for j in range(n)})
    ra, rb = a.copy(), b.copy()
    flows: dict[tuple[int, int], float] = {}
    leaves = [node for node, d in deg.items() if d == 1]
    while leaves:
        kind, idx = leaves.pop()
        if deg[(kind, idx)] != 1:
            continue
        if kind == "r":
            j = next(iter(rows[idx]))
            cell = (idx, j)
            f = ra[idx]
            ra[idx] -= f
            rb[j] -= f
            rows[idx].discard(j)
            cols[j].discard(idx)
            other = ("c", j)
        else:
            i = next(iter(cols[idx]))
            cell = (i, idx)
            f = rb[idx]
            rb[idx] -= f
            ra[i] -= f
            cols[idx].discard(i)
            rows[i].discard(idx)
            other = ("r", i)
        flows[cell] = f
        deg[(kind, idx)] = 0
        deg[other] -= 1
        if deg[other] == 1:
            leaves.append(other)
    if len(flows) != len(basis):
        raise NumericalFailure("basis tree peeling left unresolved cells")
    return flows


def _transportation_simplex(a: np.ndarray, b: np.ndarray, C: np.ndarray):
    """Exact solve with all-positive marginals. Returns (plan, u, v)."""
    m, n = len(a), len(b)
    a_pert = a + _PERTURBATION * np.arange(1, m + 1)
    b_pert = b.copy()
    b_pert[-1] += _PERTURBATION * (m * (m + 1) / 2)

    basis_list, flow_list = _northwest_corner(a_pert, b_pert)
    basis = set(basis_list)
    flow = {cell: f for cell, f in zip(basis_list, flow_list)}

    scale = 1.0 + float(np.max(C)) if C.size else 1.0
    enter_tol = 1e-11 * scale
    max_pivots = 2000 + 20 * m * n
    for _ in range(max_pivots):
        u, v = _duals_from_basis(C, basis, m, n)
        reduced = C - u[:, None] - v[None, :]
        for i, j in basis:
            reduced[i, j] = 0.0
        # Bland-style rule: first cell in row-major order below tolerance
        candidates = np.argwhere(reduced < -enter_tol)
        if candidates.size == 0:
            break
        ei, ej = map(int, candidates[0])
        path = _tree_path(basis, m, n, ei, ej)
        # entering cell gets +theta; walking from the entering column back to
        # the entering row, path cells alternate -, +, -, ...
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = next(c for c in minus if flow[c] == theta)
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[(ei, ej)] = theta
        basis.add((ei, ej))
        basis.discard(leaving)
        del flow[leaving]
    else:
        raise NumericalFailure("transportation simplex exceeded its pivot budget")

    # drop the perturbation: re-solve the optimal basis with the true masses
    exact_flows = _solve_tree_flows(basis, a, b)
    plan = np.zeros((m, n))
    for (i, j), f in exact_flows.items():
        if f < 0:
            if f < -_MARGINAL_TOL:
                raise NumericalFailure(f"basis flow {f} went negative beyond tolerance")
            f = 0.0
        plan[i, j] = f
    u, v = _duals_from_basis(C, basis, m, n)
    return plan, u, v


def emd_exact(a: DiscreteDistribution, b: DiscreteDistribution, C: np.ndarray) -> EmdResult:
    """Exact Earth Mover Distance with an optimality certificate.

    The orientation of the solve is canonicalized, so swapping the arguments
    (with the transposed cost) returns a bit-identical cost.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (len(a), len(b)):
        raise TransportDimensionMismatch(f"cost shape {C.shape} does not match ({len(a)}, {len(b)})")
    if not np.all(np.isfinite(C)) or np.any(C < 0):
        raise ValueError("cost entries must be finite and non-negative")

    am, bm = a.mass, b.mass
    key_fwd = (len(am), am.tobytes(), C.tobytes())
    Ct = np.ascontiguousarray(C.T)
    key_rev = (len(bm), bm.tobytes(), Ct.tobytes())
    if key_rev < key_fwd:
        inner = emd_exact(b, a, Ct)
        return EmdResult(
            cost=inner.cost,
            plan=inner.plan.T.copy(),
            source_potential=inner.target_potential,
            target_potential=inner.source_potential,
            duality_gap=inner.duality_gap,
        )

    src = np.flatnonzero(am > 0)
    tgt = np.flatnonzero(bm > 0)
    sub_plan, u_sub, v_sub = _transportation_simplex(am[src], bm[tgt], C[np.ix_(src, tgt)])

    plan = np.zeros_like(C)
    plan[np.ix_(src, tgt)] = sub_plan
    u = np.zeros(len(am))
    v = np.zeros(len(bm))
    u[src] = u_sub
    v[tgt] = v_sub
    # make dropped points dual-feasible without touching the objective
    for i in np.flatnonzero(am == 0):
        u[i] = np.min(C[i] - v)
    for j in np.flatnonzero(bm == 0):
        v[j] = np.min(C[:, j] - u)

    cost = float(np.sum(C * plan))
    # shift the potentials by any residual feasibility violation, then report
    # the certified gap
    violation = float(np.max(u[:, None] + v[None, :] - C, initial=0.0))
    if violation > 0:
        u = u - violation
    dual_value = float(u @ am + v @ bm)
    gap = cost - dual_value

    row_err = float(np.max(np.abs(plan.sum(axis=1) - am)))
    col_err = float(np.max(np.abs(plan.sum(axis=0) - bm)))
    if max(row_err, col_err) > _MARGINAL_TOL:
        raise NumericalFailure(f"plan marginals off by {max(row_err, col_err):.3e}")
    if gap > 1e-7 * (1.0 + abs(cost)):
        raise NumericalFailure(f"duality gap {gap:.3e} exceeds certification threshold")
    return EmdResult(cost=cost, plan=plan, source_potential=u, target_potential=v, duality_gap=gap)


# ---------------------------------------------------------------------------
# entropic solver


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.sum(np.exp(x - m), axis=axis)) + np.squeeze(m, axis=axis)


def sinkhorn(
    a: DiscreteDistribution,
    b: DiscreteDistribution,
    C: np.ndarray,
    epsilon: float,
    max_iter: int = 100000,
    tol: float = 1e-9,
) -> SinkhornResult:
    """Entropic transport cost by log-domain Sinkhorn iteration.

    Stops when the L1 marginal error drops below tol or after max_iter
    sweeps; the converged flag reports which stop fired. With tol = inf the
    start plan diag(a) K diag(b), normalized to total mass 1, is returned
    after zero iterations.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    C = np.asarray(C, dtype=np.float64)
    if C.shape != (len(a), len(b)):
        raise TransportDimensionMismatch(f"cost shape {C.shape} does not match ({len(a)}, {len(b)})")

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        la = np.log(a.mass)
        lb = np.log(b.mass)
        # row_kernel[i, j] = (lb_j - C_ij / eps), col_kernel likewise with la
        row_kernel = lb[None, :] - C / epsilon
        col_kernel = la[:, None] - C / epsilon
    f = np.zeros(len(a))
    g = np.zeros(len(b))

    def log_plan(f: np.ndarray, g: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return row_kernel + la[:, None] + (f[:, None] + g[None, :]) / epsilon

    def marginal_error(P: np.ndarray) -> float:
        return float(
            max(np.abs(P.sum(axis=1) - a.mass).sum(), np.abs(P.sum(axis=0) - b.mass).sum())
        )

    if math.isinf(tol):
        P = np.exp(log_plan(f, g))
        total = P.sum()
        if total <= 0 or not np.isfinite(total):
            raise DegenerateKernel("kernel underflowed for the requested epsilon")
        P = P / total
        return SinkhornResult(
            cost=float(np.sum(C * P)), plan=P, converged=True, iterations=0, marginal_error=marginal_error(P)
        )

    err = math.inf
    iterations = 0
    inv_eps = 1.0 / epsilon
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            f = -epsilon * _logsumexp(row_kernel + g[None, :] * inv_eps, axis=1)
            g = -epsilon * _logsumexp(col_kernel + f[:, None] * inv_eps, axis=0)
        iterations = it
        # convergence is checked periodically: the error only shrinks with
        # further sweeps, so overshooting the stop by a few iterations is safe
        if it <= 10 or it % 10 == 0 or it == max_iter:
            if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
                raise DegenerateKernel("potentials diverged; kernel underflow even in log domain")
            err = marginal_error(np.exp(log_plan(f, g)))
            if err < tol:
                break
    P = np.exp(log_plan(f, g))
    return SinkhornResult(
        cost=float(np.sum(C * P)),
        plan=P,
        converged=err < tol,
        iterations=iterations,
        marginal_error=err,
    )


# ---------------------------------------------------------------------------
# barycenters


def barycenter_fixed_support(
    dists: Sequence[DiscreteDistribution],
    weights: Sequence[float],
    epsilon: float = 0.01,
    max_iter: int = 1000,
    tol: float = 1e-6,
) -> BarycenterResult:
    """Entropic Wasserstein barycenter on a shared support.

    Iterative Bregman projections in log domain. Zero-weight inputs are
    dropped first; a single remaining input is returned unchanged, since the
    barycenter of one distribution is itself. Non-convergence is reported via
    the flag, never raised.
    """
    if not dists:
        raise ValueError("need at least one distribution")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(dists),):
        raise ValueError("weights length must match the number of distributions")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and sum to a positive value")
    w = w / w.sum()

    support = dists[0].support
    for d in dists[1:]:
        if d.support.shape != support.shape or not np.array_equal(d.support, support):
            raise SupportMismatch("all distributions must share one support")

    keep = np.flatnonzero(w > 0)
    if len(keep) == 1:
        return BarycenterResult(distribution=dists[keep[0]], converged=True, iterations=0)
    dists = [dists[i] for i in keep]
    w = w[keep]

    n = support.shape[0]
    M = cost_matrix(support, support) / epsilon
    with np.errstate(divide="ignore"):
        lmu = np.stack([np.log(d.mass) for d in dists])  # (k, n)
    lu = np.zeros((len(dists), n))

    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        # lKtu[k] = log(K^T u_k), lKv[k] = log(K v_k)
        lKtu = _logsumexp(-M[:, :, None].transpose(2, 0, 1) + lu[:, :, None], axis=1)
        lv = lmu - lKtu
        lKv = _logsumexp(-M[None, :, :] + lv[:, None, :], axis=2)
        lphi = lu + lKv
        lp = w @ lphi
        lu = lp[None, :] - lKv
        err = float(np.max(np.abs(np.exp(lphi) - np.exp(lp)[None, :])))
        if err < tol:
            converged = True
            break
    mass = np.exp(lp)
    return BarycenterResult(
        distribution=DiscreteDistribution(support=support, mass=mass),
        converged=converged,
        iterations=iterations,
    )
