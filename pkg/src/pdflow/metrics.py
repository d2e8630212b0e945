"""Bottleneck and Wasserstein distances between persistence diagrams.

Points are compared in the L-infinity norm and any finite point may instead be
matched to its nearest point on the diagonal.  Points with infinite death are
matched only among themselves, by birth.  Per dimension:

* bottleneck: the smallest threshold ``t`` for which the augmented bipartite
  graph (A points + diagonal copies of B) x (B points + diagonal copies of A)
  restricted to edges of cost ``<= t`` has a perfect matching, found by binary
  search over the finite set of candidate costs;
* Wasserstein: a min-cost perfect matching on the same augmented graph with
  edge costs raised to the ``p``-th power.

Bottleneck takes the max over dimensions; degree-``p`` Wasserstein sums the
per-dimension optima and then takes the ``p``-th root.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .diagram import DiagramSet, MAX_DIM

METRICS = ("bottleneck", "w1", "w2")
BRUTE_FORCE_LIMIT = 12


class EssentialMismatchWarning(UserWarning):
    """Two diagrams disagree on the number of infinite-death points."""


class EssentialMismatchError(ValueError):
    pass


@dataclass
class Matching:
    """An optimal pairing in one dimension.

    Indices refer to rows of ``A[dim]`` and ``B[dim]`` (the sorted per-dimension
    arrays of a :class:`DiagramSet`).  ``cost`` is the bottleneck value of the
    dimension, or the sum of ``p``-th powers for Wasserstein.
    """

    dim: int
    pairs: list = field(default_factory=list)
    diagonal_A: list = field(default_factory=list)
    diagonal_B: list = field(default_factory=list)
    cost: float = 0.0


def diagonal_distance(point) -> float:
    """L-infinity distance from ``(birth, death)`` to the diagonal."""
    b, d = point[-2], point[-1]
    if math.isinf(d):
        raise ValueError("a point with infinite death has no diagonal match")
    return (d - b) / 2


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def _split(dgm: np.ndarray):
    """Finite rows with their original indices, and infinite births with theirs."""
    fin = np.isfinite(dgm[:, 1])
    return np.flatnonzero(fin), dgm[fin], np.flatnonzero(~fin), dgm[~fin, 0]


def _pair_costs(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(A[:, 0, None] - B[None, :, 0]), np.abs(A[:, 1, None] - B[None, :, 1]))


def _diag(A: np.ndarray) -> np.ndarray:
    return (A[:, 1] - A[:, 0]) / 2


def essential_mismatch(A: DiagramSet, B: DiagramSet) -> Optional[int]:
    """First dimension whose infinite-point counts differ, or ``None``."""
    for k, (a, b) in enumerate(zip(A.essential_counts(), B.essential_counts())):
        if a != b:
            return k
    return None


def _check_essential(A: DiagramSet, B: DiagramSet) -> bool:
    k = essential_mismatch(A, B)
    if k is None:
        return True
    warnings.warn(
        f"dimension {k}: {A.essential_counts()[k]} vs {B.essential_counts()[k]} infinite points; "
        "distance is infinite",
        EssentialMismatchWarning, stacklevel=3)
    return False


def _infinite_matching(a: np.ndarray, b: np.ndarray):
    """Sorted-order pairing of births; optimal for every convex cost on the line."""
    ia, ib = np.argsort(a, kind="stable"), np.argsort(b, kind="stable")
    return ia, ib, np.abs(a[ia] - b[ib])


# ----------------------------------------------------------------------------
# bottleneck
# ----------------------------------------------------------------------------

class _BottleneckProblem:
    """Threshold-graph feasibility for the finite points of one dimension."""

    def __init__(self, A: np.ndarray, B: np.ndarray):
        self.n, self.m = len(A), len(B)
        self.da, self.db = _diag(A), _diag(B)
        self.C = _pair_costs(A, B)

    def bounds(self):
        n, m, C, da, db = self.n, self.m, self.C, self.da, self.db
        if n == 0 or m == 0:
            v = float(max(da.max(initial=0.0), db.max(initial=0.0)))
            return v, v
        # every point needs some partner: the cheapest available bounds from below
        lb = max(np.minimum(C.min(axis=1), da).max(), np.minimum(C.min(axis=0), db).max())
        ub = max(da.max(), db.max())
        return float(lb), float(ub)

    def candidates(self, lo: float, hi: float) -> np.ndarray:
        v = np.concatenate((self.C.ravel(), self.da, self.db))
        return np.unique(v[(v >= lo) & (v <= hi)])

    def match(self, t: float):
        n, m = self.n, self.m
        near = self.C <= t
        G = np.zeros((n + m, m + n), dtype=bool)
        G[:n, :m] = near
        G[np.arange(n), m + np.arange(n)] = self.da <= t
        G[n + np.arange(m), np.arange(m)] = self.db <= t
        # diagonal copies only need to pair up where their owners are matched
        # to each other, so the transpose of the point block suffices
        G[n:, m:] = near.T
        r, c = np.nonzero(G)
        indptr = np.zeros(n + m + 1, dtype=np.int32)
        np.cumsum(np.bincount(r, minlength=n + m), out=indptr[1:])
        graph = csr_matrix((np.ones(len(c), dtype=np.int8), c.astype(np.int32), indptr),
                           shape=G.shape)
        rows = maximum_bipartite_matching(graph, perm_type="column")
        return rows if np.all(rows >= 0) else None

    def solve(self, floor: float = 0.0) -> float:
        """Exact bottleneck cost, or ``floor`` if that is already at least as large."""
        lb, ub = self.bounds()
        if ub <= floor:
            return floor
        if self.n == 0 or self.m == 0:
            return ub
        if floor >= lb:
            if self.match(floor) is not None:
                return floor
            cand = self.candidates(floor, ub)
            cand = cand[cand > floor]
        else:
            cand = self.candidates(lb, ub)
        # ub (everything to the diagonal) is always feasible
        lo, hi = 0, len(cand) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.match(cand[mid]) is not None:
                hi = mid
            else:
                lo = mid + 1
        return float(cand[lo])

    def decode(self, t: float, fin_a, fin_b, dim: int) -> Matching:
        n, m = self.n, self.m
        mt = Matching(dim)
        if n == 0 or m == 0:
            mt.diagonal_A = [int(i) for i in fin_a]
            mt.diagonal_B = [int(j) for j in fin_b]
            return mt
        rows = self.match(t)
        for i in range(n):
            j = rows[i]
            if j < m:
                mt.pairs.append((int(fin_a[i]), int(fin_b[j])))
            else:
                mt.diagonal_A.append(int(fin_a[i]))
        for j in range(m):
            if rows[n + j] == j:
                mt.diagonal_B.append(int(fin_b[j]))
        return mt


def _bottleneck_dim(a: np.ndarray, b: np.ndarray, dim: int):
    fin_a, Af, inf_a, Ai = _split(a)
    fin_b, Bf, inf_b, Bi = _split(b)
    ia, ib, diffs = _infinite_matching(Ai, Bi)
    prob = _BottleneckProblem(Af, Bf)
    value = max(float(diffs.max(initial=0.0)), prob.solve(0.0))
    mt = prob.decode(value, fin_a, fin_b, dim)
    mt.pairs += [(int(inf_a[i]), int(inf_b[j])) for i, j in zip(ia, ib)]
    mt.pairs.sort()
    mt.cost = value
    return value, mt


def bottleneck(A: DiagramSet, B: DiagramSet) -> float:
    """Bottleneck distance: max over dimensions of the optimal bottleneck cost.

    Returns ``inf`` (with an :class:`EssentialMismatchWarning`) when some
    dimension has different numbers of infinite-death points.
    """
    if not _check_essential(A, B):
        return math.inf
    value = 0.0
    probs = []
    for k in range(MAX_DIM + 1):
        _, Af, _, Ai = _split(A[k])
        _, Bf, _, Bi = _split(B[k])
        value = max(value, float(_infinite_matching(Ai, Bi)[2].max(initial=0.0)))
        prob = _BottleneckProblem(Af, Bf)
        lb, ub = prob.bounds()
        value = max(value, lb)
        probs.append((ub, k, prob))
    # the answer is at least every per-dimension lower bound; most dimensions
    # are then settled by a single feasibility test at that level
    for ub, _, prob in sorted(probs, key=lambda t: (-t[0], t[1])):
        value = prob.solve(value)
    return value


def bottleneck_matching(A: DiagramSet, B: DiagramSet):
    """``(distance, [Matching per dimension])`` for the bottleneck distance."""
    if not _check_essential(A, B):
        return math.inf, []
    out = [_bottleneck_dim(A[k], B[k], k) for k in range(MAX_DIM + 1)]
    return max(v for v, _ in out), [mt for _, mt in out]


# ----------------------------------------------------------------------------
# Wasserstein
# ----------------------------------------------------------------------------

def _wasserstein_dim(a: np.ndarray, b: np.ndarray, p: float, dim: int) -> Matching:
    fin_a, Af, inf_a, Ai = _split(a)
    fin_b, Bf, inf_b, Bi = _split(b)
    mt = Matching(dim)
    ia, ib, diffs = _infinite_matching(Ai, Bi)
    total = float(np.sum(diffs ** p))
    mt.pairs += [(int(inf_a[i]), int(inf_b[j])) for i, j in zip(ia, ib)]

    n, m = len(Af), len(Bf)
    da, db = _diag(Af) ** p, _diag(Bf) ** p
    if n == 0 or m == 0:
        total += float(da.sum() + db.sum())
        mt.diagonal_A = [int(i) for i in fin_a]
        mt.diagonal_B = [int(j) for j in fin_b]
    else:
        M = np.zeros((n + m, m + n))
        M[:n, :m] = _pair_costs(Af, Bf) ** p
        M[:n, m:] = np.inf
        M[np.arange(n), m + np.arange(n)] = da
        M[n:, :m] = np.inf
        M[n + np.arange(m), np.arange(m)] = db
        rows, cols = linear_sum_assignment(M)
        for r, c in zip(rows, cols):
            if r < n and c < m:
                mt.pairs.append((int(fin_a[r]), int(fin_b[c])))
            elif r < n:
                mt.diagonal_A.append(int(fin_a[r]))
            elif c < m:
                mt.diagonal_B.append(int(fin_b[c]))
        total += float(M[rows, cols].sum())
    mt.pairs.sort()
    mt.cost = total
    return mt


def _check_p(p):
    p = float(p)
    if not (p >= 1 and math.isfinite(p)):
        raise ValueError(f"Wasserstein degree must be a finite number >= 1, got {p}")
    return p


def wasserstein_matching(A: DiagramSet, B: DiagramSet, p: float = 2):
    """``(distance, [Matching per dimension])`` for the degree-``p`` Wasserstein distance."""
    p = _check_p(p)
    if not _check_essential(A, B):
        return math.inf, []
    mts = [_wasserstein_dim(A[k], B[k], p, k) for k in range(MAX_DIM + 1)]
    return sum(mt.cost for mt in mts) ** (1 / p), mts


def wasserstein(A: DiagramSet, B: DiagramSet, p: float = 2) -> float:
    """Degree-``p`` Wasserstein distance, summing all dimensions inside the root."""
    return wasserstein_matching(A, B, p)[0]


# ----------------------------------------------------------------------------
# dispatch
# ----------------------------------------------------------------------------

def check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    return metric


def distance(A: DiagramSet, B: DiagramSet, metric: str = "bottleneck") -> float:
    check_metric(metric)
    if metric == "bottleneck":
        return bottleneck(A, B)
    return wasserstein(A, B, 1 if metric == "w1" else 2)


def matching(A: DiagramSet, B: DiagramSet, metric: str = "bottleneck"):
    check_metric(metric)
    if metric == "bottleneck":
        return bottleneck_matching(A, B)
    return wasserstein_matching(A, B, 1 if metric == "w1" else 2)


# ----------------------------------------------------------------------------
# exhaustive oracle
# ----------------------------------------------------------------------------

def brute_force_matching(A_k: Sequence, B_k: Sequence, p: float = math.inf, dim: int = 0) -> Matching:
    """Optimal matching of two point multisets by exhaustive enumeration.

    Every partial injection of the finite points of ``A_k`` into those of
    ``B_k`` is tried, the rest going to the diagonal, together with every
    permutation pairing the infinite points.  ``cost`` is the sup of the edge
    costs for ``p = inf`` and the sum of their ``p``-th powers otherwise.
    Indices refer to positions in the given sequences.
    """
    A = np.asarray(A_k, dtype=float).reshape(-1, 2)
    B = np.asarray(B_k, dtype=float).reshape(-1, 2)
    fin_a, Af, inf_a, Ai = _split(A)
    fin_b, Bf, inf_b, Bi = _split(B)
    if len(Af) + len(Bf) > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_LIMIT} finite points in total")
    if len(Ai) != len(Bi):
        raise EssentialMismatchError(f"{len(Ai)} vs {len(Bi)} infinite points")
    if len(Ai) > 6:
        raise ValueError("brute force is limited to 6 infinite points per side")

    sup = math.isinf(p)
    if sup:
        def edge(c): return c
        def join(x, y): return max(x, y)
    else:
        def edge(c): return c ** p
        def join(x, y): return x + y

    best_inf, best_perm = math.inf, ()
    for perm in itertools.permutations(range(len(Bi))):
        c = 0.0
        for i, j in enumerate(perm):
            c = join(c, edge(abs(Ai[i] - Bi[j])))
        if c < best_inf:
            best_inf, best_perm = c, perm

    n, m = len(Af), len(Bf)
    C = [[edge(float(x)) for x in row] for row in _pair_costs(Af, Bf)]
    da = [edge(float(x)) for x in _diag(Af)]
    db = [edge(float(x)) for x in _diag(Bf)]
    best = [math.inf, None]
    assign = [-1] * n
    used = [False] * m

    def rec(i, acc):
        if acc > best[0]:
            return
        if i == n:
            total = acc
            for j in range(m):
                if not used[j]:
                    total = join(total, db[j])
            if total < best[0]:
                best[0], best[1] = total, list(assign)
            return
        assign[i] = -1
        rec(i + 1, join(acc, da[i]))
        for j in range(m):
            if not used[j]:
                used[j] = True
                assign[i] = j
                rec(i + 1, join(acc, C[i][j]))
                used[j] = False
        assign[i] = -1

    rec(0, 0.0)
    mt = Matching(dim)
    matched_b = set()
    for i, j in enumerate(best[1]):
        if j < 0:
            mt.diagonal_A.append(int(fin_a[i]))
        else:
            mt.pairs.append((int(fin_a[i]), int(fin_b[j])))
            matched_b.add(j)
    mt.diagonal_B = [int(fin_b[j]) for j in range(m) if j not in matched_b]
    mt.pairs += [(int(inf_a[i]), int(inf_b[j])) for i, j in enumerate(best_perm)]
    mt.pairs.sort()
    mt.cost = join(best[0], best_inf) if len(Ai) else best[0]
    return mt


def matching_cost(A_k, B_k, mt: Matching, p: float = math.inf) -> float:
    """Re-evaluate the cost of a matching from the point coordinates."""
    A = np.asarray(A_k, dtype=float).reshape(-1, 2)
    B = np.asarray(B_k, dtype=float).reshape(-1, 2)
    costs = []
    for i, j in mt.pairs:
        a, b = A[i], B[j]
        if math.isinf(a[1]) or math.isinf(b[1]):
            if not (math.isinf(a[1]) and math.isinf(b[1])):
                return math.inf
            costs.append(abs(a[0] - b[0]))
        else:
            costs.append(max(abs(a[0] - b[0]), abs(a[1] - b[1])))
    costs += [diagonal_distance(A[i]) for i in mt.diagonal_A]
    costs += [diagonal_distance(B[j]) for j in mt.diagonal_B]
    if math.isinf(p):
        return max(costs, default=0.0)
    return float(sum(c ** p for c in costs))
