"""A time series of diagram sets viewed as a finite metric space.

Scale convention: the edge between points ``i`` and ``j`` enters the
Vietoris-Rips filtration at ``theta = d(i, j) / 2`` (balls of radius ``theta``
touch), so every scale reported here is a radius, half the raw distance.
"""

from __future__ import annotations

import heapq
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .diagram import DiagramSet
from .metrics import check_metric, distance, essential_mismatch
from .reduction import reduce_boundary

DEFAULT_MAX_POINTS = 2000


class CloudError(ValueError):
    pass


# ----------------------------------------------------------------------------
# distance matrices
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    d: np.ndarray
    metric_label: str = "unknown"

    def __post_init__(self):
        d = np.array(self.d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise CloudError(f"distance matrix must be square, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def validate(self, tol: float = 0.0) -> "DistanceMatrix":
        """Raise unless the matrix is finite, non-negative, symmetric, zero on the diagonal."""
        d = self.d
        if not np.all(np.isfinite(d)):
            raise CloudError("distance matrix has non-finite entries")
        if np.any(d < 0):
            i, j = np.argwhere(d < 0)[0]
            raise CloudError(f"negative distance at ({i}, {j})")
        if np.any(np.diag(d) != 0):
            i = int(np.flatnonzero(np.diag(d) != 0)[0])
            raise CloudError(f"non-zero self-distance at ({i}, {i})")
        asym = np.abs(d - d.T) > tol
        if np.any(asym):
            i, j = np.argwhere(asym)[0]
            raise CloudError(f"asymmetric distances at ({i}, {j}) and ({j}, {i})")
        return self

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.metric_label == other.metric_label and np.array_equal(self.d, other.d)

    __hash__ = None


def meta_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def matrix_to_csv(d: np.ndarray) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in d)


def save_distance_matrix(dm: DistanceMatrix, path) -> None:
    """CSV body with shortest round-trip decimals plus a ``metric <label>`` sidecar."""
    path = Path(path)
    _atomic_write(path, matrix_to_csv(dm.d))
    _atomic_write(meta_path_for(path), f"metric {dm.metric_label}\n")


def load_distance_matrix(path) -> DistanceMatrix:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError:
            raise CloudError(f"{path}: line {lineno}: cannot parse number") from None
    if any(len(r) != len(rows) for r in rows):
        raise CloudError(f"{path}: expected a square matrix, got {len(rows)} rows of lengths "
                         f"{sorted({len(r) for r in rows})}")
    label = "unknown"
    meta = meta_path_for(path)
    if meta.exists():
        tok = meta.read_text(encoding="utf-8").split()
        if len(tok) == 2 and tok[0] == "metric":
            label = tok[1]
    return DistanceMatrix(np.array(rows, dtype=float).reshape(len(rows), len(rows)), label)


def check_essential_counts(series: Sequence[DiagramSet]) -> None:
    """Raise naming the first pair of frames whose infinite-point counts differ."""
    if not series:
        return
    ref = series[0].essential_counts()
    for i, ds in enumerate(series):
        if ds.essential_counts() != ref:
            k = essential_mismatch(series[0], ds)
            raise CloudError(
                f"frames 0 and {i} have different numbers of infinite points in dimension {k} "
                f"({ref[k]} vs {ds.essential_counts()[k]})")


def _rows_task(args):
    series, metric, rows = args
    n = len(series)
    return [(i, [distance(series[i], series[j], metric) for j in range(i + 1, n)]) for i in rows]


def distance_matrix(series: Sequence[DiagramSet], metric: str = "w2", threads: int = 1) -> DistanceMatrix:
    """All pairwise diagram distances.

    With ``threads > 1`` rows are spread over worker processes; every entry is
    computed by the same deterministic routine, so the result is identical
    for any worker count.
    """
    check_metric(metric)
    series = list(series)
    check_essential_counts(series)
    n = len(series)
    d = np.zeros((n, n))
    # interleave rows so that workers get similar amounts of work
    threads = max(1, min(int(threads), n))
    chunks = [list(range(w, n, threads)) for w in range(threads)]
    if threads == 1:
        results = _rows_task((series, metric, chunks[0]))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = [r for part in pool.map(_rows_task, [(series, metric, c) for c in chunks]) for r in part]
    for i, row in results:
        d[i, i + 1:] = row
    d = np.triu(d) + np.triu(d, 1).T
    return DistanceMatrix(d, metric)


def speed_profile(series: Sequence[DiagramSet], metric: str = "bottleneck", dt: float = 1.0) -> np.ndarray:
    """``d(PD_i, PD_{i+1}) / dt`` for consecutive frames."""
    check_metric(metric)
    series = list(series)
    if len(series) < 2:
        raise CloudError("a speed profile needs at least two frames")
    if not dt > 0:
        raise CloudError(f"dt must be positive, got {dt}")
    check_essential_counts(series)
    return np.array([distance(series[i], series[i + 1], metric) for i in range(len(series) - 1)]) / dt


# ----------------------------------------------------------------------------
# union-find and connected components
# ----------------------------------------------------------------------------

class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def _edge_order(dm: DistanceMatrix):
    """Upper-triangle edges sorted by (value, i, j) and their values."""
    iu, ju = np.triu_indices(dm.n, 1)
    vals = dm.d[iu, ju] / 2
    order = np.lexsort((ju, iu, vals))
    return iu[order], ju[order], vals[order]


def enclosing_radius(dm: DistanceMatrix) -> float:
    """Smallest scale at which some point is joined to every other point."""
    if dm.n <= 1:
        return 0.0
    return float(np.min(np.max(dm.d, axis=1)) / 2)


# ----------------------------------------------------------------------------
# Vietoris-Rips persistence
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class RipsFiltration:
    """All simplices of dimension <= 2 with their scales, in filtration order."""

    simplices: tuple
    values: np.ndarray
    dims: np.ndarray

    def present_at(self, theta: float) -> list:
        return [s for s, v in zip(self.simplices, self.values) if v <= theta]


def rips_filtration(dm: DistanceMatrix) -> RipsFiltration:
    """Full 2-skeleton; intended for small inputs and as a reference."""
    dm.validate()
    n = dm.n
    d = dm.d
    simp = [((i,), 0.0) for i in range(n)]
    simp += [((i, j), d[i, j] / 2) for i, j in combinations(range(n), 2)]
    simp += [((i, j, k), max(d[i, j], d[i, k], d[j, k]) / 2) for i, j, k in combinations(range(n), 3)]
    simp.sort(key=lambda sv: (sv[1], len(sv[0]), sv[0]))
    return RipsFiltration(tuple(s for s, _ in simp), np.array([v for _, v in simp]),
                          np.array([len(s) - 1 for s, _ in simp]))


def rips_persistence_naive(dm: DistanceMatrix) -> DiagramSet:
    """PD_0 and PD_1 by plain reduction of the full 2-skeleton boundary matrix."""
    F = rips_filtration(dm)
    index = {s: i for i, s in enumerate(F.simplices)}
    columns = []
    for s in F.simplices:
        col = 0
        if len(s) > 1:
            for face in combinations(s, len(s) - 1):
                col ^= 1 << index[face]
        columns.append(col)
    pairs, essential = reduce_boundary(columns, F.dims, clearing=False)
    pts = [(F.dims[i], F.values[i], F.values[j]) for i, j in pairs
           if F.dims[i] <= 1 and F.values[i] < F.values[j]]
    pts += [(F.dims[i], F.values[i], math.inf) for i in essential if F.dims[i] <= 1]
    return DiagramSet.from_points(pts)


def _check_rips_input(dm: DistanceMatrix, max_dim: int, max_points: int):
    if max_dim != 1:
        raise CloudError("only max_dim = 1 is supported")
    if dm.n > max_points:
        raise CloudError(f"{dm.n} points exceed the limit of {max_points}; subsample first "
                         "or raise max_points")
    if dm.n == 0:
        raise CloudError("empty point cloud")
    dm.validate()


def _heap_pivot(heap: list):
    """Smallest key occurring an odd number of times; even runs are discarded."""
    while heap:
        x = heapq.heappop(heap)
        if heap and heap[0] == x:
            heapq.heappop(heap)
            continue
        heapq.heappush(heap, x)
        return x
    return None


def rips_persistence(dm: DistanceMatrix, max_dim: int = 1, max_points: int = DEFAULT_MAX_POINTS) -> DiagramSet:
    """PD_0 and PD_1 of the Vietoris-Rips filtration of a finite metric space.

    PD_0 comes from Kruskal's algorithm.  PD_1 comes from reducing edge
    coboundaries in decreasing filtration order, with three shortcuts: edges
    merging components carry no 1-cocycle and are skipped; an edge that is
    the longest edge of some triangle is paired at once with the earliest such
    triangle (a zero-length pair); and only simplices up to the enclosing
    radius are built, since beyond it the complex is a cone and every loop is
    already dead.
    """
    _check_rips_input(dm, max_dim, max_points)
    n = dm.n
    iu, ju, vals = _edge_order(dm)
    r_enc = enclosing_radius(dm)
    keep = vals <= r_enc
    iu, ju, vals = iu[keep], ju[keep], vals[keep]
    n_edges = len(vals)

    # PD_0 and the spanning-forest edges
    uf = UnionFind(n)
    tree = np.zeros(n_edges, dtype=bool)
    pd0 = []
    for e, (i, j) in enumerate(zip(iu.tolist(), ju.tolist())):
        if uf.union(i, j):
            tree[e] = True
            if vals[e] > 0:
                pd0.append((0.0, float(vals[e])))
    pd0.append((0.0, math.inf))

    # rank matrix; -1 marks edges beyond the enclosing radius
    R = np.full((n, n), -1, dtype=np.int64)
    R[iu, ju] = R[ju, iu] = np.arange(n_edges)
    big = n_edges + 1

    def coboundary(e: int) -> np.ndarray:
        i, j = int(iu[e]), int(ju[e])
        ri, rj = R[i], R[j]
        w = np.flatnonzero((ri >= 0) & (rj >= 0))
        a, b = ri[w], rj[w]
        top = np.maximum(np.maximum(a, b), e)
        opposite = np.where(top == e, w, np.where(top == a, j, i))
        return top * n + opposite

    # earliest triangle whose longest edge is e, if any
    Rm = np.where(R >= 0, R, big)
    apparent = np.full(n_edges, -1, dtype=np.int64)
    for start in range(0, n_edges, 512):
        sl = slice(start, min(start + 512, n_edges))
        e = np.arange(sl.start, sl.stop)
        ok = (Rm[iu[sl]] < e[:, None]) & (Rm[ju[sl]] < e[:, None])
        has = ok.any(axis=1)
        w = np.argmax(ok, axis=1)
        apparent[sl] = np.where(has, e * n + w, -1)

    # pivot triangle -> edges whose coboundaries sum to the reduced column
    owner: dict[int, tuple] = {}
    for e in np.flatnonzero((apparent >= 0) & ~tree).tolist():
        owner[int(apparent[e])] = (e,)

    pd1 = []
    for e in range(n_edges - 1, -1, -1):
        if tree[e] or apparent[e] >= 0:
            continue
        # the working column is a heap in which pairs of equal keys cancel
        heap = coboundary(e).tolist()
        heapq.heapify(heap)
        combo = {e}
        piv = _heap_pivot(heap)
        while piv is not None and piv in owner:
            other = owner[piv]
            combo.symmetric_difference_update(other)
            for f in other:
                for key in coboundary(f).tolist():
                    heapq.heappush(heap, key)
            piv = _heap_pivot(heap)
        if piv is None:
            pd1.append((float(vals[e]), math.inf))
            continue
        owner[piv] = tuple(combo)
        death = float(vals[piv // n])
        if vals[e] < death:
            pd1.append((float(vals[e]), death))
    return DiagramSet([pd0, pd1])


# ----------------------------------------------------------------------------
# clustering
# ----------------------------------------------------------------------------

def _first_appearance(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels, return_index=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[labels]


def cluster(dm: DistanceMatrix, theta: float):
    """Connected components of the graph ``d(i, j) <= 2 * theta``.

    Returns ``(labels, separations)``: labels numbered in order of first
    appearance, and the finite PD_0 death scales ``>= theta`` in decreasing
    order (each is half the distance between two groups that merge there).
    """
    dm.validate()
    if dm.n == 0:
        return np.zeros(0, dtype=np.int64), []
    adj = csr_matrix(dm.d <= 2 * theta)
    _, labels = connected_components(adj, directed=False)
    iu, ju, vals = _edge_order(dm)
    uf = UnionFind(dm.n)
    deaths = [float(v) for i, j, v in zip(iu.tolist(), ju.tolist(), vals) if uf.union(i, j)]
    seps = sorted((v for v in deaths if v >= theta and v > 0), reverse=True)
    return _first_appearance(labels), seps


# ----------------------------------------------------------------------------
# subsampling
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SubsampleResult:
    kept: tuple
    delta: float


def subsample(source: Union[DistanceMatrix, Callable[[int, int], float]], delta: float,
              n: Optional[int] = None) -> SubsampleResult:
    """Greedy delta-sparse, delta-dense subsample in index order.

    ``source`` is a :class:`DistanceMatrix` or a function ``dist(i, j)``
    together with the point count ``n``; a function is only called on the
    pairs the greedy pass actually inspects.
    """
    if not delta > 0:
        raise CloudError(f"delta must be positive, got {delta}")
    if isinstance(source, DistanceMatrix):
        d = source.d
        kept: list[int] = []
        for i in range(source.n):
            if not kept or np.all(d[i, kept] >= delta):
                kept.append(i)
        return SubsampleResult(tuple(kept), float(delta))
    if n is None:
        raise CloudError("a distance function needs the point count n")
    kept = []
    for i in range(n):
        if all(source(i, k) >= delta for k in kept):
            kept.append(i)
    return SubsampleResult(tuple(kept), float(delta))


def restrict(dm: DistanceMatrix, indices: Sequence[int]) -> DistanceMatrix:
    idx = np.asarray(indices, dtype=np.int64)
    return DistanceMatrix(dm.d[np.ix_(idx, idx)], dm.metric_label)


def one_sided_shift_matching(sub: DiagramSet, full: DiagramSet, delta: float) -> bool:
    """Whether the diagrams of a subsample and of the full cloud can be matched
    so that every matched subsample point sits above and to the right of its
    partner by less than ``delta`` in each coordinate, and every unmatched
    point in either diagram has lifespan less than ``delta``.
    """
    for k in range(len(sub.dgms)):
        A, B = sub[k], full[k]
        n, m = len(A), len(B)
        if n == 0 and m == 0:
            continue
        with np.errstate(invalid="ignore"):
            db = A[:, 0, None] - B[None, :, 0]
            dd = A[:, 1, None] - B[None, :, 1]
        both_inf = np.isinf(A[:, 1, None]) & np.isinf(B[None, :, 1])
        dd = np.where(both_inf, 0.0, dd)
        ok = (db >= 0) & (db < delta) & (dd >= 0) & (dd < delta)
        G = np.zeros((n + m, m + n), dtype=bool)
        G[:n, :m] = ok
        G[np.arange(n), m + np.arange(n)] = (A[:, 1] - A[:, 0]) < delta
        G[n + np.arange(m), np.arange(m)] = (B[:, 1] - B[:, 0]) < delta
        G[n:, m:] = ok.T
        rows = maximum_bipartite_matching(csr_matrix(G), perm_type="column")
        if np.any(rows < 0):
            return False
    return True


# ----------------------------------------------------------------------------
# two-scale change counts
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleEstimate:
    n_big: int
    k_small: int
    valid: bool


def estimate_change_counts(d_big: float, d_small: float, w1: float, w2: float) -> ScaleEstimate:
    """Counts of large and small feature changes under a two-scale model.

    ``n_big = round((w2 / d_big)**2)`` and then
    ``k_small = round((w1 - n_big * d_big) / d_small)``.  A negative count means
    the two-scale model does not fit and is reported with ``valid=False``.
    """
    if d_small == 0:
        raise CloudError("d_small must be non-zero")
    if not (d_big > d_small > 0):
        raise CloudError(f"expected d_big > d_small > 0, got {d_big} and {d_small}")
    n_big = int(round((w2 / d_big) ** 2))
    k_small = int(round((w1 - n_big * d_big) / d_small))
    return ScaleEstimate(n_big, k_small, n_big >= 0 and k_small >= 0)
