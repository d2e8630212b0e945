"""Sublevel-set persistence of grid fields via filtered cubical complexes.

Pixels are the 2-cells.  Every edge and vertex takes the minimum value of
the masked-in pixels containing it, so the subcomplex at threshold ``theta``
is exactly the union of closed pixels with value ``<= theta``.  On a torus
opposite sides of the grid are identified; a 1x1 torus is the minimal CW
torus with one vertex, two edges and one square.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .diagram import DiagramSet, betti_at  # noqa: F401  (re-exported)
from .field import GridField
from .reduction import reduce_boundary


class EmptyDomainError(ValueError):
    pass


@dataclass(frozen=True)
class GridCells:
    """Cell structure of an ``ny x nx`` grid (vertices, edges, pixels).

    ``edge_pixels`` holds the two pixel slots on either side of each edge,
    ``-1`` where the grid ends.  On a torus only one row or column wide,
    both slots can name the same pixel.
    """

    ny: int
    nx: int
    torus: bool
    n_vertices: int
    n_edges: int
    edge_vertices: np.ndarray   # (E, 2)
    edge_pixels: np.ndarray     # (E, 2)
    pixel_edges: np.ndarray     # (P, 4)
    pixel_vertices: np.ndarray  # (P, 4)


@lru_cache(maxsize=64)
def grid_cells(ny: int, nx: int, torus: bool) -> GridCells:
    r, c = np.divmod(np.arange(ny * nx), nx)
    if torus:
        vid = lambda rr, cc: (rr % ny) * nx + (cc % nx)  # noqa: E731
        n_v = ny * nx
        n_h = ny * nx
        hid = lambda rr, cc: (rr % ny) * nx + (cc % nx)  # noqa: E731
        vtid = lambda rr, cc: n_h + (rr % ny) * nx + (cc % nx)  # noqa: E731
        n_e = 2 * ny * nx
        # horizontal edge (row line rr, column cc) separates pixels (rr-1, cc) and (rr, cc)
        hr, hc = np.divmod(np.arange(n_h), nx)
        h_verts = np.stack([vid(hr, hc), vid(hr, hc + 1)], axis=1)
        h_pix = np.stack([((hr - 1) % ny) * nx + hc, hr * nx + hc], axis=1)
        vr, vc = np.divmod(np.arange(ny * nx), nx)
        v_verts = np.stack([vid(vr, vc), vid(vr + 1, vc)], axis=1)
        v_pix = np.stack([vr * nx + (vc - 1) % nx, vr * nx + vc], axis=1)
    else:
        W = nx + 1
        vid = lambda rr, cc: rr * W + cc  # noqa: E731
        n_v = (ny + 1) * W
        n_h = (ny + 1) * nx
        hid = lambda rr, cc: rr * nx + cc  # noqa: E731
        vtid = lambda rr, cc: n_h + rr * W + cc  # noqa: E731
        n_e = n_h + ny * W
        hr, hc = np.divmod(np.arange(n_h), nx)
        h_verts = np.stack([vid(hr, hc), vid(hr, hc + 1)], axis=1)
        h_pix = np.stack([
            np.where(hr >= 1, (hr - 1) * nx + hc, -1),
            np.where(hr < ny, hr * nx + hc, -1),
        ], axis=1)
        vr, vc = np.divmod(np.arange(ny * W), W)
        v_verts = np.stack([vid(vr, vc), vid(vr + 1, vc)], axis=1)
        v_pix = np.stack([
            np.where(vc >= 1, vr * nx + vc - 1, -1),
            np.where(vc < nx, vr * nx + vc, -1),
        ], axis=1)
    edge_vertices = np.concatenate([h_verts, v_verts])
    edge_pixels = np.concatenate([h_pix, v_pix])
    pixel_edges = np.stack([hid(r, c), hid(r + 1, c), vtid(r, c), vtid(r, c + 1)], axis=1)
    pixel_vertices = np.stack([vid(r, c), vid(r, c + 1), vid(r + 1, c), vid(r + 1, c + 1)], axis=1)
    for a in (edge_vertices, edge_pixels, pixel_edges, pixel_vertices):
        a.setflags(write=False)
    return GridCells(ny, nx, torus, n_v, n_e, edge_vertices, edge_pixels, pixel_edges, pixel_vertices)


def _cell_values(field: GridField, cells: GridCells):
    """Values of vertices, edges, pixels; ``inf`` marks absent cells."""
    pix = np.where(field.domain, field.values, np.inf).ravel()
    vert = np.full(cells.n_vertices, np.inf)
    np.minimum.at(vert, cells.pixel_vertices.ravel(), np.repeat(pix, 4))
    edge = np.full(cells.n_edges, np.inf)
    np.minimum.at(edge, cells.pixel_edges.ravel(), np.repeat(pix, 4))
    return vert, edge, pix


@dataclass(frozen=True)
class CubicalFiltration:
    """Cells of the grid complex in filtration order.

    Cells are sorted by ``(value, dim, index)`` where ``index`` is the cell's
    row-major position among cells of its dimension (horizontal edges come
    before vertical ones).  ``columns[j]`` is the mod-2 boundary of cell ``j``
    as a bitset over filtration positions.
    """

    dims: np.ndarray
    ids: np.ndarray
    values: np.ndarray
    columns: tuple
    cells: GridCells

    def __len__(self):
        return len(self.dims)

    def counts(self) -> tuple:
        """Number of vertices, edges and squares."""
        return tuple(int(np.sum(self.dims == k)) for k in range(3))

    def faces(self, j: int) -> list:
        col = self.columns[j]
        out = []
        while col:
            low = col.bit_length() - 1
            out.append(low)
            col ^= 1 << low
        return out


def build_filtration(field: GridField, tiebreak: str = "row-major") -> CubicalFiltration:
    """Filtered cubical complex of the sublevel sets of ``field``.

    ``tiebreak`` orders equal-valued cells of one dimension: ``"row-major"``
    (default) or ``"reverse"``.  Diagrams do not depend on it.
    """
    if not field.domain.any():
        raise EmptyDomainError("field domain is empty")
    cells = grid_cells(field.ny, field.nx, field.is_torus)
    vals = _cell_values(field, cells)
    dims, ids, values = [], [], []
    for k, v in enumerate(vals):
        present = np.flatnonzero(np.isfinite(v))
        dims.append(np.full(len(present), k))
        ids.append(present)
        values.append(v[present])
    dims = np.concatenate(dims)
    ids = np.concatenate(ids)
    values = np.concatenate(values)
    if tiebreak == "row-major":
        key = ids
    elif tiebreak == "reverse":
        key = -ids
    else:
        raise ValueError(f"unknown tiebreak {tiebreak!r}")
    order = np.lexsort((key, dims, values))
    dims, ids, values = dims[order], ids[order], values[order]

    pos = [np.full(n, -1, dtype=np.int64) for n in (cells.n_vertices, cells.n_edges, cells.ny * cells.nx)]
    for k in range(3):
        sel = dims == k
        pos[k][ids[sel]] = np.flatnonzero(sel)

    columns = []
    ev = cells.edge_vertices
    pe = cells.pixel_edges
    vpos, epos = pos[0], pos[1]
    for k, i in zip(dims.tolist(), ids.tolist()):
        col = 0
        if k == 1:
            for v in ev[i]:
                col ^= 1 << int(vpos[v])
        elif k == 2:
            for e in pe[i]:
                col ^= 1 << int(epos[e])
        columns.append(col)
    return CubicalFiltration(dims, ids, values, tuple(columns), cells)


def compute_persistence(filtration: CubicalFiltration, clearing: bool = True, label=None) -> DiagramSet:
    """Persistence diagrams (mod 2) of a cubical filtration.

    Zero-lifespan pairs are dropped; essential classes get death ``inf``.
    """
    pairs, essential = reduce_boundary(filtration.columns, filtration.dims, clearing=clearing)
    vals = filtration.values
    dims = filtration.dims
    pts = [(dims[i], vals[i], vals[j]) for i, j in pairs if vals[i] < vals[j]]
    pts += [(dims[i], vals[i], np.inf) for i in essential]
    return DiagramSet.from_points(pts, label=label)


def persistence(field: GridField, label=None) -> DiagramSet:
    return compute_persistence(build_filtration(field), label=label)


# ----------------------------------------------------------------------------
# Betti numbers of a single sublevel set, independent of any pairing
# ----------------------------------------------------------------------------

def _components(n: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    g = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n)).tocsr()
    return connected_components(g, directed=False)[1]


def gf2_rank(rows) -> int:
    """Rank over GF(2) of a 0/1 matrix (any iterable of rows)."""
    cols = []
    for row in rows:
        v = 0
        for i, x in enumerate(row):
            if int(x) & 1:
                v |= 1 << i
        cols.append(v)
    return _int_rank(cols)


def _sublevel_cells(field: GridField, theta: float):
    cells = grid_cells(field.ny, field.nx, field.is_torus)
    vert, edge, pix = _cell_values(field, cells)
    return cells, vert <= theta, edge <= theta, pix <= theta


def betti_direct(field: GridField, theta: float, method: str = "graph") -> tuple:
    """Betti numbers ``(b0, b1, b2)`` of the sublevel set at ``theta``.

    Computed from ranks of the mod-2 boundary maps of the thresholded
    complex.  ``method="graph"`` gets rank d1 from connected components of
    the 1-skeleton and the kernel of d2 from components of the pixel
    adjacency graph; ``method="elimination"`` row-reduces the dense matrices
    (small grids only).
    """
    cells, v_in, e_in, p_in = _sublevel_cells(field, theta)
    n_v, n_e, n_p = int(v_in.sum()), int(e_in.sum()), int(p_in.sum())
    if n_p == 0:
        return (0, 0, 0)
    if method == "elimination":
        r1, r2 = _ranks_by_elimination(cells, v_in, e_in, p_in)
    elif method == "graph":
        r1, r2 = _ranks_by_graph(cells, v_in, e_in, p_in)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (n_v - r1, n_e - r1 - r2, n_p - r2)


def _ranks_by_graph(cells: GridCells, v_in, e_in, p_in):
    ev = cells.edge_vertices[e_in]
    labels = _components(cells.n_vertices, ev[:, 0], ev[:, 1])
    b0 = len(np.unique(labels[v_in]))
    rank1 = int(v_in.sum()) - b0

    # x in ker d2  <=>  x_a = x_b across every interior edge, x_a = 0 on a free edge
    ep = cells.edge_pixels[e_in]
    slot_in = np.where(ep >= 0, p_in[np.maximum(ep, 0)], False)
    both = slot_in[:, 0] & slot_in[:, 1] & (ep[:, 0] != ep[:, 1])
    one = slot_in[:, 0] ^ slot_in[:, 1]
    n_p = cells.ny * cells.nx
    plabels = _components(n_p, ep[both, 0], ep[both, 1])
    forced = np.where(slot_in[one, 0], ep[one, 0], ep[one, 1])
    comps = np.unique(plabels[p_in])
    dead = np.unique(plabels[forced])
    dim_ker = len(np.setdiff1d(comps, dead))
    rank2 = int(p_in.sum()) - dim_ker
    return rank1, rank2


def _ranks_by_elimination(cells: GridCells, v_in, e_in, p_in):
    vpos = np.cumsum(v_in) - 1
    epos = np.cumsum(e_in) - 1
    d1 = []
    for e in np.flatnonzero(e_in):
        col = 0
        for v in cells.edge_vertices[e]:
            col ^= 1 << int(vpos[v])
        d1.append(col)
    d2 = []
    for p in np.flatnonzero(p_in):
        col = 0
        for e in cells.pixel_edges[p]:
            col ^= 1 << int(epos[e])
        d2.append(col)
    return _int_rank(d1), _int_rank(d2)


def _int_rank(cols) -> int:
    basis = {}
    for v in cols:
        while v:
            h = v.bit_length() - 1
            if h in basis:
                v ^= basis[h]
            else:
                basis[h] = v
                break
    return len(basis)
