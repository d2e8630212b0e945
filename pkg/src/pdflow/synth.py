"""Synthetic fields, field series and point clouds with known topology.

Every generator is a pure function of its :class:`GeneratorSpec`; the seed
feeds ``numpy.random.default_rng`` and nothing else is random.

Kinds
-----
``constant``        constant field (``value``)
``band``            ``cos(2 pi r / ny)`` on row ``r``: one horizontal band
``multiwell``       bounded strip of wells (``depths``) separated by saddles
``linked-bands``    two horizontal bands joined by ``n_links`` vertical links
``periodic-orbit``  series with a well and a peak whose heights trace a loop
``fast-slow``       the same loop traversed at two very different speeds
``circle``          ``n`` points on a circle of radius ``radius``
``blobs``           ``k_blobs`` clusters of ``per_blob`` points, ``sep`` apart
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cloud import DistanceMatrix
from .field import BOUNDED, BOUNDARIES, TORUS, FieldSeries, GridField

FIELD_KINDS = ("constant", "band", "multiwell", "linked-bands")
SERIES_KINDS = ("periodic-orbit", "fast-slow")
CLOUD_KINDS = ("circle", "blobs")
KINDS = FIELD_KINDS + SERIES_KINDS + CLOUD_KINDS

# levels used by the linked-bands field
BAND_LEVEL, LINK_LEVEL, BACKGROUND_LEVEL = 0.0, 1.0, 2.0


class GeneratorError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """What to generate.  ``grid`` is ``(nx, ny, boundary)``; ``None`` picks a
    default suited to the kind.  ``params`` holds kind-specific settings."""

    kind: str
    seed: int = 0
    grid: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.grid is not None:
            nx, ny, boundary = self.grid
            if int(nx) < 1 or int(ny) < 1 or boundary not in BOUNDARIES:
                raise GeneratorError(f"invalid grid {self.grid!r}")

    def param(self, name, default):
        return self.params.get(name, default)

    def grid_or(self, nx, ny, boundary):
        if self.grid is None:
            return nx, ny, boundary
        gx, gy, gb = self.grid
        return int(gx), int(gy), gb


# ----------------------------------------------------------------------------
# single fields
# ----------------------------------------------------------------------------

def _multiwell_layout(depths, saddles, top):
    k = len(depths)
    if k < 1:
        raise GeneratorError("multiwell needs at least one depth")
    if len(saddles) != k - 1:
        raise GeneratorError(f"{k} wells need {k - 1} saddles, got {len(saddles)}")
    mid = [top]
    for i, d in enumerate(depths):
        mid.append(d)
        if i < k - 1:
            mid.append(saddles[i])
    mid.append(top)
    for i, s in enumerate(saddles):
        if not (s > depths[i] and s > depths[i + 1] and s < top):
            raise GeneratorError(f"saddle {s} must lie above its wells and below the rim {top}")
    if not all(d < top for d in depths):
        raise GeneratorError("wells must lie below the rim")
    row = np.full(len(mid), float(top))
    return np.vstack([row, np.array(mid, dtype=float), row])


def _multiwell_params(spec):
    depths = [float(x) for x in spec.param("depths", (-2.0, -1.0))]
    saddles = spec.param("saddles", None)
    if saddles is None:
        saddles = [float(spec.param("saddle", 0.0))] * (len(depths) - 1)
    return depths, [float(s) for s in saddles], float(spec.param("top", 1.0))


def multiwell_pd0(depths, saddles) -> list:
    """PD_0 of a chain of wells by direct elder-rule simulation.

    Saddles are processed from lowest to highest; at each one the two groups
    it separates merge and the one with the higher minimum dies.
    """
    owner = list(range(len(depths)))
    mins = list(depths)
    points = []
    for s, i in sorted((s, i) for i, s in enumerate(saddles)):
        a, b = owner[i], owner[i + 1]
        young, old = (a, b) if (mins[a], a) > (mins[b], b) else (b, a)
        if mins[young] < s:
            points.append((mins[young], s))
        owner = [old if o == young else o for o in owner]
    points.append((min(depths), math.inf))
    return sorted(points)


def _linked_bands(spec):
    n = int(spec.param("n_links", 1))
    if n < 0:
        raise GeneratorError("n_links must be non-negative")
    nx, ny, boundary = spec.grid_or(max(8, 2 * n + 2), 8, TORUS)
    if boundary != TORUS:
        raise GeneratorError("linked-bands lives on the torus")
    if nx < 2 * n + 2 or ny < 7:
        raise GeneratorError(f"linked-bands with {n} links needs nx >= {2 * n + 2} and ny >= 7, "
                             f"got nx={nx}, ny={ny}")
    v = np.full((ny, nx), BACKGROUND_LEVEL)
    v[1, :] = v[4, :] = BAND_LEVEL
    for c in range(0, 2 * n, 2):
        v[2:4, c] = LINK_LEVEL
    return GridField(v, TORUS)


def linked_bands_betti(n_links: int) -> tuple:
    """Betti numbers of the linked-bands field at ``LINK_LEVEL``.

    Two circles joined by ``n`` arcs have Euler characteristic ``-n``; for
    ``n >= 1`` they form one component, so there are ``n + 1`` loops.
    """
    if n_links == 0:
        return (2, 2, 0)
    return (1, n_links + 1, 0)


def gen_field(spec: GeneratorSpec) -> GridField:
    """Generate one field of a field kind."""
    kind = spec.kind
    if kind == "constant":
        nx, ny, boundary = spec.grid_or(8, 8, TORUS)
        return GridField(np.full((ny, nx), float(spec.param("value", 0.0))), boundary)
    if kind == "band":
        nx, ny, boundary = spec.grid_or(32, 32, TORUS)
        r = np.arange(ny)[:, None]
        return GridField(np.repeat(np.cos(2 * np.pi * r / ny), nx, axis=1), boundary)
    if kind == "multiwell":
        return GridField(_multiwell_layout(*_multiwell_params(spec)), BOUNDED)
    if kind == "linked-bands":
        return _linked_bands(spec)
    raise GeneratorError(f"{kind!r} is not a field kind; expected one of {', '.join(FIELD_KINDS)}")


# ----------------------------------------------------------------------------
# series
# ----------------------------------------------------------------------------

def _bump(ny, nx, cy, cx, radius):
    """``cos^2`` bump of height 1 and compact support, centred on pixel (cy, cx)."""
    y = np.arange(ny)[:, None] - cy
    x = np.arange(nx)[None, :] - cx
    # shortest displacement on the torus
    y = (y + ny // 2) % ny - ny // 2
    x = (x + nx // 2) % nx - nx // 2
    r = np.hypot(x, y)
    return np.where(r < radius, np.cos(np.pi * r / (2 * radius)) ** 2, 0.0)


@dataclass(frozen=True)
class OrbitParams:
    period: int
    frames: int
    noise: float
    base: float
    swing: float
    dt: float
    fast_fraction: float
    fast_share: float
    fast_start: float


def orbit_params(spec: GeneratorSpec) -> OrbitParams:
    p = OrbitParams(
        period=int(spec.param("period", 100)),
        frames=int(spec.param("frames", 300)),
        noise=float(spec.param("noise", 0.0)),
        base=float(spec.param("base", 1.0)),
        swing=float(spec.param("swing", 0.5)),
        dt=float(spec.param("dt", 1.0)),
        fast_fraction=float(spec.param("fast_fraction", 0.15)),
        fast_share=float(spec.param("fast_share", 0.7)),
        fast_start=float(spec.param("fast_start", 0.4)),
    )
    if p.period < 2:
        raise GeneratorError("period must be at least 2 frames")
    if p.period >= p.frames:
        raise GeneratorError(f"period {p.period} must be shorter than the series ({p.frames} frames)")
    if not (p.base > p.swing >= 0):
        raise GeneratorError("need base > swing >= 0 so both features stay present")
    if p.noise < 0 or p.dt <= 0:
        raise GeneratorError("noise must be >= 0 and dt > 0")
    if not (0 < p.fast_fraction < 1 and 0 < p.fast_share < 1 and 0 <= p.fast_start < 1):
        raise GeneratorError("fast_fraction, fast_share must lie in (0, 1) and fast_start in [0, 1)")
    if p.fast_start + p.fast_fraction > 1:
        raise GeneratorError("the fast window must fit inside one period")
    return p


def orbit_phase(spec: GeneratorSpec) -> np.ndarray:
    """Phase in ``[0, 1)`` of every frame.

    Frame ``i`` sits at ``(i mod period) / period`` of the way around the loop,
    so frames one period apart are identical.  The fast-slow kind reparametrizes
    time so that a window of ``fast_fraction`` of each period covers
    ``fast_share`` of the phase.
    """
    p = orbit_params(spec)
    s = (np.arange(p.frames) % p.period) / p.period
    if spec.kind == "periodic-orbit":
        return s
    a, w, share = p.fast_start, p.fast_fraction, p.fast_share
    slow = (1 - share) / (1 - w)
    return np.interp(s, [0, a, a + w, 1], [0, a * slow, a * slow + share, 1])


def fast_steps(spec: GeneratorSpec) -> np.ndarray:
    """Indices ``i`` whose step to frame ``i + 1`` lies inside a fast window."""
    p = orbit_params(spec)
    s = (np.arange(p.frames) % p.period) / p.period
    lo, hi = p.fast_start, p.fast_start + p.fast_fraction
    inside = (s >= lo) & (s < hi)
    nxt = np.roll(s, -1)
    return np.flatnonzero(inside[:-1] & (nxt[:-1] > s[:-1]) & (nxt[:-1] <= hi))


def orbit_heights(spec: GeneratorSpec):
    """Well depth and peak height per frame: ``base + swing * (sin, cos)`` of the phase."""
    p = orbit_params(spec)
    ang = 2 * np.pi * orbit_phase(spec)
    return p.base + p.swing * np.sin(ang), p.base + p.swing * np.cos(ang)


def _bounded_noise(rng, clean: np.ndarray, amp: float) -> np.ndarray:
    if amp == 0:
        return clean
    noisy = clean + rng.uniform(-amp, amp, clean.shape)
    # keep the sup-norm bound exact in floating point
    over = np.abs(noisy - clean) > amp
    noisy[over] = clean[over]
    return noisy


def gen_series(spec: GeneratorSpec) -> FieldSeries:
    """Generate a series of a series kind.

    Each frame holds a well of depth ``d1`` and a peak of height ``d2`` on a
    zero plateau of the torus; without noise its diagrams are
    ``{(-d1, inf)}``, ``{(0, inf), (0, inf)}``, ``{(d2, inf)}``, so the
    bottleneck distance between frames is the larger change of ``d1`` and
    ``d2``.  Noise is uniform and bounded by ``noise`` in sup norm.
    """
    if spec.kind not in SERIES_KINDS:
        raise GeneratorError(f"{spec.kind!r} is not a series kind; expected one of {', '.join(SERIES_KINDS)}")
    p = orbit_params(spec)
    nx, ny, boundary = spec.grid_or(16, 16, TORUS)
    if boundary != TORUS:
        raise GeneratorError("orbit series live on the torus")
    if min(nx, ny) < 8:
        raise GeneratorError("orbit series need at least an 8 x 8 grid")
    radius = min(nx, ny) / 4
    well = _bump(ny, nx, ny // 4, nx // 4, radius)
    peak = _bump(ny, nx, (3 * ny) // 4, (3 * nx) // 4, radius)
    d1, d2 = orbit_heights(spec)
    rng = np.random.default_rng(spec.seed)
    frames = []
    for a, b in zip(d1, d2):
        clean = -a * well + b * peak
        frames.append(GridField(_bounded_noise(rng, clean, p.noise), TORUS))
    return FieldSeries(frames, p.dt)


def clean_orbit_frame(spec: GeneratorSpec, i: int) -> GridField:
    """Frame ``i`` of the series without noise."""
    params = dict(spec.params, noise=0.0)
    return gen_series(GeneratorSpec(spec.kind, spec.seed, spec.grid, params))[i]


# ----------------------------------------------------------------------------
# point clouds
# ----------------------------------------------------------------------------

def cloud_points(spec: GeneratorSpec):
    """Planar points and their ground-truth labels (blob index, or zeros)."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "circle":
        n = int(spec.param("n", 50))
        radius = float(spec.param("radius", 1.0))
        noise = float(spec.param("noise", 0.0))
        if n < 1 or radius <= 0 or noise < 0:
            raise GeneratorError("circle needs n >= 1, radius > 0 and noise >= 0")
        t = 2 * np.pi * np.arange(n) / n
        pts = radius * np.c_[np.cos(t), np.sin(t)]
        if noise:
            pts = pts + rng.uniform(-noise, noise, pts.shape)
        return pts, np.zeros(n, dtype=np.int64)
    if spec.kind == "blobs":
        k = int(spec.param("k_blobs", 3))
        sep = float(spec.param("sep", 10.0))
        m = int(spec.param("per_blob", 10))
        if k < 1 or m < 1 or sep <= 0:
            raise GeneratorError("blobs need k_blobs >= 1, per_blob >= 1 and sep > 0")
        # points fill discs of diameter 1 whose centres are 1 + sep apart, so
        # blobs are at least sep apart and each has diameter at most 1
        r = 0.5 * np.sqrt(rng.random(k * m))
        a = 2 * np.pi * rng.random(k * m)
        labels = np.repeat(np.arange(k), m)
        pts = np.c_[labels * (1 + sep) + r * np.cos(a), r * np.sin(a)]
        return pts, labels
    raise GeneratorError(f"{spec.kind!r} is not a cloud kind; expected one of {', '.join(CLOUD_KINDS)}")


def euclidean_matrix(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def gen_cloud(spec: GeneratorSpec) -> DistanceMatrix:
    """Euclidean distance matrix of a cloud kind."""
    pts, _ = cloud_points(spec)
    return DistanceMatrix(euclidean_matrix(pts), "euclidean")
