"""Persistence diagrams and the ``PDIAG v1`` text format."""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

MAGIC = "PDIAG v1"
MAX_DIM = 2


class DiagramFormatError(ValueError):
    pass


class PersistencePoint(NamedTuple):
    dim: int
    birth: float
    death: float

    @property
    def lifespan(self) -> float:
        return self.death - self.birth


def _sorted(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64).reshape(-1, 2)
    if len(arr):
        arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
    arr.setflags(write=False)
    return arr


class DiagramSet:
    """Persistence diagrams ``PD_0, PD_1, PD_2`` of one field or point cloud.

    Each ``dgms[k]`` is an ``(m, 2)`` float array of ``(birth, death)`` rows
    sorted by birth then death; infinite deaths are ``inf``.
    """

    __slots__ = ("dgms", "label")

    def __init__(self, dgms: Iterable = (), label: Optional[str] = None):
        dgms = list(dgms)
        if len(dgms) > MAX_DIM + 1:
            raise ValueError(f"at most {MAX_DIM + 1} dimensions are supported")
        dgms += [np.empty((0, 2))] * (MAX_DIM + 1 - len(dgms))
        self.dgms = tuple(_sorted(d) for d in dgms)
        self.label = label

    @classmethod
    def from_points(cls, points: Iterable, label=None) -> "DiagramSet":
        by_dim = [[] for _ in range(MAX_DIM + 1)]
        for k, b, d in points:
            by_dim[int(k)].append((b, d))
        return cls(by_dim, label=label)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.dgms[k]

    def __len__(self):
        return sum(len(d) for d in self.dgms)

    def points(self):
        for k, dgm in enumerate(self.dgms):
            for b, d in dgm:
                yield PersistencePoint(k, float(b), float(d))

    def finite(self, k: int) -> np.ndarray:
        d = self.dgms[k]
        return d[np.isfinite(d[:, 1])]

    def infinite_births(self, k: int) -> np.ndarray:
        d = self.dgms[k]
        return d[~np.isfinite(d[:, 1]), 0]

    def essential_counts(self) -> tuple:
        return tuple(int(np.sum(~np.isfinite(d[:, 1]))) for d in self.dgms)

    def __eq__(self, other):
        if not isinstance(other, DiagramSet):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.dgms, other.dgms))

    __hash__ = None

    def __repr__(self):
        sizes = ", ".join(f"PD{k}:{len(d)}" for k, d in enumerate(self.dgms))
        return f"DiagramSet({sizes}{', label=' + repr(self.label) if self.label else ''})"


def betti_at(ds: DiagramSet, theta: float) -> tuple:
    """Number of points with ``birth <= theta < death`` in each dimension."""
    return tuple(int(np.sum((d[:, 0] <= theta) & (theta < d[:, 1]))) for d in ds.dgms)


def _fmt(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def diagram_to_text(ds: DiagramSet) -> str:
    lines = [MAGIC]
    for k, dgm in enumerate(ds.dgms):
        lines += [f"{k} {_fmt(b)} {_fmt(d)}" for b, d in dgm]
    return "\n".join(lines) + "\n"


def parse_diagram(text: str, source="<string>") -> DiagramSet:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise DiagramFormatError(f"{source}: line 1: expected {MAGIC!r}")
    pts = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        tok = ln.split()
        if len(tok) != 3:
            raise DiagramFormatError(f"{source}: line {lineno}: expected 'k birth death'")
        try:
            k, b, d = int(tok[0]), float(tok[1]), float(tok[2])
        except ValueError:
            raise DiagramFormatError(f"{source}: line {lineno}: cannot parse {ln.strip()!r}") from None
        if not 0 <= k <= MAX_DIM:
            raise DiagramFormatError(f"{source}: line {lineno}: dimension {k} out of range")
        if not math.isfinite(b) or math.isnan(d) or d < b:
            raise DiagramFormatError(f"{source}: line {lineno}: invalid point ({b}, {d})")
        pts.append((k, b, d))
    return DiagramSet.from_points(pts, label=str(source))


def load_diagram(path) -> DiagramSet:
    path = Path(path)
    ds = parse_diagram(path.read_text(encoding="utf-8"), source=str(path))
    ds.label = path.stem
    return ds


def save_diagram(ds: DiagramSet, path) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(diagram_to_text(ds), encoding="utf-8")
    os.replace(tmp, path)
