"""Scalar fields on 2-D grids: representation, file I/O, quantization.

A :class:`GridField` holds one value per pixel (top-dimensional cell) on an
``ny x nx`` lattice whose boundary is either identified as a torus or left
open.  Bounded fields may carry a boolean mask selecting the pixels that
belong to the domain; masked-out pixels are absent from every complex built
from the field.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

TORUS = "torus"
BOUNDED = "bounded"
BOUNDARIES = (TORUS, BOUNDED)

MAGIC = "FIELD2D v1"
SERIES_META = "series.meta"


class FieldFormatError(ValueError):
    """Raised when a field file does not conform to the field format."""


class FieldShapeError(ValueError):
    """Raised when two fields that must share a grid do not."""


@dataclass(frozen=True, eq=False)
class GridField:
    """Piecewise-constant field on an ``ny x nx`` pixel grid.

    ``values`` has shape ``(ny, nx)``; row ``r`` is the ``r``-th text line of
    the file format, so the flat row-major order matches the file body.
    """

    values: np.ndarray
    boundary: str = TORUS
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"values must be a non-empty 2-D array, got shape {values.shape}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        mask = None
        if self.mask is not None:
            if self.boundary == TORUS:
                raise ValueError("a torus field cannot carry a mask")
            mask = np.array(self.mask, dtype=bool)
            if mask.shape != values.shape:
                raise ValueError(f"mask shape {mask.shape} does not match values shape {values.shape}")
            if not mask.any():
                raise ValueError("mask selects no pixels")
        inside = values if mask is None else values[mask]
        if not np.all(np.isfinite(inside)):
            bad = np.argwhere(~np.isfinite(values) & (True if mask is None else mask))[0]
            raise ValueError(f"non-finite value inside the domain at row {bad[0]}, column {bad[1]}")
        values.setflags(write=False)
        if mask is not None:
            mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def is_torus(self) -> bool:
        return self.boundary == TORUS

    @property
    def domain(self) -> np.ndarray:
        """Boolean ``(ny, nx)`` array of pixels that belong to the domain."""
        if self.mask is None:
            return np.ones(self.shape, dtype=bool)
        return self.mask

    @property
    def domain_values(self) -> np.ndarray:
        """Values at masked-in pixels, row-major."""
        return self.values[self.domain]

    def same_grid(self, other: "GridField") -> bool:
        if self.shape != other.shape or self.boundary != other.boundary:
            return False
        if (self.mask is None) != (other.mask is None):
            return False
        return self.mask is None or bool(np.array_equal(self.mask, other.mask))

    def with_values(self, values) -> "GridField":
        return GridField(values, self.boundary, self.mask)

    def __eq__(self, other):
        if not isinstance(other, GridField):
            return NotImplemented
        if not self.same_grid(other):
            return False
        dom = self.domain
        return bool(np.array_equal(self.values[dom], other.values[dom]))

    __hash__ = None


@dataclass(frozen=True)
class FieldSeries:
    """Frames sampled at a uniform interval ``dt``."""

    frames: tuple
    dt: float = 1.0

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValueError("a field series needs at least one frame")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        for i, fr in enumerate(frames[1:], start=1):
            if not fr.same_grid(frames[0]):
                raise FieldShapeError(f"frame {i} does not share the grid of frame 0")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]


# ----------------------------------------------------------------------------
# text / binary I/O
# ----------------------------------------------------------------------------

def _fmt(x: float) -> str:
    # shortest repr that round-trips float64
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _header(field: GridField) -> list[str]:
    return [
        MAGIC,
        f"nx {field.nx} ny {field.ny} boundary {field.boundary} mask {int(field.mask is not None)}",
    ]


def field_to_text(field: GridField) -> str:
    lines = _header(field)
    lines += [" ".join(_fmt(v) for v in row) for row in field.values]
    if field.mask is not None:
        lines += [" ".join("1" if m else "0" for m in row) for row in field.mask]
    return "\n".join(lines) + "\n"


def _parse_header(lines: list[str], source) -> tuple[int, int, str, bool]:
    if not lines or lines[0].strip() != MAGIC:
        raise FieldFormatError(f"{source}: line 1: expected {MAGIC!r}")
    if len(lines) < 2:
        raise FieldFormatError(f"{source}: line 2: missing grid header")
    tok = lines[1].split()
    if len(tok) != 8 or tok[0::2] != ["nx", "ny", "boundary", "mask"]:
        raise FieldFormatError(
            f"{source}: line 2: expected 'nx <int> ny <int> boundary <torus|bounded> mask <0|1>'"
        )
    try:
        nx, ny = int(tok[1]), int(tok[3])
    except ValueError:
        raise FieldFormatError(f"{source}: line 2: nx/ny must be integers") from None
    if nx < 1 or ny < 1:
        raise FieldFormatError(f"{source}: line 2: nx and ny must be positive")
    if tok[5] not in BOUNDARIES:
        raise FieldFormatError(f"{source}: line 2: unknown boundary {tok[5]!r}")
    if tok[7] not in ("0", "1"):
        raise FieldFormatError(f"{source}: line 2: mask flag must be 0 or 1")
    return nx, ny, tok[5], tok[7] == "1"


def _parse_rows(lines, first_lineno, nx, ny, source, parse):
    if len(lines) < ny:
        raise FieldFormatError(
            f"{source}: dimension mismatch: expected {ny} rows, found {len(lines)}"
        )
    out = []
    for r in range(ny):
        toks = lines[r].split()
        lineno = first_lineno + r
        if len(toks) != nx:
            raise FieldFormatError(
                f"{source}: line {lineno} (row {r}): dimension mismatch: expected {nx} values, found {len(toks)}"
            )
        row = []
        for c, t in enumerate(toks):
            try:
                row.append(parse(t))
            except ValueError:
                raise FieldFormatError(
                    f"{source}: line {lineno} (row {r}, column {c}): cannot parse {t!r}"
                ) from None
        out.append(row)
    return out


def _parse_mask_token(t: str) -> bool:
    if t not in ("0", "1"):
        raise ValueError(t)
    return t == "1"


def _build(values, boundary, mask, source) -> GridField:
    dom = np.ones(values.shape, dtype=bool) if mask is None else mask
    bad = np.argwhere(~np.isfinite(values) & dom)
    if len(bad):
        r, c = bad[0]
        raise FieldFormatError(f"{source}: non-finite value inside the domain at row {r}, column {c}")
    try:
        return GridField(values, boundary, mask)
    except ValueError as exc:
        raise FieldFormatError(f"{source}: {exc}") from None


def parse_field(text: str, source="<string>", binary_path: Optional[Path] = None) -> GridField:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    nx, ny, boundary, has_mask = _parse_header(lines, source)
    body = lines[2:]
    n_text = ny * (1 + int(has_mask))
    n_binary = ny * int(has_mask)
    if binary_path is not None and len(body) == n_binary:
        raw = np.fromfile(binary_path, dtype="<f8")
        if raw.size != nx * ny:
            raise FieldFormatError(
                f"{binary_path}: dimension mismatch: expected {nx * ny} values, found {raw.size}"
            )
        values = raw.reshape(ny, nx).astype(np.float64)
        mask_lines = body
        mask_lineno = 3
    else:
        if len(body) != n_text:
            raise FieldFormatError(
                f"{source}: dimension mismatch: expected {n_text} body lines for a {nx}x{ny} grid, found {len(body)}"
            )
        values = np.array(_parse_rows(body, 3, nx, ny, source, float), dtype=np.float64)
        mask_lines = body[ny:]
        mask_lineno = 3 + ny
    mask = None
    if has_mask:
        mask = np.array(_parse_rows(mask_lines, mask_lineno, nx, ny, source, _parse_mask_token), dtype=bool)
    return _build(values, boundary, mask, source)


def binary_path_for(path) -> Path:
    path = Path(path)
    return path.with_suffix(".f64")


def load_field(path) -> GridField:
    """Read a field file (text, or text header with a ``.f64`` sidecar)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    bin_path = binary_path_for(path)
    return parse_field(text, source=str(path), binary_path=bin_path if bin_path.exists() else None)


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_field(field: GridField, path, binary: bool = False) -> None:
    """Write ``field`` to ``path``.

    With ``binary=True`` the values go to ``<stem>.f64`` as little-endian
    float64 and ``path`` keeps only the header (and mask rows, if any).
    """
    path = Path(path)
    if not binary:
        _atomic_write_bytes(path, field_to_text(field).encode("utf-8"))
        bin_path = binary_path_for(path)
        if bin_path.exists():
            bin_path.unlink()
        return
    lines = _header(field)
    if field.mask is not None:
        lines += [" ".join("1" if m else "0" for m in row) for row in field.mask]
    _atomic_write_bytes(binary_path_for(path), np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def frame_name(i: int) -> str:
    return f"frame_{i:06d}.field"


def save_series(series: FieldSeries, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, fr in enumerate(series.frames):
        save_field(fr, directory / frame_name(i))
    _atomic_write_bytes(directory / SERIES_META, f"dt {_fmt(series.dt)}\n".encode("utf-8"))


def read_series_dt(directory) -> float:
    meta = Path(directory) / SERIES_META
    if not meta.exists():
        return 1.0
    for ln in meta.read_text(encoding="utf-8").splitlines():
        tok = ln.split()
        if len(tok) == 2 and tok[0] == "dt":
            try:
                return float(tok[1])
            except ValueError:
                break
    raise FieldFormatError(f"{meta}: expected a line 'dt <real>'")


def series_frame_paths(directory) -> list[Path]:
    return sorted(Path(directory).glob("frame_*.field"))


def load_series(directory) -> FieldSeries:
    paths = series_frame_paths(directory)
    if not paths:
        raise FieldFormatError(f"{directory}: no frame_*.field files")
    return FieldSeries(tuple(load_field(p) for p in paths), read_series_dt(directory))


# ----------------------------------------------------------------------------
# numerics
# ----------------------------------------------------------------------------

def quantize(field: GridField, levels: int = 256) -> GridField:
    """Affinely rescale masked-in values onto the integers ``0..levels-1``.

    Rounding is to nearest with halves rounded up.  Masked-out pixels become NaN.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    dom = field.domain
    inside = field.values[dom]
    lo, hi = float(inside.min()), float(inside.max())
    if hi == lo:
        raise ValueError("cannot quantize a constant field (max == min)")
    out = np.full(field.shape, np.nan)
    out[dom] = np.floor((levels - 1) * (inside - lo) / (hi - lo) + 0.5)
    # guard against an endpoint overshooting by rounding
    np.clip(out, 0, levels - 1, out=out, where=dom)
    return GridField(out, field.boundary, field.mask)


def sup_norm_diff(f: GridField, g: GridField) -> float:
    """max over masked-in pixels of ``|f - g|``."""
    if not f.same_grid(g):
        raise FieldShapeError("fields differ in shape, boundary, or mask")
    dom = f.domain
    return float(np.max(np.abs(f.values[dom] - g.values[dom])))


def apply_symmetry(field: GridField, shift: Sequence[int] = (0, 0), rotate: bool = False,
                   reflect: bool = False) -> GridField:
    """Compose grid symmetries of a torus field.

    ``reflect`` mirrors columns (``x -> -x``), ``rotate`` maps ``(x, y) -> (-x, -y)``,
    and ``shift=(dx, dy)`` rolls columns by ``dx`` and rows by ``dy``; they are
    applied in that order.  Each is a cellular homeomorphism of the torus.
    """
    v = field.values
    if reflect:
        v = v[:, ::-1]
    if rotate:
        v = v[::-1, ::-1]
    dx, dy = shift
    v = np.roll(v, (int(dy), int(dx)), axis=(0, 1))
    mask = field.mask
    if mask is not None:
        if reflect:
            mask = mask[:, ::-1]
        if rotate:
            mask = mask[::-1, ::-1]
        mask = np.roll(mask, (int(dy), int(dx)), axis=(0, 1))
    return GridField(v, field.boundary, mask)
