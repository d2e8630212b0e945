"""Command-line interface: ``pdflow <subcommand> ...``.

Exit status is 0 on success, 2 for usage errors (bad flags, missing inputs,
unwritable output locations) and 1 when the computation itself fails; errors
are reported as one line on stderr.  Every input path is checked before any
work starts, all results are computed before anything is written, and files
are written through a temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .cloud import (
    cluster, distance_matrix, estimate_change_counts, load_distance_matrix,
    restrict, rips_persistence, save_distance_matrix, speed_profile, subsample,
)
from .cubical import persistence
from .diagram import DiagramSet, diagram_to_text, load_diagram
from .field import (
    SERIES_META, load_field, load_series, quantize, read_series_dt, save_field,
    save_series,
)
from .metrics import METRICS, EssentialMismatchWarning, matching
from .synth import FIELD_KINDS, KINDS, SERIES_KINDS, GeneratorSpec, gen_cloud, gen_field, gen_series

DIAGRAM_SUFFIX = ".pdiag"


class UsageError(Exception):
    pass


class ComputationError(Exception):
    pass


def fmt(x: float) -> str:
    """Twelve significant digits; ``inf`` in lower case."""
    x = float(x)
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.12g" % x


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ----------------------------------------------------------------------------
# path checks
# ----------------------------------------------------------------------------

def _input_file(p: str) -> Path:
    path = Path(p)
    if not path.is_file():
        raise UsageError(f"input file not found: {p}")
    return path


def _input_any(p: str) -> Path:
    path = Path(p)
    if not path.exists():
        raise UsageError(f"input not found: {p}")
    return path


def _output_file(p: str) -> Path:
    path = Path(p)
    if path.is_dir():
        raise UsageError(f"output path is a directory: {p}")
    if not path.parent.is_dir():
        raise UsageError(f"output directory does not exist: {path.parent}")
    return path


def _output_dir(p: str) -> Path:
    path = Path(p)
    if path.exists() and not path.is_dir():
        raise UsageError(f"output path exists and is not a directory: {p}")
    if not path.exists() and not path.parent.is_dir():
        raise UsageError(f"parent of output directory does not exist: {path.parent}")
    return path


def _diagram_dir(p: str) -> list[Path]:
    path = Path(p)
    if not path.is_dir():
        raise UsageError(f"diagram directory not found: {p}")
    files = sorted(path.glob("*" + DIAGRAM_SUFFIX))
    if not files:
        raise UsageError(f"no *{DIAGRAM_SUFFIX} files in {p}")
    return files


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_field_pd(a) -> int:
    src = _input_any(a.input)
    out = _output_dir(a.out)
    if src.is_dir():
        series = load_series(src)
        names = [f"frame_{i:06d}" for i in range(len(series))]
        frames = list(series)
        dt: Optional[float] = series.dt
    else:
        frames, names, dt = [load_field(src)], [src.stem], None
    texts = [diagram_to_text(persistence(f)) for f in frames]
    out.mkdir(exist_ok=True)
    for name, text in zip(names, texts):
        _write_text(out / (name + DIAGRAM_SUFFIX), text)
    if dt is not None:
        _write_text(out / SERIES_META, f"dt {dt!r}\n")
    return 0


def cmd_quantize(a) -> int:
    src = _input_file(a.input)
    out = _output_file(a.out)
    if a.levels < 2:
        raise UsageError("--levels must be at least 2")
    q = quantize(load_field(src), a.levels)
    save_field(q, out)
    return 0


def _matching_text(mts) -> str:
    lines = []
    for mt in mts:
        k = mt.dim
        rows = [(i, j) for i, j in mt.pairs]
        rows += [(i, None) for i in mt.diagonal_A]
        rows += [(None, j) for j in mt.diagonal_B]
        rows.sort(key=lambda r: (r[0] is None, r[0] if r[0] is not None else r[1],
                                 -1 if r[1] is None else r[1]))
        for i, j in rows:
            lines.append(f"{k} {'diag' if i is None else i} {'diag' if j is None else j}")
    return "".join(ln + "\n" for ln in lines)


def cmd_dist(a) -> int:
    pa, pb = _input_file(a.a), _input_file(a.b)
    out = _output_file(a.matching) if a.matching else None
    A, B = load_diagram(pa), load_diagram(pb)
    value, mts = matching(A, B, a.metric)
    if not np.isfinite(value):
        raise ComputationError("diagrams have different numbers of infinite points; distance is infinite")
    if out is not None:
        _write_text(out, _matching_text(mts))
    print(fmt(value))
    return 0


def _load_diagrams(files) -> list[DiagramSet]:
    return [load_diagram(f) for f in files]


def cmd_distmat(a) -> int:
    files = _diagram_dir(a.dir)
    out = _output_file(a.out)
    threads = a.threads if a.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    dm = distance_matrix(_load_diagrams(files), a.metric, threads=threads)
    save_distance_matrix(dm, out)
    return 0


def cmd_speed(a) -> int:
    files = _diagram_dir(a.dir)
    out = _output_file(a.out)
    dt = a.dt if a.dt is not None else read_series_dt(a.dir)
    if not dt > 0:
        raise UsageError("--dt must be positive")
    s = speed_profile(_load_diagrams(files), a.metric, dt)
    _write_text(out, "".join(repr(float(x)) + "\n" for x in s))
    return 0


def cmd_rips(a) -> int:
    src = _input_file(a.matrix)
    out = _output_file(a.out)
    dm = load_distance_matrix(src)
    ds = rips_persistence(dm, max_points=a.max_points)
    _write_text(out, diagram_to_text(ds))
    return 0


def cmd_cluster(a) -> int:
    src = _input_file(a.matrix)
    out = _output_file(a.out)
    if not a.theta > 0:
        raise UsageError("--theta must be positive")
    labels, seps = cluster(load_distance_matrix(src), a.theta)
    _write_text(out, "".join(f"{int(x)}\n" for x in labels))
    print(f"clusters {len(set(labels.tolist()))}")
    print("separations" + "".join(" " + fmt(s) for s in seps))
    return 0


def cmd_subsample(a) -> int:
    src = _input_file(a.matrix)
    out = _output_file(a.out)
    out_matrix = _output_file(a.out_matrix) if a.out_matrix else None
    if not a.delta > 0:
        raise UsageError("--delta must be positive")
    dm = load_distance_matrix(src).validate()
    res = subsample(dm, a.delta)
    _write_text(out, "".join(f"{i}\n" for i in res.kept))
    if out_matrix is not None:
        save_distance_matrix(restrict(dm, res.kept), out_matrix)
    print(f"kept {len(res.kept)} of {dm.n}")
    return 0


def cmd_scales(a) -> int:
    est = estimate_change_counts(a.dbig, a.dsmall, a.w1, a.w2)
    print(f"{est.n_big} {est.k_small} {'valid' if est.valid else 'invalid'}")
    return 0


def cmd_synth(a) -> int:
    params = {}
    for key in ("n_links", "period", "frames", "noise", "n", "radius", "k_blobs", "sep", "per_blob", "dt"):
        v = getattr(a, key)
        if v is not None:
            params[key] = v
    grid = None
    if a.nx is not None or a.ny is not None or a.boundary is not None:
        if a.nx is None or a.ny is None:
            raise UsageError("--nx and --ny must be given together")
        grid = (a.nx, a.ny, a.boundary or "torus")
    spec = GeneratorSpec(a.kind, a.seed, grid, params)
    if a.kind in FIELD_KINDS:
        out = _output_file(a.out)
        save_field(gen_field(spec), out)
    elif a.kind in SERIES_KINDS:
        out = _output_dir(a.out)
        save_series(gen_series(spec), out)
    else:
        out = _output_file(a.out)
        save_distance_matrix(gen_cloud(spec), out)
    return 0


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pdflow", description="Persistence diagrams of scalar-field time "
                                "series and analysis of their trajectories in diagram space.")
    p.add_argument("--version", action="version", version=f"pdflow {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", required=True)

    s = sub.add_parser("field-pd", help="persistence diagrams of a field file or series directory")
    s.add_argument("input")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_field_pd)

    s = sub.add_parser("quantize", help="rescale a field onto integer levels")
    s.add_argument("input")
    s.add_argument("--levels", type=int, default=256)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_quantize)

    s = sub.add_parser("dist", help="distance between two diagram files")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--metric", choices=METRICS, default="bottleneck")
    s.add_argument("--matching", help="write the optimal pairing to this file")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("distmat", help="pairwise distance matrix of a diagram directory")
    s.add_argument("dir")
    s.add_argument("--metric", choices=METRICS, default="w2")
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    s.set_defaults(func=cmd_distmat)

    s = sub.add_parser("speed", help="consecutive-frame distances divided by dt")
    s.add_argument("dir")
    s.add_argument("--metric", choices=METRICS, default="bottleneck")
    s.add_argument("--dt", type=float, default=None, help="default: series.meta in the directory, else 1")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_speed)

    s = sub.add_parser("rips", help="Vietoris-Rips diagrams (PD_0, PD_1) of a distance matrix")
    s.add_argument("matrix")
    s.add_argument("--out", required=True)
    s.add_argument("--max-points", type=int, default=2000)
    s.set_defaults(func=cmd_rips)

    s = sub.add_parser("cluster", help="connected components at scale theta")
    s.add_argument("matrix")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("subsample", help="greedy delta-sparse, delta-dense subsample")
    s.add_argument("matrix")
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--out", required=True, help="kept indices, one per line")
    s.add_argument("--out-matrix", help="also write the restricted distance matrix")
    s.set_defaults(func=cmd_subsample)

    s = sub.add_parser("scales", help="two-scale estimate of large and small change counts")
    for flag in ("--dbig", "--dsmall", "--w1", "--w2"):
        s.add_argument(flag, type=float, required=True)
    s.set_defaults(func=cmd_scales)

    s = sub.add_parser("synth", help="generate a synthetic field, series or point cloud")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="file for fields and clouds, directory for series")
    s.add_argument("--nx", type=int)
    s.add_argument("--ny", type=int)
    s.add_argument("--boundary", choices=("torus", "bounded"))
    s.add_argument("--n-links", type=int)
    s.add_argument("--period", type=int)
    s.add_argument("--frames", type=int)
    s.add_argument("--noise", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--n", type=int, help="points on the circle")
    s.add_argument("--radius", type=float)
    s.add_argument("--k-blobs", type=int)
    s.add_argument("--per-blob", type=int)
    s.add_argument("--sep", type=float)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        with warnings.catch_warnings():
            # surfaced as a one-line error instead
            warnings.simplefilter("ignore", EssentialMismatchWarning)
            return args.func(args)
    except UsageError as e:
        print(f"pdflow {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (ComputationError, ValueError, OSError, ArithmeticError) as e:
        msg = " ".join(str(e).split()) or type(e).__name__
        print(f"pdflow {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
