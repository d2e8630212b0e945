"""Persistence diagrams for time series of 2-D scalar fields, distances
between diagrams, and analysis of the resulting point cloud in diagram space."""

__version__ = "0.1.0"

from .field import FieldSeries, GridField, load_field, load_series, quantize, save_field, save_series, sup_norm_diff
from .diagram import DiagramSet, PersistencePoint, betti_at, load_diagram, save_diagram
from .cubical import betti_direct, build_filtration, compute_persistence, persistence
from .metrics import Matching, bottleneck, brute_force_matching, diagonal_distance, distance, wasserstein
from .cloud import (
    DistanceMatrix, ScaleEstimate, SubsampleResult, cluster, distance_matrix, estimate_change_counts,
    rips_persistence, speed_profile, subsample,
)
from .synth import GeneratorSpec, gen_cloud, gen_field, gen_series

__all__ = [
    "FieldSeries", "GridField", "load_field", "load_series", "quantize", "save_field", "save_series",
    "sup_norm_diff", "DiagramSet", "PersistencePoint", "betti_at", "load_diagram", "save_diagram",
    "betti_direct", "build_filtration", "compute_persistence", "persistence", "Matching", "bottleneck",
    "brute_force_matching", "diagonal_distance", "distance", "wasserstein", "DistanceMatrix",
    "ScaleEstimate", "SubsampleResult", "cluster", "distance_matrix", "estimate_change_counts",
    "rips_persistence", "speed_profile", "subsample", "GeneratorSpec", "gen_cloud", "gen_field",
    "gen_series",
]
