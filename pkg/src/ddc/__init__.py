"""Distributed spatial clustering in two phases: parallel local DBSCAN with
concave-hull contour reduction, then hierarchical leader-based merging of
overlapping contours, plus simulated and real-concurrent timing backends."""

from .config import (
    CommMode,
    ConfigError,
    CostModel,
    DatasetSpec,
    NodeProfile,
    PartitionSpec,
    RunManifest,
    ScenarioConfig,
)
from .datasets import PointSet, SpecError, UnknownShape, generate, partition, resolve_scenario
from .geom import (
    Contour,
    DegenerateInput,
    GeometryError,
    NotOverlapping,
    Triangulation,
    concave_hull,
    delaunay,
    point_in_contour,
    points_in_contour,
    polygon_union,
    polygons_overlap,
)
from .local_cluster import NOISE, DbscanParams, LocalModel, build_local_model, dbscan
from .merge import (
    GlobalModel,
    MergeTree,
    build_merge_tree,
    merge_contour_sets,
    run_phase2,
)
from .metrics import (
    InvalidTime,
    QualityReport,
    ScalabilitySweep,
    SpeedupReport,
    adjusted_rand_index,
    assign_global_labels,
    exchange_ratio,
    quality_report,
    scalability_sweep,
    speedup,
)
from .parallel import run_concurrent
from .runtime import NodeTiming, TimingLedger, simulate

__version__ = "0.1.0"
