"""Speedup, data-exchange ratio, clustering-quality agreement against a
sequential reference labeling, and scalability sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geom
from .config import CommMode, CostModel, DatasetSpec, NodeProfile, PartitionSpec, ScenarioConfig
from .datasets import PointSet
from .local_cluster import NOISE, DbscanParams, cluster_contour
from .merge import GlobalModel


class InvalidTime(ValueError):
    """Speedup needs strictly positive times."""


@dataclass(frozen=True)
class SpeedupReport:
    t1_ms: float
    tp_ms: float
    p: int
    alpha: float
    super_linear: bool


def speedup(t1_ms: float, tp_ms: float, p: int) -> SpeedupReport:
    """alpha = t1 / tp; flagged super-linear when alpha exceeds p."""
    if not (t1_ms > 0 and tp_ms > 0):
        raise InvalidTime("times must be positive")
    alpha = t1_ms / tp_ms
    return SpeedupReport(t1_ms, tp_ms, p, alpha, alpha > p)


def exchange_ratio(models: Sequence) -> float:
    """Transmitted contour vertices over total points held by the nodes."""
    if not models:
        raise ValueError("need at least one local model")
    vertices = sum(m.contour_vertex_count for m in models)
    points = sum(m.n for m in models)
    return vertices / points if points else 0.0


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two labelings; in [-1, 1]."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = len(a)
    if n <= 1:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    kb = int(bi.max()) + 1
    contingency = np.bincount(ai * kb + bi, minlength=(int(ai.max()) + 1) * kb).astype(float)

    def comb2(x):
        return x * (x - 1.0) / 2.0

    table = contingency.reshape(int(ai.max()) + 1, kb)
    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def assign_global_labels(points, gm: GlobalModel) -> np.ndarray:
    """Label each point by the containing global contour, or NOISE.

    Global contours are disjoint, so at most one contains any point;
    boundary points count as inside.
    """
    pts = geom.as_point_array(points)
    labels = np.full(len(pts), NOISE, dtype=np.int64)
    for cluster in gm.clusters:
        mask = geom.points_in_contour(pts, cluster.contour)
        labels[mask & (labels == NOISE)] = cluster.gid
    return labels


@dataclass(frozen=True)
class QualityReport:
    """Agreement between the distributed result and a reference labeling."""

    ari: float
    # (gid, matched reference label, symmetric-difference / union area)
    region_gaps: tuple[tuple[int, int, float], ...]


def quality_report(
    points,
    gm: GlobalModel,
    reference_labels,
    hull_threshold: float | None = None,
    hull_scale: float = geom.DEFAULT_HULL_SCALE,
) -> QualityReport:
    pts = geom.as_point_array(points)
    ref = np.asarray(reference_labels)
    ddc = assign_global_labels(pts, gm)
    ari = adjusted_rand_index(ddc, ref)

    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    diameter = float(np.hypot(*(hi - lo)))
    gaps = []
    for cluster in gm.clusters:
        members = ref[ddc == cluster.gid]
        members = members[members != NOISE]
        if len(members) == 0:
            continue
        ref_label = int(np.bincount(members).argmax())
        ref_contour = cluster_contour(
            pts[ref == ref_label], hull_threshold, hull_scale, diameter
        )
        a = geom.to_shapely(cluster.contour)
        b = geom.to_shapely(ref_contour)
        union_area = a.union(b).area
        gap = a.symmetric_difference(b).area / union_area if union_area else 0.0
        gaps.append((cluster.gid, ref_label, float(gap)))
    return QualityReport(ari, tuple(gaps))


# ---------------------------------------------------------------------------
# Scalability sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    m: int
    phase1_ms: float
    phase2_ms: float
    total_ms: float


@dataclass(frozen=True)
class ScalabilitySweep:
    entries: tuple[SweepEntry, ...]

    @property
    def optimal_m(self) -> int:
        best = min(e.total_ms for e in self.entries)
        return next(e.m for e in self.entries if e.total_ms == best)

    def to_csv(self) -> str:
        lines = ["m,phase1_ms,phase2_ms,total_ms"]
        for e in self.entries:
            lines.append(f"{e.m},{e.phase1_ms:.3f},{e.phase2_ms:.3f},{e.total_ms:.3f}")
        return "\n".join(lines) + "\n"


def uniform_profiles(m: int, speed: float = 1.0) -> tuple[NodeProfile, ...]:
    width = max(2, len(str(m - 1)))
    return tuple(NodeProfile(node_id=f"n{i:0{width}d}", speed=speed) for i in range(m))


def scalability_sweep(
    ds: PointSet,
    node_counts: Sequence[int],
    cost: CostModel | None = None,
    comm: CommMode | str = CommMode.SYNC,
    *,
    dbscan_params: DbscanParams,
    degree: int = 2,
    seed: int = 0,
    hull_threshold: float | None = None,
    hull_scale: float = geom.DEFAULT_HULL_SCALE,
) -> ScalabilitySweep:
    """Simulated cost of clustering ``ds`` on m nodes, for each m.

    Uses equal partitioning over uniform speed-1 profiles. Phase 1 is the
    slowest node's local clustering plus contour time; phase 2 is the rest
    of the critical path (communication and merging).
    """
    from .runtime import simulate  # local import to keep module deps one-way

    if list(node_counts) != sorted(node_counts):
        raise ValueError("node_counts must be ascending")
    entries = []
    for m in node_counts:
        cfg = ScenarioConfig(
            dataset=DatasetSpec(),
            partition=PartitionSpec(strategy="equal", k=m),
            profiles=uniform_profiles(m),
            dbscan=dbscan_params,
            degree=degree,
            comm=CommMode.parse(comm).value,
            seed=seed,
            hull_threshold=hull_threshold,
            hull_scale=hull_scale,
        )
        _, ledger = simulate(cfg, comm=comm, cost=cost, dataset=ds)
        phase1 = max(r.step1_ms for r in ledger.rows)
        total = ledger.total_exec_ms
        entries.append(SweepEntry(m, phase1, total - phase1, total))
    return ScalabilitySweep(tuple(entries))
