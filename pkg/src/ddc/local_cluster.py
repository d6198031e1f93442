"""Per-node phase-1 computation: DBSCAN over a fragment, then one concave
contour per cluster. The resulting LocalModel (contours plus counts) is the
only thing a node ever ships to the merge phase."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import geom

NOISE = -1
_UNVISITED = -2


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


def _neighbor_lists(pts: np.ndarray, eps: float) -> list[np.ndarray]:
    """Eps-neighbor indices per point (self included), via a grid-bucket
    index with cell size eps.

    Candidates come from the surrounding 3x3 block of cells and are checked
    cell by cell in one vectorized distance computation, so the expected
    work is linear in the number of point pairs within eps (quadratic in n
    for a fixed region, like the density-based scan itself).
    """
    eps2 = eps * eps
    cells_of = np.floor(pts / eps).astype(np.int64)
    grouped: dict[tuple[int, int], list[int]] = {}
    for i, key in enumerate(map(tuple, cells_of)):
        grouped.setdefault(key, []).append(i)
    cells = {key: np.asarray(idx, dtype=np.int64) for key, idx in grouped.items()}
    empty = np.empty(0, dtype=np.int64)
    neighbors: list[np.ndarray] = [None] * len(pts)  # type: ignore[list-item]
    for (cx, cy), mine in cells.items():
        blocks = [
            cells.get((gx, gy), empty)
            for gx in (cx - 1, cx, cx + 1)
            for gy in (cy - 1, cy, cy + 1)
        ]
        cand_idx = np.sort(np.concatenate(blocks))
        d = pts[cand_idx][None, :, :] - pts[mine][:, None, :]
        within = (d[..., 0] ** 2 + d[..., 1] ** 2) <= eps2
        flat = cand_idx[np.nonzero(within)[1]]
        offsets = np.concatenate([[0], np.cumsum(within.sum(axis=1))])
        for k, i in enumerate(mine):
            neighbors[i] = flat[offsets[k] : offsets[k + 1]]
    return neighbors


def dbscan(points, params: DbscanParams) -> np.ndarray:
    """Density-based clustering; returns one label per point (NOISE = -1).

    A point is core when it has at least min_pts neighbors within eps,
    itself included. Clusters are grown from core points in index order, so
    border points contested between clusters go to the first cluster that
    reaches them. Deterministic for a fixed input ordering.
    """
    pts = geom.as_point_array(points)
    n = len(pts)
    labels = np.full(n, _UNVISITED, dtype=np.int64)
    if n == 0:
        return labels
    neighbors = _neighbor_lists(pts, params.eps)
    min_pts = params.min_pts

    def claim(nbrs):
        # Noise neighbors become border points; unvisited ones join and
        # are queued for expansion. Labeling on enqueue keeps every point
        # in the queue at most once.
        snapshot = labels[nbrs]
        labels[nbrs[snapshot == NOISE]] = cid
        fresh = nbrs[snapshot == _UNVISITED]
        labels[fresh] = cid
        return fresh

    cid = 0
    for i in range(n):
        if labels[i] != _UNVISITED:
            continue
        if len(neighbors[i]) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cid
        queue = deque(claim(neighbors[i]).tolist())
        while queue:
            j = queue.popleft()
            nbrs = neighbors[j]
            if len(nbrs) >= min_pts:
                queue.extend(claim(nbrs).tolist())
        cid += 1
    return labels


@dataclass(frozen=True, eq=False)
class ClusterContour:
    cluster_id: int
    contour: geom.Contour
    member_count: int


@dataclass(frozen=True, eq=False)
class LocalModel:
    """One node's phase-1 result: per-cluster contours plus counts."""

    node_id: str
    n: int
    noise_count: int
    clusters: tuple[ClusterContour, ...]

    def __post_init__(self):
        members = sum(c.member_count for c in self.clusters)
        if members + self.noise_count != self.n:
            raise ValueError("cluster members + noise must equal input size")

    @property
    def contour_vertex_count(self) -> int:
        return sum(c.contour.vertex_count for c in self.clusters)

    @property
    def reduction_ratio(self) -> float:
        return self.contour_vertex_count / self.n if self.n else 0.0

    def to_json_dict(self) -> dict:
        return {
            "node_id": self.node_id,
            "n": self.n,
            "noise": self.noise_count,
            "clusters": [
                {
                    "id": c.cluster_id,
                    "count": c.member_count,
                    "contour": c.contour.to_json_dict(),
                }
                for c in self.clusters
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LocalModel":
        clusters = tuple(
            ClusterContour(c["id"], geom.Contour.from_json_dict(c["contour"]), c["count"])
            for c in obj["clusters"]
        )
        return cls(obj["node_id"], obj["n"], obj["noise"], clusters)

    @classmethod
    def from_json(cls, text: str) -> "LocalModel":
        return cls.from_json_dict(json.loads(text))


def degenerate_contour(cluster_pts: np.ndarray, epsilon: float) -> geom.Contour:
    """Thin rectangle around a degenerate (point-like or collinear) cluster."""
    pts = geom.as_point_array(cluster_pts)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if np.allclose(lo, hi):
        cx, cy = (lo + hi) / 2.0
        e = epsilon
        ring = [(cx - e, cy - e), (cx + e, cy - e), (cx + e, cy + e), (cx - e, cy + e)]
        return geom.Contour.from_ring(ring)
    # Collinear spread: inflate the extreme segment by epsilon on all sides.
    center = (lo + hi) / 2.0
    offsets = pts - center
    direction = offsets[np.argmax(np.hypot(offsets[:, 0], offsets[:, 1]))]
    direction = direction / np.hypot(direction[0], direction[1])
    proj = offsets @ direction
    p0 = center + proj.min() * direction - epsilon * direction
    p1 = center + proj.max() * direction + epsilon * direction
    normal = np.array([-direction[1], direction[0]]) * epsilon
    ring = [p0 - normal, p1 - normal, p1 + normal, p0 + normal]
    return geom.Contour.from_ring(np.asarray(ring))


def cluster_contour(
    cluster_pts: np.ndarray,
    hull_threshold: float | None,
    hull_scale: float,
    fragment_diameter: float,
) -> geom.Contour:
    """Contour for one cluster's points, with the degenerate fallback."""
    try:
        tri = geom.delaunay(cluster_pts)
    except geom.DegenerateInput:
        eps = max(1e-9, 1e-6 * fragment_diameter)
        return degenerate_contour(cluster_pts, eps)
    threshold = hull_threshold
    if threshold is None:
        threshold = hull_scale * geom.mean_edge_length(tri)
    return geom.concave_hull(tri, threshold)


def build_local_model(
    node_id: str,
    points,
    params: DbscanParams,
    hull_threshold: float | None = None,
    hull_scale: float = geom.DEFAULT_HULL_SCALE,
    labeler=None,
) -> LocalModel:
    """Run the local clustering step and reduce each cluster to a contour.

    ``labeler`` may replace DBSCAN with any callable of the same signature;
    only DBSCAN ships.
    """
    pts = geom.as_point_array(points)
    labels = (labeler or dbscan)(pts, params)
    n = len(pts)
    noise = int(np.count_nonzero(labels == NOISE)) if n else 0
    if n:
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        diameter = float(np.hypot(*(hi - lo)))
    else:
        diameter = 0.0
    clusters = []
    n_clusters = int(labels.max()) + 1 if n and labels.max() >= 0 else 0
    for cid in range(n_clusters):
        cpts = pts[labels == cid]
        contour = cluster_contour(cpts, hull_threshold, hull_scale, diameter)
        clusters.append(ClusterContour(cid, contour, len(cpts)))
    return LocalModel(node_id, n, noise, tuple(clusters))
