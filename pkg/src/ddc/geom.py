"""2-D geometry kernel for cluster contours.

Everything a clustering node needs to turn a point cloud into a compact
boundary polygon and everything a merging node needs to combine boundaries:
Delaunay triangulation, chi-shape concave hulls (iterative removal of long
boundary edges), point-in-polygon membership with an inside-on-boundary
convention, and overlap/union of polygons with holes.

Boolean predicates and unions are delegated to GEOS (shapely), which handles
the floating-point robustness issues that sink naive implementations.
Membership tests and areas are computed independently here so they can serve
as oracles for the GEOS-backed operations.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import Delaunay as _SciPyDelaunay
from scipy.spatial import QhullError
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.ops import unary_union as _unary_union

# Absolute snapping tolerance for vertex deduplication.
SNAP_TOL = 1e-9
# Points closer than this to a ring edge count as lying on the boundary.
BOUNDARY_TOL = 1e-9
# Chi-shape default: threshold = scale * mean Delaunay edge length. The
# scale trades boundary detail against contour size; 8.0 keeps the
# transmitted vertex budget a few percent of the data while still carving
# concavities an order of magnitude wider than the point spacing.
DEFAULT_HULL_SCALE = 8.0

_MEMBERSHIP_BLOCK = 2048


class DegenerateInput(ValueError):
    """Fewer than 3 distinct points after snapping, or all collinear."""


class NotOverlapping(ValueError):
    """Union was requested for contours whose regions do not intersect."""


class GeometryError(ValueError):
    """An operation produced geometry a single contour cannot represent."""


def as_point_array(points) -> np.ndarray:
    """Coerce a PointSet, sequence of pairs, or array into an (n, 2) float array."""
    pts = getattr(points, "points", points)
    arr = np.asarray(pts, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) points, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("points must be finite")
    return arr


def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area; positive for counter-clockwise rings."""
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True, eq=False)
class Contour:
    """Simple polygon, possibly with holes, bounding one cluster.

    ``rings[0]`` is the outer boundary, oriented counter-clockwise (positive
    signed area); any further rings are holes, oriented clockwise. Rings are
    (k, 2) float arrays without a repeated closing vertex. Orientation is
    normalized at construction; the arrays are frozen afterwards.
    """

    rings: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.rings:
            raise ValueError("a contour needs at least an outer ring")
        normalized = []
        for i, ring in enumerate(self.rings):
            arr = np.array(ring, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
                raise ValueError("each ring needs at least 3 (x, y) vertices")
            if not np.isfinite(arr).all():
                raise ValueError("ring vertices must be finite")
            area = ring_signed_area(arr)
            if area == 0.0:
                raise ValueError("zero-area ring")
            outer = i == 0
            if (area > 0.0) != outer:
                arr = arr[::-1].copy()
            arr.setflags(write=False)
            normalized.append(arr)
        object.__setattr__(self, "rings", tuple(normalized))

    @property
    def vertex_count(self) -> int:
        return sum(len(r) for r in self.rings)

    @property
    def area(self) -> float:
        """Region area: outer ring area minus hole areas."""
        return sum(ring_signed_area(r) for r in self.rings)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cached = self.__dict__.get("_bounds")
        if cached is None:
            outer = self.rings[0]
            cached = (
                float(outer[:, 0].min()),
                float(outer[:, 1].min()),
                float(outer[:, 0].max()),
                float(outer[:, 1].max()),
            )
            object.__setattr__(self, "_bounds", cached)
        return cached

    def to_json_dict(self) -> dict:
        return {"rings": [r.tolist() for r in self.rings]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Contour":
        return cls(tuple(np.asarray(r, dtype=float) for r in obj["rings"]))

    @classmethod
    def from_json(cls, text: str) -> "Contour":
        return cls.from_json_dict(json.loads(text))

    @classmethod
    def from_ring(cls, ring) -> "Contour":
        return cls((np.asarray(ring, dtype=float),))


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Delaunay triangulation of a deduplicated point set.

    ``triangles`` holds vertex-index triples; ``boundary_edges`` the edges
    bordering exactly one triangle (the convex hull, for a fresh
    triangulation).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray


def _dedup(points: np.ndarray) -> np.ndarray:
    # Snap to the SNAP_TOL grid, keep first occurrences in input order.
    keys = np.rint(points / SNAP_TOL).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def delaunay(points) -> Triangulation:
    """Delaunay-triangulate a point set.

    Duplicate points are snapped away first. Raises DegenerateInput when
    fewer than 3 distinct points remain or all of them are collinear.
    Deterministic for a fixed input ordering.
    """
    pts = as_point_array(points)
    uniq = _dedup(pts) if len(pts) else pts
    if len(uniq) < 3:
        raise DegenerateInput(f"need >= 3 distinct points, got {len(uniq)}")
    try:
        tri = _SciPyDelaunay(uniq)
    except QhullError as exc:
        raise DegenerateInput("points are collinear") from exc
    simplices = np.ascontiguousarray(tri.simplices, dtype=np.int64)
    if len(simplices) == 0:
        raise DegenerateInput("points are collinear")
    boundary = _boundary_edges(simplices)
    return Triangulation(uniq, simplices, boundary)


def _all_edges(simplices: np.ndarray) -> np.ndarray:
    s = simplices
    edges = np.concatenate([s[:, [0, 1]], s[:, [1, 2]], s[:, [2, 0]]])
    return np.sort(edges, axis=1)


def _boundary_edges(simplices: np.ndarray) -> np.ndarray:
    edges, counts = np.unique(_all_edges(simplices), axis=0, return_counts=True)
    return edges[counts == 1]


def triangulation_edges(tri: Triangulation) -> np.ndarray:
    """Unique undirected edges of the triangulation, sorted."""
    return np.unique(_all_edges(tri.triangles), axis=0)


def mean_edge_length(tri: Triangulation) -> float:
    edges = triangulation_edges(tri)
    d = tri.vertices[edges[:, 0]] - tri.vertices[edges[:, 1]]
    return float(np.hypot(d[:, 0], d[:, 1]).mean())


def concave_hull(points, length_threshold: float) -> Contour:
    """Chi-shape concave hull of a point set.

    Starting from the Delaunay triangulation's convex boundary, repeatedly
    remove the longest boundary edge that (a) is longer than
    ``length_threshold`` and (b) whose opposite triangle vertex is interior.
    Rule (b) keeps the boundary a simple polygon over all input points, so
    the result always contains every point inside or on it. At
    ``length_threshold = inf`` nothing is removed and the result is the
    convex hull. Runs in O(n log n).

    Accepts raw points or a prebuilt Triangulation.
    """
    if not length_threshold > 0:
        raise ValueError("length_threshold must be positive")
    tri = points if isinstance(points, Triangulation) else delaunay(points)
    verts = tri.vertices
    simplices = tri.triangles

    # Edge -> incident triangle ids, grouped in one vectorized pass.
    edges = _all_edges(simplices)
    tri_ids = np.tile(np.arange(len(simplices)), 3)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    e_sorted = edges[order]
    t_sorted = tri_ids[order]
    change = np.nonzero(np.any(e_sorted[1:] != e_sorted[:-1], axis=1))[0] + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(e_sorted)]])
    edge_tris = {
        (int(e_sorted[a, 0]), int(e_sorted[a, 1])): t_sorted[a:b]
        for a, b in zip(starts, ends)
    }

    def edge_len(e):
        d = verts[e[0]] - verts[e[1]]
        return math.hypot(d[0], d[1])

    alive = np.ones(len(simplices), dtype=bool)
    boundary = {tuple(e) for e in tri.boundary_edges}
    on_boundary = {v for e in boundary for v in e}
    heap = [(-edge_len(e), e[0], e[1]) for e in boundary]
    heapq.heapify(heap)

    while heap:
        neg_len, a, b = heapq.heappop(heap)
        edge = (a, b)
        if edge not in boundary:
            continue  # stale entry
        if -neg_len <= length_threshold:
            break  # longest remaining boundary edge is short enough
        live = [t for t in edge_tris[edge] if alive[t]]
        if len(live) != 1:
            continue
        t = live[0]
        (c,) = (v for v in simplices[t] if v != a and v != b)
        if c in on_boundary:
            continue  # removal would pinch the boundary; edge stays
        alive[t] = False
        boundary.discard(edge)
        on_boundary.add(c)
        for u, v in ((a, c), (c, b)):
            key = (u, v) if u < v else (v, u)
            boundary.add(key)
            heapq.heappush(heap, (-edge_len(key), key[0], key[1]))

    ring_idx = _walk_boundary(boundary)
    return Contour.from_ring(verts[ring_idx])


def _walk_boundary(boundary: set[tuple[int, int]]) -> list[int]:
    adj: dict[int, list[int]] = {}
    for a, b in boundary:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    for v, nbrs in adj.items():
        if len(nbrs) != 2:
            raise GeometryError(f"boundary is not a simple cycle at vertex {v}")
    start = min(adj)
    cycle = [start]
    prev, cur = None, start
    while True:
        nxt = min(n for n in adj[cur] if n != prev) if prev is None else next(
            n for n in adj[cur] if n != prev
        )
        if nxt == start:
            break
        cycle.append(nxt)
        prev, cur = cur, nxt
    if len(cycle) != len(boundary):
        raise GeometryError("boundary edges do not form a single cycle")
    return cycle


# ---------------------------------------------------------------------------
# Membership (independent of GEOS; used as the oracle side of boolean ops)
# ---------------------------------------------------------------------------


def _ring_crossings(ring: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Even-odd crossing counts of a horizontal ray from each point."""
    x1 = ring[:, 0][:, None]
    y1 = ring[:, 1][:, None]
    x2 = np.roll(ring[:, 0], -1)[:, None]
    y2 = np.roll(ring[:, 1], -1)[:, None]
    straddles = (y1 <= py) != (y2 <= py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    hits = straddles & (px < xint)
    return hits.sum(axis=0)


def _ring_on_boundary(ring: np.ndarray, px: np.ndarray, py: np.ndarray, tol: float) -> np.ndarray:
    x1 = ring[:, 0][:, None]
    y1 = ring[:, 1][:, None]
    x2 = np.roll(ring[:, 0], -1)[:, None]
    y2 = np.roll(ring[:, 1], -1)[:, None]
    dx = x2 - x1
    dy = y2 - y1
    seg2 = dx * dx + dy * dy
    seg2[seg2 == 0.0] = 1.0  # degenerate edge: distance to its start point
    wx = px - x1
    wy = py - y1
    t = np.clip((wx * dx + wy * dy) / seg2, 0.0, 1.0)
    rx = wx - t * dx
    ry = wy - t * dy
    return ((rx * rx + ry * ry) <= tol * tol).any(axis=0)


def points_in_contour(points, contour: Contour, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorized membership test; boundary points count as inside.

    Even-odd parity over all rings, so points inside a hole are outside the
    region while points on a hole's edge are on the region boundary.
    """
    pts = as_point_array(points)
    out = np.zeros(len(pts), dtype=bool)
    for start in range(0, len(pts), _MEMBERSHIP_BLOCK):
        block = pts[start : start + _MEMBERSHIP_BLOCK]
        px = block[:, 0][None, :]
        py = block[:, 1][None, :]
        parity = np.zeros(len(block), dtype=np.int64)
        on_edge = np.zeros(len(block), dtype=bool)
        for ring in contour.rings:
            parity += _ring_crossings(ring, px, py)
            on_edge |= _ring_on_boundary(ring, px, py, tol)
        out[start : start + len(block)] = (parity % 2 == 1) | on_edge
    return out


def point_in_contour(p, contour: Contour) -> bool:
    """Membership of a single point; boundary-inclusive."""
    arr = np.asarray(p, dtype=float).reshape(1, 2)
    return bool(points_in_contour(arr, contour)[0])


# ---------------------------------------------------------------------------
# Boolean operations (GEOS-backed)
# ---------------------------------------------------------------------------


def to_shapely(contour: Contour) -> _ShapelyPolygon:
    cached = contour.__dict__.get("_shapely")
    if cached is None:
        cached = _ShapelyPolygon(contour.rings[0], [r for r in contour.rings[1:]])
        object.__setattr__(contour, "_shapely", cached)
    return cached


def from_shapely(poly) -> Contour:
    if poly.geom_type != "Polygon":
        raise GeometryError(f"expected a single polygon, got {poly.geom_type}")
    rings = [np.asarray(poly.exterior.coords, dtype=float)[:-1]]
    rings.extend(np.asarray(r.coords, dtype=float)[:-1] for r in poly.interiors)
    return Contour(tuple(rings))


def polygons_overlap(a: Contour, b: Contour) -> bool:
    """True iff the closed regions intersect: crossing, containment, or touch."""
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
        return False
    return bool(to_shapely(a).intersects(to_shapely(b)))


def polygon_union(a: Contour, b: Contour) -> Contour:
    """Union of two overlapping contours as a single contour.

    Raises NotOverlapping for disjoint inputs (those stay separate clusters)
    and GeometryError in the measure-zero case where the regions touch at a
    single point only, so their union is not a single polygon.
    """
    pa, pb = to_shapely(a), to_shapely(b)
    if not pa.intersects(pb):
        raise NotOverlapping("contours do not overlap")
    return from_shapely(pa.union(pb))


def union_all(contours: Sequence[Contour]) -> Contour:
    """Union of a set of contours whose overlap graph is connected."""
    if len(contours) == 1:
        return contours[0]
    merged = _unary_union([to_shapely(c) for c in contours])
    return from_shapely(merged)


def boundary_intersection_count(a: Contour, b: Contour) -> int:
    """Number of intersection points between the two contours' edges.

    Collinear edge overlaps count their two endpoints. Used by the timing
    model to price merge work; not a merge predicate.
    """
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    if ax1 < bx0 or bx1 < ax0 or ay1 < by0 or by1 < ay0:
        return 0
    inter = to_shapely(a).boundary.intersection(to_shapely(b).boundary)
    if inter.is_empty:
        return 0
    parts = inter.geoms if hasattr(inter, "geoms") else [inter]
    count = 0
    for g in parts:
        if g.geom_type == "Point":
            count += 1
        elif g.geom_type in ("LineString", "LinearRing"):
            count += 2
        elif hasattr(g, "geoms"):
            count += sum(1 if p.geom_type == "Point" else 2 for p in g.geoms)
    return count
