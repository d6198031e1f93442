"""Phase-2 aggregation: nodes form degree-D groups per level, each group
elects a leader, leaders merge overlapping contours, and the surviving
leaders repeat one level up until a single root holds the global clusters."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import geom


@dataclass(frozen=True)
class Group:
    members: tuple[str, ...]
    leader: str


@dataclass(frozen=True)
class MergeTree:
    """Aggregation hierarchy. ``levels[0]`` is the bottom round over all
    nodes; each later round groups the previous round's leaders; the last
    round has a single group whose leader is the root."""

    degree: int
    levels: tuple[tuple[Group, ...], ...]
    root: str

    @property
    def height(self) -> int:
        return len(self.levels)


def _elect(members: Sequence[str], policy: str, speeds: Mapping[str, float] | None) -> str:
    if policy == "lowest-id":
        return min(members)
    if policy == "fastest":
        if not speeds:
            raise ValueError("'fastest' election needs node speeds")
        return min(members, key=lambda m: (-speeds[m], m))
    raise ValueError(f"unknown election policy {policy!r}")


def build_merge_tree(
    node_ids: Sequence[str],
    degree: int,
    election: str = "lowest-id",
    speeds: Mapping[str, float] | None = None,
) -> MergeTree:
    """Group nodes into chunks of at most ``degree`` per level.

    Height is ceil(log_degree(#nodes)); leaders of one level are exactly the
    participants of the next. A single node yields an empty hierarchy with
    that node as root.
    """
    if degree < 2:
        raise ValueError("tree degree must be >= 2")
    ids = list(node_ids)
    if not ids:
        raise ValueError("need at least one node")
    if len(set(ids)) != len(ids):
        raise ValueError("node ids must be unique")
    levels: list[tuple[Group, ...]] = []
    current = ids
    while len(current) > 1:
        groups = []
        for i in range(0, len(current), degree):
            members = tuple(current[i : i + degree])
            groups.append(Group(members, _elect(members, election, speeds)))
        levels.append(tuple(groups))
        current = [g.leader for g in groups]
    tree = MergeTree(degree, tuple(levels), current[0])
    expected = math.ceil(math.log(len(ids), degree)) if len(ids) > 1 else 0
    assert tree.height == expected, "grouping produced an unexpected height"
    return tree


# ---------------------------------------------------------------------------
# Contour merging
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _overlap_components(contours: Sequence[geom.Contour]) -> list[list[int]]:
    """Connected components of the overlap relation (bbox-prefiltered)."""
    uf = _UnionFind(len(contours))
    bounds = [c.bounds for c in contours]
    for i in range(len(contours)):
        x0, y0, x1, y1 = bounds[i]
        for j in range(i + 1, len(contours)):
            if uf.find(i) == uf.find(j):
                continue
            u0, v0, u1, v1 = bounds[j]
            if x1 < u0 or u1 < x0 or y1 < v0 or v1 < y0:
                continue
            if geom.polygons_overlap(contours[i], contours[j]):
                uf.union(i, j)
    comps: dict[int, list[int]] = {}
    for i in range(len(contours)):
        comps.setdefault(uf.find(i), []).append(i)
    return [comps[r] for r in sorted(comps)]


def merge_contour_sets(sets: Iterable[Sequence[geom.Contour]]) -> list[geom.Contour]:
    """Merge the overlapping contours across all given sets.

    Computes the transitive closure of the overlap relation over the whole
    multiset, replaces every connected component by the union of its
    members, and passes non-overlapping contours through unchanged. The
    resulting contours are pairwise disjoint; the regions do not depend on
    input order.
    """
    flat: list[geom.Contour] = [c for s in sets for c in s]
    merged = []
    for comp in _overlap_components(flat):
        if len(comp) == 1:
            merged.append(flat[comp[0]])
        else:
            merged.append(geom.union_all([flat[i] for i in comp]))
    return merged


Provenance = tuple[tuple[str, int], ...]


def merge_with_provenance(
    items: Sequence[tuple[geom.Contour, Provenance]],
) -> list[tuple[geom.Contour, Provenance]]:
    """merge_contour_sets, carrying the (node, cluster) origins along."""
    contours = [c for c, _ in items]
    out = []
    for comp in _overlap_components(contours):
        prov = tuple(sorted({p for i in comp for p in items[i][1]}))
        if len(comp) == 1:
            out.append((contours[comp[0]], prov))
        else:
            out.append((geom.union_all([contours[i] for i in comp]), prov))
    return out


@dataclass(frozen=True, eq=False)
class GlobalCluster:
    gid: int
    contour: geom.Contour
    provenance: Provenance


@dataclass(frozen=True, eq=False)
class GlobalModel:
    """Root-level result: disjoint global contours with their origins."""

    clusters: tuple[GlobalCluster, ...]

    @property
    def contours(self) -> list[geom.Contour]:
        return [c.contour for c in self.clusters]

    def to_json_dict(self) -> dict:
        return {
            "clusters": [
                {
                    "gid": c.gid,
                    "contour": c.contour.to_json_dict(),
                    "provenance": [list(p) for p in c.provenance],
                }
                for c in self.clusters
            ]
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GlobalModel":
        clusters = tuple(
            GlobalCluster(
                c["gid"],
                geom.Contour.from_json_dict(c["contour"]),
                tuple((str(n), int(i)) for n, i in c["provenance"]),
            )
            for c in obj["clusters"]
        )
        return cls(clusters)

    @classmethod
    def from_json(cls, text: str) -> "GlobalModel":
        return cls.from_json_dict(json.loads(text))


def finalize_global(items: Sequence[tuple[geom.Contour, Provenance]]) -> GlobalModel:
    """Assign global ids by ascending minimum (node_id, cluster_id) origin."""
    ordered = sorted(items, key=lambda item: min(item[1]))
    clusters = tuple(
        GlobalCluster(gid, contour, prov) for gid, (contour, prov) in enumerate(ordered)
    )
    return GlobalModel(clusters)


def leaf_items(model) -> list[tuple[geom.Contour, Provenance]]:
    """A local model's contours tagged with their (node, cluster) origin."""
    return [(c.contour, ((model.node_id, c.cluster_id),)) for c in model.clusters]


def run_phase2(models: Sequence, tree: MergeTree) -> GlobalModel:
    """Walk the hierarchy: per level, each group's leader merges the group's
    contour sets; the root's final set becomes the GlobalModel. The result
    regions equal a flat merge of all leaf contours regardless of the tree."""
    sets: dict[str, list[tuple[geom.Contour, Provenance]]] = {
        m.node_id: leaf_items(m) for m in models
    }
    known = set(sets)
    tree_nodes = {n for level in tree.levels for g in level for n in g.members}
    tree_nodes.add(tree.root)
    if tree_nodes != known:
        raise ValueError("tree nodes and local models do not match")
    for level in tree.levels:
        for group in level:
            pooled = [item for m in group.members for item in sets[m]]
            sets[group.leader] = merge_with_provenance(pooled)
    # Root closure also covers the trivial single-node hierarchy.
    return finalize_global(merge_with_provenance(sets[tree.root]))
