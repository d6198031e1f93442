"""Synthetic 2-D benchmark scenes, CSV point files, and the partitioners
that split a dataset across processing nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, PartitionSpec, ScenarioConfig


class UnknownShape(ValueError):
    """Requested generator shape does not exist."""


class SpecError(ValueError):
    """Partition spec cannot be satisfied on this dataset."""


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable 2-D dataset; the unit of partitioning and clustering."""

    points: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"expected (n, 2) points, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("points must be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        if len(self.points) == 0:
            return (0.0, 0.0, 0.0, 0.0)
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    def save_csv(self, path, header: bool = False):
        with open(path, "w") as fh:
            if header:
                fh.write("x,y\n")
            for x, y in self.points:
                fh.write(f"{x:.17g},{y:.17g}\n")

    @classmethod
    def load_csv(cls, path) -> "PointSet":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                first = line.split(",")[0].strip()
                try:
                    float(first)
                except ValueError:
                    continue  # header or comment line
                x, y = line.split(",")[:2]
                rows.append((float(x), float(y)))
        return cls(np.asarray(rows, dtype=float).reshape(-1, 2))


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def _blob(rng, n, center=(0.0, 0.0), std=1.0):
    if n == 1:
        return np.asarray([center], dtype=float)
    return rng.normal(loc=center, scale=std, size=(n, 2))


def _disk(rng, n, center=(0.0, 0.0), radius=1.0):
    r = radius * np.sqrt(rng.random(n))
    th = rng.random(n) * 2 * np.pi
    return np.c_[center[0] + r * np.cos(th), center[1] + r * np.sin(th)]


def _ring(rng, n, center=(0.0, 0.0), r_inner=1.0, r_outer=2.0, arc_deg=360.0, mouth_deg=0.0):
    """Annulus, optionally with an opening of mouth_deg centred on +x."""
    if not 0 < r_inner < r_outer:
        raise ValueError("ring needs 0 < r_inner < r_outer")
    half_mouth = math.radians(mouth_deg) / 2.0
    span = 2 * np.pi - 2 * half_mouth
    th = half_mouth + rng.random(n) * span
    r = np.sqrt(rng.random(n) * (r_outer**2 - r_inner**2) + r_inner**2)
    return np.c_[center[0] + r * np.cos(th), center[1] + r * np.sin(th)]


def _oval(rng, n, center=(0.0, 0.0), a=2.0, b=1.0, angle_deg=0.0):
    pts = _disk(rng, n, (0.0, 0.0), 1.0)
    pts[:, 0] *= a
    pts[:, 1] *= b
    t = math.radians(angle_deg)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    return pts @ rot.T + np.asarray(center)


def _crescent(rng, n, center=(0.0, 0.0), radius=1.0, thickness=0.15, arc_deg=200.0, rotate_deg=0.0):
    th = math.radians(rotate_deg) + np.radians(rng.random(n) * arc_deg - arc_deg / 2.0)
    r = radius + rng.normal(0.0, thickness, n)
    return np.c_[center[0] + r * np.cos(th), center[1] + r * np.sin(th)]


def _nested(rng, n, center=(0.0, 0.0), r_disk=4.5, r_inner=11.0, r_outer=16.0, mouth_deg=110.0):
    """A disk surrounded by an open annulus: two clusters, one inside the other."""
    n_ring = int(round(n * 0.64))
    n_disk = n - n_ring
    parts = [
        _ring(rng, n_ring, center, r_inner, r_outer, mouth_deg=mouth_deg),
        _disk(rng, n_disk, center, r_disk),
    ]
    return np.concatenate(parts)


def _uniform_box(rng, n, lo=(0.0, 0.0), hi=(1.0, 1.0)):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return lo + rng.random((n, 2)) * (hi - lo)


def _allocate(n, fractions):
    counts = [int(math.floor(f * n)) for f in fractions]
    left = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: fractions[i] * n - counts[i], reverse=True)
    for i in range(left):
        counts[order[i % len(counts)]] += 1
    return counts


def _d1_scene(rng, n):
    """Mixed shapes with one cluster surrounded by another; light noise."""
    counts = _allocate(n, [0.25, 0.13, 0.26, 0.34, 0.02])
    parts = [
        _ring(rng, counts[0], (30.0, 32.0), 10.0, 14.5, mouth_deg=110.0),
        _disk(rng, counts[1], (30.0, 32.0), 4.0),
        _crescent(rng, counts[2], (74.0, 26.0), 12.0, 1.5, arc_deg=200.0, rotate_deg=90.0),
        _blob(rng, counts[3], (74.0, 74.0), 4.5),
        _uniform_box(rng, counts[4], (0.0, 0.0), (100.0, 100.0)),
    ]
    return np.concatenate([p for p in parts if len(p)])


def _d2_scene(rng, n):
    """Two small circles, one big circle, and two slanted ovals; light noise."""
    counts = _allocate(n, [0.38, 0.09, 0.09, 0.215, 0.215, 0.01])
    parts = [
        _disk(rng, counts[0], (35.0, 78.0), 20.0),
        _disk(rng, counts[1], (88.0, 98.0), 7.0),
        _disk(rng, counts[2], (104.0, 64.0), 7.0),
        _oval(rng, counts[3], (48.0, 24.0), 18.0, 5.0, 35.0),
        _oval(rng, counts[4], (84.0, 40.0), 18.0, 5.0, -35.0),
        _uniform_box(rng, counts[5], (0.0, 0.0), (120.0, 120.0)),
    ]
    return np.concatenate([p for p in parts if len(p)])


_SHAPES = {
    "gaussian-blob": _blob,
    "circle-disk": _disk,
    "ring": _ring,
    "oval": _oval,
    "crescent": _crescent,
    "nested": _nested,
    "d1-like": _d1_scene,
    "d2-like": _d2_scene,
}

DEFAULT_SIZES = {"d1-like": 10_000, "d2-like": 30_000}


def generate(shape: str, n: int | None = None, seed: int = 0, **params) -> PointSet:
    """Generate a named shape; deterministic for a fixed seed."""
    if shape not in _SHAPES:
        raise UnknownShape(f"unknown shape {shape!r}; choose from {sorted(_SHAPES)}")
    if n is None:
        n = DEFAULT_SIZES.get(shape)
    if n is None or n <= 0:
        raise ValueError("n must be a positive integer")
    rng = np.random.default_rng(seed)
    pts = _SHAPES[shape](rng, int(n), **params)
    return PointSet(pts)


# ---------------------------------------------------------------------------
# Partitioning
# ---------------------------------------------------------------------------


def _proportional_sizes(n, speeds):
    total = sum(speeds)
    quotas = [n * s / total for s in speeds]
    base = [int(math.floor(q)) for q in quotas]
    left = n - sum(base)
    order = sorted(range(len(speeds)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in range(left):
        base[order[i]] += 1
    return base


def _resolve_sizes(spec: PartitionSpec, n: int, rng, speeds) -> tuple[list[int], bool]:
    """Returns (sizes, replicate_big) where replicate_big marks strategies
    that hand the full dataset to designated nodes."""
    s = spec.strategy
    if s == "explicit":
        return list(spec.sizes), False
    if s == "equal":
        k = spec.k
        base = n // k
        rem = n - base * k
        return [base + (1 if i < rem else 0) for i in range(k)], False
    if s == "random-range":
        return [int(v) for v in rng.integers(spec.lo, spec.hi + 1, size=spec.k)], False
    if s == "one-big-rest-small":
        return [n] + [n // spec.k] * (spec.k - 1), True
    if s == "seven-big-one-small":
        return [n] * (spec.k - 1) + [n // spec.k], True
    if s == "capacity-proportional":
        if not speeds:
            raise SpecError("capacity-proportional needs node speeds")
        return _proportional_sizes(n, speeds), False
    raise SpecError(f"unknown partition strategy {s!r}")


def _tile_order(pts: np.ndarray, grid: int = 16) -> np.ndarray:
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    span[span == 0.0] = 1.0
    cells = np.minimum((pts - lo) / span * grid, grid - 1).astype(np.int64)
    cell_id = cells[:, 1] * grid + cells[:, 0]
    return np.lexsort((np.arange(len(pts)), cell_id))


def partition(ds: PointSet, spec: PartitionSpec, seed: int = 0, speeds=None) -> list[PointSet]:
    """Split a dataset into per-node fragments.

    Fragments are disjoint whenever the requested sizes fit in the dataset;
    the one-big / seven-big strategies replicate the full dataset to their
    designated nodes while the remaining small fragments stay disjoint.
    Explicit or random-range sizes that exceed the dataset in total fall
    back to independent random subsets per fragment (no point ever repeats
    within a fragment). Deterministic for a fixed (spec, seed).
    """
    spec.validate()
    n = len(ds)
    if n == 0:
        raise SpecError("cannot partition an empty dataset")
    rng = np.random.default_rng(seed)
    sizes, replicate_big = _resolve_sizes(spec, n, rng, speeds)
    if any(s <= 0 for s in sizes):
        raise SpecError(f"fragment sizes must be positive, got {sizes}")
    if any(s > n for s in sizes):
        raise SpecError(f"fragment size exceeds dataset size {n}: {sizes}")

    pts = ds.points
    if spec.assignment == "spatial-tiles":
        order = _tile_order(pts)
    else:
        order = rng.permutation(n)

    fragments: list[np.ndarray] = []
    if replicate_big:
        small_sizes = [s for s in sizes if s < n]
        if sum(small_sizes) > n:
            raise SpecError("small fragments of a replicating split must fit the dataset")
        cursor = 0
        for s in sizes:
            if s == n:
                fragments.append(pts)
            else:
                fragments.append(pts[np.sort(order[cursor : cursor + s])])
                cursor += s
    elif sum(sizes) <= n:
        cursor = 0
        for s in sizes:
            fragments.append(pts[np.sort(order[cursor : cursor + s])])
            cursor += s
    else:
        if spec.assignment == "spatial-tiles":
            raise SpecError("spatial-tiles assignment requires sizes that fit the dataset")
        for s in sizes:
            idx = rng.choice(n, size=s, replace=False)
            fragments.append(pts[np.sort(idx)])
    return [PointSet(f) for f in fragments]


# ---------------------------------------------------------------------------
# Scenario resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolvedScenario:
    config: ScenarioConfig
    dataset: PointSet
    fragments: tuple[PointSet, ...]


def resolve_scenario(cfg: ScenarioConfig, dataset: PointSet | None = None) -> ResolvedScenario:
    """Materialize a scenario: dataset, fragments, one per node profile."""
    cfg.validate()
    if dataset is None:
        if cfg.dataset.path is not None:
            dataset = PointSet.load_csv(cfg.dataset.path)
        elif cfg.dataset.shape is not None:
            seed = cfg.dataset.seed if cfg.dataset.seed is not None else cfg.seed
            dataset = generate(cfg.dataset.shape, cfg.dataset.n, seed)
        else:
            raise ConfigError("scenario has no dataset source")
    spec = cfg.partition
    if spec.k is None and spec.strategy != "explicit":
        spec = PartitionSpec(
            strategy=spec.strategy,
            k=len(cfg.profiles),
            sizes=spec.sizes,
            lo=spec.lo,
            hi=spec.hi,
            assignment=spec.assignment,
        )
    speeds = [p.speed for p in cfg.profiles]
    try:
        fragments = partition(dataset, spec, seed=cfg.seed, speeds=speeds)
    except SpecError as exc:
        raise ConfigError(str(exc)) from exc
    if len(fragments) != len(cfg.profiles):
        raise ConfigError(
            f"partition produced {len(fragments)} fragments for {len(cfg.profiles)} nodes"
        )
    return ResolvedScenario(cfg, dataset, tuple(fragments))
