"""Dataclass configs for scenarios, node profiles, the timing cost model,
and run manifests, plus their JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum

from .geom import DEFAULT_HULL_SCALE as HULL_SCALE_DEFAULT
from .local_cluster import DbscanParams

TOOL_VERSION = "0.1.0"


class ConfigError(ValueError):
    """A scenario configuration that cannot be executed."""


class CommMode(str, Enum):
    SYNC = "sync"
    ASYNC = "async"

    @classmethod
    def parse(cls, value) -> "CommMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise ConfigError(f"comm mode must be 'sync' or 'async', got {value!r}") from exc


# Default link characteristics: agent messaging over a desktop LAN, where a
# contour message costs a sizeable fixed latency plus a per-vertex term.
DEFAULT_LINK_LATENCY_MS = 250.0
DEFAULT_LINK_BANDWIDTH = 16.0  # payload bytes per ms


# Contour payloads are coordinate pairs: vertex_count * payload_unit bytes.
@dataclass(frozen=True)
class NodeProfile:
    """Abstract machine: relative compute speed plus link characteristics."""

    node_id: str
    speed: float = 1.0
    link_latency_ms: float = DEFAULT_LINK_LATENCY_MS
    link_bandwidth: float = DEFAULT_LINK_BANDWIDTH

    def __post_init__(self):
        if not self.speed > 0:
            raise ConfigError(f"node {self.node_id}: speed must be positive")
        if not self.link_bandwidth > 0:
            raise ConfigError(f"node {self.node_id}: bandwidth must be positive")
        if self.link_latency_ms < 0:
            raise ConfigError(f"node {self.node_id}: latency must be >= 0")


# Calibration: a 10,000-point fragment on a speed-1.0 node takes
# K_CLUSTER_REF_MS of local clustering, so k_cluster = ref / 10000^2.
K_CLUSTER_REF_MS = 21270.0
K_CLUSTER_DEFAULT = K_CLUSTER_REF_MS / 10_000.0**2
K_CONTOUR_DEFAULT = 4.0e-4
K_MERGE_DEFAULT = 0.05
PAYLOAD_UNIT_DEFAULT = 16.0  # bytes per contour vertex


@dataclass(frozen=True)
class CostModel:
    """Coefficients of the simulator's timing model.

    Per node at speed s: clustering costs k_cluster * n^2 / s, contour
    extraction k_contour * c * log2(c) / s with c the clustered point count,
    and merging an incoming payload of w vertices costs
    k_merge * (w * log2(w) + p) / s where p counts edge intersections
    between the payload and the contours already held.
    """

    k_cluster: float = K_CLUSTER_DEFAULT
    k_contour: float = K_CONTOUR_DEFAULT
    k_merge: float = K_MERGE_DEFAULT
    payload_unit: float = PAYLOAD_UNIT_DEFAULT

    def __post_init__(self):
        for name in ("k_cluster", "k_contour", "k_merge", "payload_unit"):
            if getattr(self, name) < 0:
                raise ConfigError(f"cost coefficient {name} must be >= 0")

    @classmethod
    def pure_quadratic(cls) -> "CostModel":
        """Only the n^2 clustering term; contours, merging, and payload
        transfer are free (combine with zero-latency profiles for a fully
        communication-free model)."""
        return cls(k_contour=0.0, k_merge=0.0, payload_unit=0.0)


@dataclass(frozen=True)
class DatasetSpec:
    """A generator reference (shape, n, seed), a CSV path, or neither when
    the dataset is handed over in memory."""

    shape: str | None = None
    n: int | None = None
    seed: int | None = None
    path: str | None = None

    def validate(self):
        if self.shape is not None and self.path is not None:
            raise ConfigError("dataset needs at most one of 'shape' or 'path'")
        if self.shape is not None and (self.n is None or self.n <= 0):
            raise ConfigError("generated dataset needs a positive 'n'")


@dataclass(frozen=True)
class PartitionSpec:
    """How the dataset is split across nodes.

    strategy: equal | explicit | random-range | one-big-rest-small |
    seven-big-one-small | capacity-proportional.
    assignment: shuffle (uniform random subsets) or spatial-tiles
    (grid-ordered contiguous chunks).
    """

    strategy: str
    k: int | None = None
    sizes: tuple[int, ...] | None = None
    lo: int | None = None
    hi: int | None = None
    assignment: str = "shuffle"

    def validate(self):
        known = {
            "equal",
            "explicit",
            "random-range",
            "one-big-rest-small",
            "seven-big-one-small",
            "capacity-proportional",
        }
        if self.strategy not in known:
            raise ConfigError(f"unknown partition strategy {self.strategy!r}")
        if self.assignment not in ("shuffle", "spatial-tiles"):
            raise ConfigError(f"unknown assignment policy {self.assignment!r}")
        if self.strategy == "explicit":
            if not self.sizes:
                raise ConfigError("explicit partition needs 'sizes'")
        elif self.strategy == "random-range":
            if self.lo is None or self.hi is None or self.k is None:
                raise ConfigError("random-range needs lo, hi, k")
            if not (0 < self.lo <= self.hi):
                raise ConfigError("random-range needs 0 < lo <= hi")
        elif self.k is None or self.k < 1:
            raise ConfigError(f"{self.strategy} partition needs k >= 1")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything that determines one run: data, split, machines, params.

    The single ``seed`` fixes dataset generation (unless the dataset spec
    carries its own) and partitioning, so a scenario is fully replayable.
    """

    dataset: DatasetSpec
    partition: PartitionSpec
    profiles: tuple[NodeProfile, ...]
    dbscan: DbscanParams
    degree: int = 2
    comm: str = "sync"
    seed: int = 0
    hull_threshold: float | None = None
    hull_scale: float = HULL_SCALE_DEFAULT
    election: str = "fastest"
    name: str = ""

    def validate(self):
        self.dataset.validate()
        self.partition.validate()
        if not self.profiles:
            raise ConfigError("scenario needs at least one node profile")
        ids = [p.node_id for p in self.profiles]
        if len(set(ids)) != len(ids):
            raise ConfigError("node ids must be unique")
        if self.degree < 2:
            raise ConfigError("tree degree must be >= 2")
        CommMode.parse(self.comm)
        if self.hull_threshold is not None and not self.hull_threshold > 0:
            raise ConfigError("hull_threshold must be positive when set")
        if not self.hull_scale > 0:
            raise ConfigError("hull_scale must be positive")
        if self.election not in ("lowest-id", "fastest"):
            raise ConfigError(f"unknown election policy {self.election!r}")

    def to_json_dict(self) -> dict:
        out = {
            "name": self.name,
            "dataset": {k: v for k, v in asdict(self.dataset).items() if v is not None},
            "partition": {k: v for k, v in asdict(self.partition).items() if v is not None},
            "profiles": [asdict(p) for p in self.profiles],
            "dbscan": {"eps": self.dbscan.eps, "min_pts": self.dbscan.min_pts},
            "degree": self.degree,
            "comm": self.comm,
            "seed": self.seed,
            "hull_scale": self.hull_scale,
            "election": self.election,
        }
        if self.hull_threshold is not None:
            out["hull_threshold"] = self.hull_threshold
        if isinstance(out["partition"].get("sizes"),tuple):
            out["partition"]["sizes"] = list(out["partition"]["sizes"])
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScenarioConfig":
        try:
            dataset = DatasetSpec(**obj["dataset"])
            part = dict(obj["partition"])
            if "sizes" in part and part["sizes"] is not None:
                part["sizes"] = tuple(int(s) for s in part["sizes"])
            partition = PartitionSpec(**part)
            profiles = tuple(NodeProfile(**p) for p in obj["profiles"])
            db = DbscanParams(eps=float(obj["dbscan"]["eps"]), min_pts=int(obj["dbscan"]["min_pts"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc
        cfg = cls(
            dataset=dataset,
            partition=partition,
            profiles=profiles,
            dbscan=db,
            degree=int(obj.get("degree", 2)),
            comm=str(obj.get("comm", "sync")),
            seed=int(obj.get("seed", 0)),
            hull_threshold=obj.get("hull_threshold"),
            hull_scale=float(obj.get("hull_scale", HULL_SCALE_DEFAULT)),
            election=str(obj.get("election", "fastest")),
            name=str(obj.get("name", "")),
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class RunManifest:
    """Snapshot that fully determines a sim-backend run (replayable)."""

    scenario: dict
    backend: str
    comm: str
    seed: int
    outputs: dict = field(default_factory=dict)
    version: str = TOOL_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": self.version,
                "backend": self.backend,
                "comm": self.comm,
                "seed": self.seed,
                "scenario": self.scenario,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )
