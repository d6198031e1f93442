"""Virtual-clock execution of the two-phase pipeline.

The simulator runs the real clustering and merging operations to obtain the
actual contours, then prices every step with a calibrated cost model and
plays the message timeline on a deterministic discrete-event clock. Two
communication semantics are supported:

* sync: a global barrier separates the phases; nobody sends a contour
  before the slowest node finishes its local clustering, and a leader
  merges its group's payloads in one batch once all have arrived.
* async: every node sends the moment it finishes, and leaders fold
  payloads into their running result in arrival order, overlapping the
  two phases.

Both modes execute the identical merge plan, so they produce the identical
global model; only the ledger differs.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field

from .config import CommMode, ConfigError, CostModel, NodeProfile, ScenarioConfig
from .datasets import PointSet, resolve_scenario
from .local_cluster import build_local_model
from .merge import (
    GlobalModel,
    MergeTree,
    Provenance,
    build_merge_tree,
    finalize_global,
    leaf_items,
    merge_with_provenance,
)
from . import geom


@dataclass(frozen=True)
class NodeTiming:
    node_id: str
    ds_size: int
    step1_ms: float
    step2_ms: float
    idle_ms: float

    @property
    def total_ms(self) -> float:
        return self.step1_ms + self.idle_ms + self.step2_ms


@dataclass(frozen=True, eq=False)
class TimingLedger:
    rows: tuple[NodeTiming, ...]

    @property
    def total_exec_ms(self) -> float:
        return max(r.total_ms for r in self.rows)

    def row(self, node_id: str) -> NodeTiming:
        for r in self.rows:
            if r.node_id == node_id:
                return r
        raise KeyError(node_id)

    def to_csv(self) -> str:
        lines = ["node_id,ds_size,step1_ms,step2_ms,idle_ms,total_ms"]
        for r in self.rows:
            lines.append(
                f"{r.node_id},{r.ds_size},{r.step1_ms:.3f},{r.step2_ms:.3f},"
                f"{r.idle_ms:.3f},{r.total_ms:.3f}"
            )
        lines.append(f"total_exec_ms,,,,,{self.total_exec_ms:.3f}")
        return "\n".join(lines) + "\n"


def _xlog2(w: float) -> float:
    return w * math.log2(w) if w > 1 else 0.0


# ---------------------------------------------------------------------------
# Canonical merge plan: real contours, vertex counts, intersection counts
# ---------------------------------------------------------------------------


@dataclass
class _GroupPlan:
    round_idx: int
    leader: str
    senders: tuple[str, ...]
    send_w: dict  # sender -> payload vertex count
    pair_p: dict  # frozenset({a, b}) -> edge intersection count


def _set_vertex_count(items) -> int:
    return sum(c.vertex_count for c, _ in items)


def _pair_intersections(items_a, items_b) -> int:
    total = 0
    for ca, _ in items_a:
        for cb, _ in items_b:
            total += geom.boundary_intersection_count(ca, cb)
    return total


def _plan_rounds(tree: MergeTree, models: dict):
    """Precompute, per round and group, the payload sizes, the pairwise
    intersection counts used for pricing, and the canonical merged sets."""
    sets: dict[str, list] = {nid: leaf_items(m) for nid, m in models.items()}
    rounds: list[list[_GroupPlan]] = []
    for r, level in enumerate(tree.levels):
        plans = []
        for group in level:
            senders = tuple(m for m in group.members if m != group.leader)
            send_w = {m: _set_vertex_count(sets[m]) for m in senders}
            pair_p = {}
            for i, a in enumerate(group.members):
                for b in group.members[i + 1 :]:
                    pair_p[frozenset((a, b))] = _pair_intersections(sets[a], sets[b])
            plans.append(_GroupPlan(r, group.leader, senders, send_w, pair_p))
            sets[group.leader] = merge_with_provenance(
                [item for m in group.members for item in sets[m]]
            )
        rounds.append(plans)
    root_items = merge_with_provenance(sets[tree.root])
    return rounds, root_items


# ---------------------------------------------------------------------------
# Discrete-event schedule
# ---------------------------------------------------------------------------


@dataclass
class _LeaderState:
    plan: _GroupPlan
    speed: float
    base: float | None = None  # leader's own set availability
    arrived: list = field(default_factory=list)
    pending: deque = field(default_factory=deque)
    present: list = field(default_factory=list)
    processed: int = 0
    active: bool = False
    busy_until: float = 0.0


def _transfer_ms(profile: NodeProfile, w: int, cost: CostModel) -> float:
    return profile.link_latency_ms + w * cost.payload_unit / profile.link_bandwidth


class _Schedule:
    def __init__(self, tree, rounds, step1, profiles, comm, cost):
        self.tree = tree
        self.rounds = rounds
        self.step1 = step1
        self.profiles = profiles
        self.comm = comm
        self.cost = cost
        self.rank = {nid: i for i, nid in enumerate(profiles)}
        self.barrier = max(step1.values())
        self.heap: list = []
        self.seq = itertools.count()
        self.last_activity = dict(step1)
        self.states = {}
        self.role = {}  # (round, node) -> ("send", leader) | ("lead", state)
        for r, plans in enumerate(rounds):
            for plan in plans:
                st = _LeaderState(plan, profiles[plan.leader].speed)
                st.present = [plan.leader]
                self.states[(r, plan.leader)] = st
                self.role[(r, plan.leader)] = ("lead", st)
                for s in plan.senders:
                    self.role[(r, s)] = ("send", plan)

    def push(self, t, node, kind, data):
        heapq.heappush(self.heap, (t, self.rank[node], next(self.seq), kind, node, data))

    def node_ready(self, node, r, t):
        if r >= len(self.rounds):
            self.last_activity[node] = t  # root finished the final round
            return
        kind, obj = self.role[(r, node)]
        if kind == "send":
            depart = t
            if r == 0 and self.comm is CommMode.SYNC:
                depart = self.barrier
            w = obj.send_w[node]
            arrival = depart + _transfer_ms(self.profiles[node], w, self.cost)
            self.last_activity[node] = arrival
            self.push(arrival, obj.leader, "arrival", (r, node, w))
        else:
            st = obj
            st.base = t
            st.busy_until = max(st.busy_until, t)
            if not st.plan.senders:
                self.complete(st, r, t)
            elif self.comm is CommMode.SYNC:
                self.try_batch(st, r)
            else:
                self.try_dispatch(st, r)

    def try_batch(self, st, r):
        if st.base is None or len(st.arrived) < len(st.plan.senders):
            return
        start = max(st.base, max(a[0] for a in st.arrived))
        work = sum(_xlog2(w) for _, _, w in st.arrived)
        work += sum(st.plan.pair_p.values())
        done = start + self.cost.k_merge * work / st.speed
        self.last_activity[st.plan.leader] = done
        self.complete(st, r, done)

    def try_dispatch(self, st, r):
        if st.active or st.base is None or not st.pending:
            return
        arr_t, sender, w = st.pending.popleft()
        start = max(st.busy_until, st.base, arr_t)
        p = sum(st.plan.pair_p.get(frozenset((sender, m)), 0) for m in st.present)
        st.present.append(sender)
        st.active = True
        st.busy_until = start + self.cost.k_merge * (_xlog2(w) + p) / st.speed
        self.push(st.busy_until, st.plan.leader, "fold-done", r)

    def complete(self, st, r, t):
        self.node_ready(st.plan.leader, r + 1, t)

    def run(self):
        for node, t in self.step1.items():
            self.node_ready(node, 0, t)
        while self.heap:
            t, _, _, kind, node, data = heapq.heappop(self.heap)
            if kind == "arrival":
                r, sender, w = data
                st = self.states[(r, node)]
                st.arrived.append((t, sender, w))
                if self.comm is CommMode.SYNC:
                    self.try_batch(st, r)
                else:
                    st.pending.append((t, sender, w))
                    self.try_dispatch(st, r)
            else:  # fold-done
                r = data
                st = self.states[(r, node)]
                st.active = False
                st.processed += 1
                self.last_activity[node] = t
                if st.processed == len(st.plan.senders):
                    self.complete(st, r, t)
                else:
                    self.try_dispatch(st, r)


def simulate(
    scenario: ScenarioConfig,
    comm: CommMode | str | None = None,
    cost: CostModel | None = None,
    dataset: PointSet | None = None,
) -> tuple[GlobalModel, TimingLedger]:
    """Execute a scenario on the virtual clock; returns the global model and
    the per-node timing ledger. Deterministic: identical inputs produce an
    identical ledger, and the model does not depend on the comm mode."""
    comm = CommMode.parse(comm if comm is not None else scenario.comm)
    cost = cost if cost is not None else CostModel()
    resolved = resolve_scenario(scenario, dataset)
    profiles = {p.node_id: p for p in scenario.profiles}

    models = {}
    step1 = {}
    for prof, frag in zip(scenario.profiles, resolved.fragments):
        model = build_local_model(
            prof.node_id, frag, scenario.dbscan, scenario.hull_threshold, scenario.hull_scale
        )
        models[prof.node_id] = model
        clustered = model.n - model.noise_count
        step1[prof.node_id] = (
            cost.k_cluster * model.n**2 + cost.k_contour * _xlog2(clustered)
        ) / prof.speed

    speeds = {nid: p.speed for nid, p in profiles.items()}
    tree = build_merge_tree(list(profiles), scenario.degree, scenario.election, speeds)
    rounds, root_items = _plan_rounds(tree, models)

    sched = _Schedule(tree, rounds, step1, profiles, comm, cost)
    sched.run()

    rows = []
    for prof, frag in zip(scenario.profiles, resolved.fragments):
        nid = prof.node_id
        s1 = step1[nid]
        idle = sched.barrier - s1 if comm is CommMode.SYNC and len(profiles) > 1 else 0.0
        step2 = sched.last_activity[nid] - s1 - idle
        rows.append(NodeTiming(nid, len(frag), s1, step2, idle))
    ledger = TimingLedger(tuple(rows))
    return finalize_global(root_items), ledger


def local_models(
    scenario: ScenarioConfig, dataset: PointSet | None = None
) -> list:
    """Phase-1 results for every node of a scenario (no timing)."""
    resolved = resolve_scenario(scenario, dataset)
    return [
        build_local_model(
            prof.node_id, frag, scenario.dbscan, scenario.hull_threshold, scenario.hull_scale
        )
        for prof, frag in zip(scenario.profiles, resolved.fragments)
    ]
