"""Real concurrent backend: one OS process per node.

Workers run the actual clustering and contour extraction on their fragment
and exchange nothing but serialized contour payloads over message queues.
Under sync communication a real barrier separates the phases and leaders
merge each group in one batch; under async every node ships its contours
the moment it finishes and leaders fold payloads in arrival order. Wall
clock components are measured per worker around the phase boundaries.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import time
import traceback
from queue import Empty

from .config import CommMode, CostModel, ScenarioConfig
from .datasets import PointSet, resolve_scenario
from .local_cluster import build_local_model
from .merge import build_merge_tree, finalize_global, leaf_items, merge_with_provenance
from .runtime import GlobalModel, NodeTiming, TimingLedger
from . import geom

_WORKER_TIMEOUT_S = 300.0


def _serialize_items(items) -> str:
    return json.dumps(
        [{"contour": c.to_json_dict(), "prov": [list(p) for p in prov]} for c, prov in items]
    )


def _deserialize_items(text: str):
    return [
        (
            geom.Contour.from_json_dict(obj["contour"]),
            tuple((str(n), int(i)) for n, i in obj["prov"]),
        )
        for obj in json.loads(text)
    ]


def _receive_for_round(inbox, round_idx, holdback, deadline):
    """Next message of this round, buffering messages of later rounds."""
    queued = holdback.get(round_idx)
    if queued:
        return queued.pop(0)
    while True:
        timeout = deadline - time.monotonic()
        if timeout <= 0:
            raise RuntimeError("timed out waiting for a contour payload")
        msg = inbox.get(timeout=timeout)
        if msg["round"] == round_idx:
            return msg
        holdback.setdefault(msg["round"], []).append(msg)


def _worker(node_id, points, dbscan_params, hull_threshold, hull_scale, script, comm, inboxes, results, start_barrier, phase_barrier, is_root):
    try:
        start_barrier.wait(timeout=_WORKER_TIMEOUT_S)
        t0 = time.perf_counter()
        model = build_local_model(node_id, points, dbscan_params, hull_threshold, hull_scale)
        t1 = time.perf_counter()
        if phase_barrier is not None:
            phase_barrier.wait(timeout=_WORKER_TIMEOUT_S)
        t_phase2 = time.perf_counter()

        current = leaf_items(model)
        holdback: dict[int, list] = {}
        deadline = time.monotonic() + _WORKER_TIMEOUT_S
        for action in script:
            if action[0] == "send":
                _, round_idx, leader = action
                inboxes[leader].put({"round": round_idx, "sender": node_id, "items": _serialize_items(current)})
            else:  # ("lead", round_idx, member_order) with this node among members
                _, round_idx, member_order = action
                expected = len(member_order) - 1
                if comm == CommMode.SYNC.value:
                    payloads = {node_id: current}
                    for _ in range(expected):
                        msg = _receive_for_round(inboxes[node_id], round_idx, holdback, deadline)
                        payloads[msg["sender"]] = _deserialize_items(msg["items"])
                    pooled = [item for m in member_order for item in payloads[m]]
                    current = merge_with_provenance(pooled)
                else:
                    for _ in range(expected):
                        msg = _receive_for_round(inboxes[node_id], round_idx, holdback, deadline)
                        arrived = _deserialize_items(msg["items"])
                        current = merge_with_provenance(current + arrived)
        if is_root:
            current = merge_with_provenance(current)
        t_end = time.perf_counter()

        results.put(
            {
                "node_id": node_id,
                "n": model.n,
                "step1_s": t1 - t0,
                "idle_s": t_phase2 - t1,
                "step2_s": t_end - t_phase2,
                "root_items": _serialize_items(current) if is_root else None,
                "model": model.to_json(),
            }
        )
    except Exception:
        results.put({"node_id": node_id, "error": traceback.format_exc()})


def _build_scripts(tree):
    """Per node: the ordered send/lead actions it performs, bottom-up."""
    scripts = {n: [] for level in tree.levels for g in level for n in g.members}
    if not scripts:
        scripts = {tree.root: []}
    for r, level in enumerate(tree.levels):
        for group in level:
            for member in group.members:
                if member == group.leader:
                    scripts[member].append(("lead", r, group.members))
                else:
                    scripts[member].append(("send", r, group.leader))
    return scripts


def run_concurrent(
    scenario: ScenarioConfig,
    comm: CommMode | str | None = None,
    dataset: PointSet | None = None,
) -> tuple[GlobalModel, TimingLedger]:
    """Execute a scenario with real per-node worker processes.

    The ledger holds measured wall-clock milliseconds; the global model
    matches the simulator's for the same scenario (regions are identical,
    and under sync the merge fold order is identical too).
    """
    comm = CommMode.parse(comm if comm is not None else scenario.comm)
    resolved = resolve_scenario(scenario, dataset)
    profiles = list(scenario.profiles)
    speeds = {p.node_id: p.speed for p in profiles}
    tree = build_merge_tree([p.node_id for p in profiles], scenario.degree, scenario.election, speeds)
    scripts = _build_scripts(tree)

    ctx = mp.get_context("fork" if "fork" in mp.get_all_start_methods() else None)
    inboxes = {p.node_id: ctx.Queue() for p in profiles}
    results = ctx.Queue()
    start_barrier = ctx.Barrier(len(profiles))
    phase_barrier = ctx.Barrier(len(profiles)) if comm is CommMode.SYNC else None

    procs = []
    for prof, frag in zip(profiles, resolved.fragments):
        procs.append(
            ctx.Process(
                target=_worker,
                args=(
                    prof.node_id,
                    frag.points,
                    scenario.dbscan,
                    scenario.hull_threshold,
                    scenario.hull_scale,
                    scripts[prof.node_id],
                    comm.value,
                    inboxes,
                    results,
                    start_barrier,
                    phase_barrier,
                    prof.node_id == tree.root,
                ),
                daemon=True,
            )
        )
    for p in procs:
        p.start()

    reports = {}
    try:
        for _ in profiles:
            try:
                rep = results.get(timeout=_WORKER_TIMEOUT_S)
            except Empty:
                raise RuntimeError("a worker did not report back in time")
            if "error" in rep:
                raise RuntimeError(f"worker {rep['node_id']} failed:\n{rep['error']}")
            reports[rep["node_id"]] = rep
        for p in procs:
            p.join(timeout=30)
    finally:
        for p in procs:
            if p.is_alive():
                p.terminate()

    rows = []
    for prof, frag in zip(profiles, resolved.fragments):
        rep = reports[prof.node_id]
        rows.append(
            NodeTiming(
                prof.node_id,
                len(frag),
                rep["step1_s"] * 1000.0,
                rep["step2_s"] * 1000.0,
                rep["idle_s"] * 1000.0,
            )
        )
    root_items = _deserialize_items(reports[tree.root]["root_items"])
    return finalize_global(root_items), TimingLedger(tuple(rows))
