"""Command-line front end: dataset generation, scenario execution on either
backend, experiment presets, and scalability sweeps.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import presets
from .config import (
    CommMode,
    ConfigError,
    CostModel,
    RunManifest,
    ScenarioConfig,
    TOOL_VERSION,
)
from .datasets import PointSet, SpecError, UnknownShape, generate
from .local_cluster import NOISE
from .metrics import exchange_ratio, scalability_sweep, speedup
from .parallel import run_concurrent
from .runtime import local_models, simulate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddc",
        description="Distributed spatial clustering: local DBSCAN + contour merging.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset as CSV")
    gen.add_argument("shape", help="shape name, e.g. d1-like, d2-like, ring, crescent")
    gen.add_argument("--n", type=int, default=None, help="number of points")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--out", required=True, help="output CSV path")

    run = sub.add_parser("run", help="execute a scenario and write reports")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(presets.EXPERIMENT_PRESETS) + ["speedup"])
    src.add_argument("--config", help="scenario config JSON (or a run manifest)")
    run.add_argument("--backend", choices=["sim", "concurrent"], default="sim")
    run.add_argument("--comm", choices=["sync", "async"], default=None)
    run.add_argument("--degree", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("-o", "--out", required=True, help="output directory")

    sweep = sub.add_parser("sweep", help="scalability sweep over node counts")
    ssrc = sweep.add_mutually_exclusive_group(required=True)
    ssrc.add_argument("--preset", choices=sorted(presets.SWEEP_PRESETS))
    ssrc.add_argument("--dataset", help="shape name or CSV path")
    sweep.add_argument("--n", type=int, default=None, help="points when generating")
    sweep.add_argument(
        "--nodes", default="1,2,4,8,16,32,64", help="comma-separated node counts"
    )
    sweep.add_argument("--comm", choices=["sync", "async"], default="sync")
    sweep.add_argument("--eps", type=float, default=None)
    sweep.add_argument("--min-pts", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("-o", "--out", required=True, help="output CSV path")
    return parser


def cmd_generate(args) -> int:
    ds = generate(args.shape, args.n, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    ds.save_csv(args.out, header=True)
    print(f"wrote {len(ds)} points to {args.out}")
    return EXIT_OK


def _load_config(path: str) -> tuple[ScenarioConfig, dict]:
    """Accepts a scenario config JSON or a run manifest wrapping one."""
    with open(path) as fh:
        obj = json.load(fh)
    overrides = {}
    if "scenario" in obj:
        overrides = {k: obj[k] for k in ("backend", "comm", "seed") if k in obj}
        obj = obj["scenario"]
    return ScenarioConfig.from_json_dict(obj), overrides


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.comm is not None:
        changes["comm"] = args.comm
    if args.degree is not None:
        changes["degree"] = args.degree
    if args.seed is not None and args.config is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
        cfg.validate()
    return cfg


def _execute(cfg: ScenarioConfig, backend: str):
    if backend == "concurrent":
        return run_concurrent(cfg)
    return simulate(cfg)


def _run_metrics(cfg: ScenarioConfig, gm, ledger, backend: str) -> dict:
    models = local_models(cfg)
    labels_noise = sum(m.noise_count for m in models)
    return {
        "name": cfg.name,
        "backend": backend,
        "comm": cfg.comm,
        "degree": cfg.degree,
        "seed": cfg.seed,
        "nodes": len(cfg.profiles),
        "points_held": sum(m.n for m in models),
        "local_noise_points": labels_noise,
        "global_clusters": len(gm.clusters),
        "exchange_ratio": exchange_ratio(models),
        "total_exec_ms": ledger.total_exec_ms,
    }


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.preset == "speedup":
        return _run_speedup(args, out_dir)

    if args.preset is not None:
        builder = presets.EXPERIMENT_PRESETS[args.preset]
        cfg = builder(args.seed) if args.seed is not None else builder()
    else:
        cfg, manifest_overrides = _load_config(args.config)
        if args.backend == "sim" and manifest_overrides.get("backend"):
            args.backend = manifest_overrides["backend"]
        if args.comm is None and manifest_overrides.get("comm"):
            args.comm = manifest_overrides["comm"]
    cfg = _apply_overrides(cfg, args)

    gm, ledger = _execute(cfg, args.backend)
    report = _run_metrics(cfg, gm, ledger, args.backend)

    (out_dir / "ledger.csv").write_text(ledger.to_csv())
    (out_dir / "global.json").write_text(gm.to_json())
    (out_dir / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    manifest = RunManifest(
        scenario=cfg.to_json_dict(),
        backend=args.backend,
        comm=cfg.comm,
        seed=cfg.seed,
        outputs={
            "ledger": "ledger.csv",
            "global_model": "global.json",
            "metrics": "metrics.json",
        },
    )
    (out_dir / "manifest.json").write_text(manifest.to_json())
    print(f"{cfg.name or 'scenario'}: total_exec_ms={ledger.total_exec_ms:.1f} -> {out_dir}")
    return EXIT_OK


def _run_speedup(args, out_dir: Path) -> int:
    seed = args.seed if args.seed is not None else presets.DEFAULT_SEED
    base = presets.speedup_baseline(seed)
    ddc_cfg = presets.experiment_iv(seed)
    ddc_cfg = _apply_overrides(ddc_cfg, args)

    _, base_ledger = _execute(base, args.backend)
    gm, ledger = _execute(ddc_cfg, args.backend)
    p = len(ddc_cfg.profiles)
    rep = speedup(base_ledger.total_exec_ms, ledger.total_exec_ms, p)

    cost = CostModel()
    fastest = max(pr.speed for pr in base.profiles)
    partition_n = (ddc_cfg.dataset.n or 0) // p
    report = _run_metrics(ddc_cfg, gm, ledger, args.backend)
    report.update(
        {
            "t1_ms": rep.t1_ms,
            "tp_ms": rep.tp_ms,
            "p": rep.p,
            "alpha": rep.alpha,
            "super_linear": rep.super_linear,
            # modeled sequential time of a single partition on the fastest
            # machine; auxiliary, not used in alpha
            "t1_partition_ms": cost.k_cluster * partition_n**2 / fastest,
        }
    )

    (out_dir / "baseline_ledger.csv").write_text(base_ledger.to_csv())
    (out_dir / "ledger.csv").write_text(ledger.to_csv())
    (out_dir / "global.json").write_text(gm.to_json())
    (out_dir / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    manifest = RunManifest(
        scenario=ddc_cfg.to_json_dict(),
        backend=args.backend,
        comm=ddc_cfg.comm,
        seed=seed,
        outputs={
            "ledger": "ledger.csv",
            "baseline_ledger": "baseline_ledger.csv",
            "global_model": "global.json",
            "metrics": "metrics.json",
        },
    )
    (out_dir / "manifest.json").write_text(manifest.to_json())
    print(f"speedup: alpha={rep.alpha:.2f} (T1={rep.t1_ms:.0f}ms, Tp={rep.tp_ms:.0f}ms, p={p})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.preset is not None:
        shape, n, counts = presets.SWEEP_PRESETS[args.preset]
        ds = generate(shape, n, args.seed)
        params = presets.SCENE_PARAMS[shape]
    else:
        counts = tuple(int(x) for x in args.nodes.split(",") if x.strip())
        if Path(args.dataset).exists():
            ds = PointSet.load_csv(args.dataset)
            params = presets.SCENE_PARAMS.get(args.dataset)
        else:
            ds = generate(args.dataset, args.n, args.seed)
            params = presets.SCENE_PARAMS.get(args.dataset)
        if args.eps is not None and args.min_pts is not None:
            from .local_cluster import DbscanParams

            params = DbscanParams(args.eps, args.min_pts)
        if params is None:
            raise ConfigError("this dataset needs explicit --eps and --min-pts")

    sweep = scalability_sweep(ds, counts, comm=args.comm, dbscan_params=params, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(sweep.to_csv())
    print(f"sweep: optimal m = {sweep.optimal_m} -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, SpecError, UnknownShape, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
