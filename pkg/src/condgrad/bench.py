"""Benchmark harness: run (variant x problem x seed) grids and aggregate.

Subcommands: ``run``, ``aggregate``, ``list``. Each run writes one
trajectory file; each invocation writes one summary file plus a
solved-instances curve (cumulative solved count vs. completion time).

Trajectory format (CSV): ``# key=value`` metadata lines, then the header
``t,elapsed_ns,primal,dual_gap,step_type,active_set_size,lmo_calls`` and
one row per logged iteration. Floats are written with ``repr`` so files
round-trip losslessly. A JSON rendering of the same payload is available
via ``--format json``.

Warm-start active sets (see ``condgrad.activeset.save_active_set``) use a
plain text format: one atom per line, ``<weight> <kind> <payload>``, where
kind is ``dense`` (shape then entries), ``perm`` (permutation indices), or
``rankone`` (scale, factor sizes, factor entries).

The ``peak_mem_bytes`` column is a tracemalloc allocation-counter
estimate and is best-effort only.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
import tracemalloc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import algorithms
from .activeset import ActiveSet
from .core import TERM_GAP, ContractViolation, StopCriteria
from .lmo import supports_inface
from .problems import GENERATORS, ProblemInstance, parse_problem_id
from .stepsize import (
    AdaptiveStep,
    AgnosticStep,
    GeneralizedAgnosticStep,
    MonotonicStep,
    QuadraticExactStep,
    SecantStep,
)

TRAJECTORY_HEADER = "t,elapsed_ns,primal,dual_gap,step_type,active_set_size,lmo_calls"

VARIANTS = ("standard", "afw", "pcg", "bpcg", "dicg", "bdicg")
LAZY_CAPABLE = {"standard", "pcg", "bpcg"}
INFACE_VARIANTS = {"dicg", "bdicg"}
STEPS = ("adaptive", "secant", "monotonic", "agnostic2", "agnostic4", "log", "exact")


class UsageError(ContractViolation):
    """Bad flags or an incompatible variant/problem combination."""


@dataclass
class RunSpec:
    """One grid cell: everything needed to reproduce a single run."""

    problem_id: str
    variant: str
    step: str = "adaptive"
    epsilon: float = 1e-7
    max_time: float = 60.0
    max_iters: int = 10_000_000
    kappa: float = 2.0
    lazy: bool = False
    quad_cache: bool = False
    out_dir: str = "."
    fmt: str = "csv"

    def validate(self, instance: ProblemInstance):
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}")
        if self.step not in STEPS:
            raise UsageError(f"unknown step strategy {self.step!r}")
        if self.lazy and self.variant not in LAZY_CAPABLE:
            raise UsageError(f"variant {self.variant!r} has no lazified version")
        if self.variant in INFACE_VARIANTS and not supports_inface(instance.lmo):
            raise UsageError(
                f"variant {self.variant!r} needs an in-face oracle; "
                f"problem {self.problem_id!r} has none"
            )
        if self.step == "exact" and not instance.is_quadratic:
            raise UsageError("exact line search needs a quadratic problem")
        if self.quad_cache and not instance.is_quadratic:
            raise UsageError("--quad-cache needs a quadratic problem")
        if self.quad_cache and self.variant not in ("afw", "pcg", "bpcg"):
            raise UsageError("--quad-cache applies to active-set variants only")

    def file_stem(self) -> str:
        pid = self.problem_id
        for ch in ":,=":
            pid = pid.replace(ch, "_")
        lazy = "_lazy" if self.lazy else ""
        cache = "_qc" if self.quad_cache else ""
        return f"{pid}__{self.variant}{lazy}{cache}__{self.step}"


def _make_step_strategy(spec: RunSpec, instance: ProblemInstance):
    if spec.step == "adaptive":
        return AdaptiveStep()
    if spec.step == "secant":
        return SecantStep()
    if spec.step == "monotonic":
        return MonotonicStep()
    if spec.step == "agnostic2":
        return AgnosticStep(2)
    if spec.step == "agnostic4":
        return AgnosticStep(4)
    if spec.step == "log":
        return GeneralizedAgnosticStep()
    if spec.step == "exact":
        return QuadraticExactStep(*instance.quad)
    raise UsageError(f"unknown step strategy {spec.step!r}")


def _initial_point(spec: RunSpec, instance: ProblemInstance):
    needs_active_set = spec.variant in ("afw", "pcg", "bpcg")
    if needs_active_set and instance.x0_decomposition is not None:
        if spec.quad_cache:
            from .activeset import quad_cache_from_decomposition

            return quad_cache_from_decomposition(
                *instance.quad, instance.x0_decomposition
            )
        return ActiveSet.from_decomposition(instance.x0_decomposition)
    return instance.x0


def execute_run(spec: RunSpec) -> dict:
    """Run one grid cell and write its trajectory file. Returns the
    metadata of the run (also embedded in the file)."""
    instance = parse_problem_id(spec.problem_id)
    spec.validate(instance)
    cfg = algorithms.SolverConfig(
        step_strategy=_make_step_strategy(spec, instance),
        stop=StopCriteria(epsilon=spec.epsilon, max_iterations=spec.max_iters,
                          max_time=spec.max_time),
        kappa=spec.kappa,
        lazy=spec.lazy,
        quad=instance.quad,
        use_quad_cache=spec.quad_cache,
    )
    x0 = _initial_point(spec, instance)

    if spec.variant == "standard":
        solver = algorithms.lazy_frank_wolfe if spec.lazy else algorithms.frank_wolfe
    else:
        solver = getattr(algorithms, {
            "afw": "away_frank_wolfe", "pcg": "pairwise_cg",
            "bpcg": "blended_pairwise_cg", "dicg": "dicg", "bdicg": "bdicg",
        }[spec.variant])

    tracemalloc.start()
    t0 = time.perf_counter()
    result = solver(instance.objective, instance.lmo, x0, cfg)
    solve_time = time.perf_counter() - t0
    _, peak_mem = tracemalloc.get_traced_memory()
    tracemalloc.stop()

    metadata = {
        "problem": spec.problem_id,
        "dimension": str(instance.dimension),
        "variant": spec.variant + ("+lazy" if spec.lazy else ""),
        "step": spec.step,
        "epsilon": repr(spec.epsilon),
        "termination": result.termination,
        "primal_final": repr(result.primal_final),
        "dual_gap_final": repr(result.dual_gap_final),
        "solve_time_s": repr(solve_time),
        "lmo_calls": str(result.lmo_calls),
        "peak_mem_bytes": str(peak_mem),
    }
    rows = [
        (s.t, s.elapsed_ns, s.primal, s.dual_gap, s.step_type,
         s.active_set_size, s.lmo_calls)
        for s in result.trajectory
    ]
    path = Path(spec.out_dir) / f"{spec.file_stem()}.{spec.fmt}"
    write_trajectory(path, metadata, rows, spec.fmt)
    metadata["path"] = str(path)
    return metadata


# ---------------------------------------------------------------------------
# Trajectory I/O


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trajectory(path, metadata: dict, rows, fmt: str = "csv"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"metadata": metadata, "rows": [list(r) for r in rows]}
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return
    lines = [f"# {k}={v}" for k, v in metadata.items()]
    lines.append(TRAJECTORY_HEADER)
    for row in rows:
        lines.append(",".join(_format_cell(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def parse_trajectory(path):
    """Read a trajectory file back into ``(metadata, rows)``; rows carry
    the original numeric types."""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        rows = [tuple(r) for r in payload["rows"]]
        return dict(payload["metadata"]), rows
    metadata: dict[str, str] = {}
    rows = []
    header_seen = False
    for line in path.read_text().splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            metadata[key] = value
        elif not header_seen:
            if line != TRAJECTORY_HEADER:
                raise ValueError(f"{path}: unexpected header {line!r}")
            header_seen = True
        elif line:
            t, elapsed_ns, primal, dual_gap, tag, aset, calls = line.split(",")
            rows.append((int(t), int(elapsed_ns), float(primal), float(dual_gap),
                         tag, int(aset), int(calls)))
    if not header_seen:
        raise ValueError(f"{path}: not a trajectory file")
    return metadata, rows


# ---------------------------------------------------------------------------
# Aggregation

SUMMARY_HEADER = (
    "problem,dimension,variant,runs,solved,geo_mean_time_s,"
    "geo_mean_dual_gap,geo_std_dual_gap,mean_peak_mem_bytes"
)


def _geo_stats(values) -> tuple[float, float]:
    logs = np.log(np.maximum(np.asarray(values, dtype=np.float64), 1e-16))
    return float(np.exp(logs.mean())), float(np.exp(logs.std()))


def aggregate(files, out_dir, fmt: str = "csv") -> tuple[Path, Path]:
    """Aggregate trajectory files into a summary table and a
    solved-instances curve; re-aggregating the same inputs is
    byte-identical."""
    groups: dict[tuple, list[dict]] = {}
    per_variant_times: dict[str, list[float]] = {}
    for f in files:
        try:
            metadata, _rows = parse_trajectory(f)
            record = {
                "problem": metadata["problem"].split(":")[0],
                "dimension": int(metadata["dimension"]),
                "variant": metadata["variant"],
                "time": float(metadata["solve_time_s"]),
                "gap": float(metadata["dual_gap_final"]),
                "solved": metadata["termination"] == TERM_GAP,
                "mem": float(metadata.get("peak_mem_bytes", "0")),
            }
        except (ValueError, KeyError, OSError) as exc:
            print(f"warning: skipping {f}: {exc}", file=sys.stderr)
            continue
        key = (record["problem"], record["dimension"], record["variant"])
        groups.setdefault(key, []).append(record)
        if record["solved"]:
            per_variant_times.setdefault(record["variant"], []).append(record["time"])

    summary_rows = []
    for key in sorted(groups):
        records = groups[key]
        gm_time, _ = _geo_stats([r["time"] for r in records])
        gm_gap, gs_gap = _geo_stats([r["gap"] for r in records])
        summary_rows.append({
            "problem": key[0], "dimension": key[1], "variant": key[2],
            "runs": len(records), "solved": sum(r["solved"] for r in records),
            "geo_mean_time_s": gm_time, "geo_mean_dual_gap": gm_gap,
            "geo_std_dual_gap": gs_gap,
            "mean_peak_mem_bytes": float(np.mean([r["mem"] for r in records])),
        })
    curve_rows = []
    for variant in sorted(per_variant_times):
        for count, t in enumerate(sorted(per_variant_times[variant]), start=1):
            curve_rows.append({"variant": variant, "time_s": t, "solved": count})

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / f"summary.{fmt}"
    curve_path = out_dir / f"solved_curve.{fmt}"
    if fmt == "json":
        summary_path.write_text(json.dumps(summary_rows, indent=1, sort_keys=True) + "\n")
        curve_path.write_text(json.dumps(curve_rows, indent=1, sort_keys=True) + "\n")
    else:
        lines = [SUMMARY_HEADER]
        for r in summary_rows:
            lines.append(
                f"{r['problem']},{r['dimension']},{r['variant']},{r['runs']},"
                f"{r['solved']},{r['geo_mean_time_s']!r},{r['geo_mean_dual_gap']!r},"
                f"{r['geo_std_dual_gap']!r},{r['mean_peak_mem_bytes']!r}"
            )
        summary_path.write_text("\n".join(lines) + "\n")
        lines = ["variant,time_s,solved"]
        for r in curve_rows:
            lines.append(f"{r['variant']},{r['time_s']!r},{r['solved']}")
        curve_path.write_text("\n".join(lines) + "\n")
    return summary_path, curve_path


# ---------------------------------------------------------------------------
# CLI


def _print_registries():
    print("variants:", " ".join(VARIANTS))
    print("lazy-capable:", " ".join(sorted(LAZY_CAPABLE)))
    print("steps:", " ".join(STEPS))
    print("problems:", " ".join(sorted(GENERATORS)))


def _parse_seeds(args) -> list[Optional[int]]:
    if args.seeds:
        start, _, count = args.seeds.partition(":")
        if not count:
            raise UsageError("--seeds expects start:count")
        try:
            return list(range(int(start), int(start) + int(count)))
        except ValueError as exc:
            raise UsageError(f"bad --seeds value: {exc}") from exc
    if args.seed is not None:
        return [args.seed]
    return [None]  # keep the seed embedded in the problem id


def _with_seed(problem_id: str, seed: Optional[int]) -> str:
    if seed is None:
        return problem_id
    instance = parse_problem_id(problem_id)
    params = dict(instance.params)
    params["seed"] = seed
    name = problem_id.split(":")[0]
    return GENERATORS[name](**_canonical_kwargs(name, params)).problem_id


def _canonical_kwargs(name: str, params: dict) -> dict:
    from .problems import _PARAM_ALIASES

    alias = _PARAM_ALIASES.get(name, {})
    return {alias.get(k, k): v for k, v in params.items()}


def _load_config(path: str) -> dict:
    config = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {line!r} is not key=value")
        config[key.strip()] = value.strip()
    return config


def cmd_run(args) -> int:
    if args.list:
        _print_registries()
        return 0
    if not args.problem or not args.variant:
        raise UsageError("run needs at least one --problem and --variant")
    out_dir = args.out or os.environ.get("CONDGRAD_OUT") or "condgrad_out"
    seeds = _parse_seeds(args)
    specs = []
    for pid in args.problem:
        for variant in args.variant:
            for seed in seeds:
                spec = RunSpec(
                    problem_id=_with_seed(pid, seed),
                    variant=variant,
                    step=args.step,
                    epsilon=args.epsilon,
                    max_time=args.max_time,
                    max_iters=args.max_iters,
                    kappa=args.kappa,
                    lazy=args.lazy,
                    quad_cache=args.quad_cache,
                    out_dir=out_dir,
                    fmt=args.format,
                )
                # fail fast on incompatible combinations before launching
                spec.validate(parse_problem_id(spec.problem_id))
                specs.append(spec)
    try:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        probe = Path(out_dir) / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output dir not writable: {exc}", file=sys.stderr)
        return 3

    if args.jobs > 1 and len(specs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(execute_run, specs))
    else:
        results = [execute_run(spec) for spec in specs]
    for meta in results:
        print(
            f"{meta['problem']} {meta['variant']}/{meta['step']}: "
            f"{meta['termination']} gap={meta['dual_gap_final']} "
            f"time={float(meta['solve_time_s']):.3f}s -> {meta['path']}"
        )
    aggregate([m["path"] for m in results], out_dir, args.format)
    return 0


def cmd_aggregate(args) -> int:
    files = args.files
    if not files:
        raise UsageError("aggregate needs at least one trajectory file")
    out_dir = args.out or os.environ.get("CONDGRAD_OUT") or "."
    try:
        summary, curve = aggregate(files, out_dir, args.format)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {summary} and {curve}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condgrad",
        description="Frank-Wolfe benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a (problem x variant x seed) grid")
    run_p.add_argument("--problem", action="append", default=[],
                       help="problem id, e.g. simplex_ls:m=50,n=100,seed=1 (repeatable)")
    run_p.add_argument("--variant", action="append", default=[],
                       help=f"one of {', '.join(VARIANTS)} (repeatable)")
    run_p.add_argument("--step", default="adaptive", help=f"one of {', '.join(STEPS)}")
    run_p.add_argument("--epsilon", type=float, default=1e-7)
    run_p.add_argument("--max-time", type=float, default=60.0)
    run_p.add_argument("--max-iters", type=int, default=10_000_000)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--seeds", default=None, help="start:count")
    run_p.add_argument("--kappa", type=float, default=2.0)
    run_p.add_argument("--lazy", action="store_true")
    run_p.add_argument("--quad-cache", action="store_true",
                       help="use the product-caching active set (quadratics)")
    run_p.add_argument("--out", default=None,
                       help="output dir (default: $CONDGRAD_OUT or ./condgrad_out)")
    run_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    run_p.add_argument("--format", choices=("csv", "json"), default="csv")
    run_p.add_argument("--config", default=None, help="key=value defaults file")
    run_p.add_argument("--list", action="store_true",
                       help="print registries and exit")

    agg_p = sub.add_parser("aggregate", help="summarize trajectory files")
    agg_p.add_argument("files", nargs="*")
    agg_p.add_argument("--out", default=None)
    agg_p.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("list", help="print variant and problem registries")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            _print_registries()
            return 0
        if args.command == "run":
            if args.config:
                config = _load_config(args.config)
                for key, value in config.items():
                    key = key.replace("-", "_")
                    if not hasattr(args, key):
                        raise UsageError(f"unknown config key {key!r}")
                    default = parser.get_default(key)
                    if getattr(args, key) == default or default is None:
                        current = getattr(args, key)
                        if isinstance(current, bool):
                            setattr(args, key, value.lower() in ("1", "true", "yes"))
                        elif isinstance(current, int):
                            setattr(args, key, int(value))
                        elif isinstance(current, float):
                            setattr(args, key, float(value))
                        elif isinstance(current, list):
                            setattr(args, key, value.split())
                        else:
                            setattr(args, key, value)
            return cmd_run(args)
        if args.command == "aggregate":
            return cmd_aggregate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
