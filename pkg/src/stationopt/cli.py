"""Command-line surface.

Subcommands: ``validate`` an instance, ``build-ranges`` (writes the
operating-range cache), ``solve`` (runs the three-stage procedure and
writes the plan), and ``report`` (aggregates written plan documents).

Exit codes: 0 success, 2 validation failure, 3 abort without solution,
4 backend error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .algorithm import (
    InitialSolutionAbort,
    SmoothingError,
    StationSolver,
    complete_plan_assignment,
    compute_gap,
)
from .io import (
    SchemaError,
    load_instance,
    load_weights,
    read_report,
    regrid_instance,
    template_grid,
    write_plan,
)
from .model import build_full
from .network import validate
from .polytope import EmptyRegionError, UnboundedRegionError
from .ranges import (
    DEFAULT_SAMPLE_COUNT,
    build_spec_ranges,
    load_ranges_cache,
    save_ranges_cache,
)
from .solve import BackendError, default_settings_for, solve

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ABORT = 3
EXIT_BACKEND = 4


class _ExportingBackend:
    """Backend wrapper that also dumps every solved model as LP text."""

    def __init__(self, directory):
        from .solve import InProcessBackend

        self.inner = InProcessBackend()
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.count = 0

    def solve_raw(self, model, settings):
        path = self.directory / f"{self.count:04d}_{model.name}.lp"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(model.lp_text())
        self.count += 1
        return self.inner.solve_raw(model, settings)


def _load_checked(path: str):
    spec, scen = load_instance(path)
    issues = validate(spec, scen)
    return spec, scen, issues


def cmd_validate(args) -> int:
    try:
        spec, scen, issues = _load_checked(args.instance)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if issues:
        for violation in issues:
            print(violation, file=sys.stderr)
        print(f"{len(issues)} violation(s) found", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"instance {spec.name!r} is well formed "
          f"({len(spec.nodes)} nodes, {len(spec.arcs())} arcs, "
          f"{len(spec.operation_modes)} operation modes)")
    return EXIT_OK


def _ranges_cache_path(instance_path: str, explicit) -> Path:
    if explicit:
        return Path(explicit)
    return Path(instance_path).with_suffix(".ranges.json")


def _build_or_load_ranges(spec, instance_path, samples, seed, cache_path):
    if cache_path.exists():
        cached = load_ranges_cache(cache_path, spec, samples, seed)
        if cached is not None:
            return cached, False
    spec = build_spec_ranges(spec, count=samples, base_seed=seed)
    save_ranges_cache(cache_path, spec, samples, seed)
    return spec, True


def cmd_build_ranges(args) -> int:
    try:
        spec, scen, issues = _load_checked(args.instance)
        if issues:
            for violation in issues:
                print(violation, file=sys.stderr)
            return EXIT_VALIDATION
        cache_path = _ranges_cache_path(args.instance, args.out)
        spec, built = _build_or_load_ranges(spec, args.instance, args.samples, args.seed, cache_path)
    except (SchemaError, EmptyRegionError, UnboundedRegionError) as exc:
        print(f"operating-range construction failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    n = sum(len(st.configurations) for st in spec.stations.values())
    verb = "built" if built else "reused"
    print(f"{verb} operating ranges for {n} configuration(s) -> {cache_path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    started = time.perf_counter()
    try:
        spec, scen, issues = _load_checked(args.instance)
        if issues:
            for violation in issues:
                print(violation, file=sys.stderr)
            return EXIT_VALIDATION
        weights = load_weights(args.instance)
        if args.steps is not None:
            spec, scen = regrid_instance(spec, scen, template_grid(args.steps))
        cache_path = _ranges_cache_path(args.instance, None)
        spec, _ = _build_or_load_ranges(spec, args.instance, args.samples, args.seed, cache_path)
    except (SchemaError, EmptyRegionError, UnboundedRegionError, ValueError) as exc:
        print(f"cannot prepare the instance: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    backend = _ExportingBackend(args.export_lp) if args.export_lp else None
    solver = StationSolver(spec, scen, weights, backend=backend)
    try:
        plan = solver.solve_station(h=args.h)
    except InitialSolutionAbort as exc:
        print(f"aborted without a solution: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (SmoothingError, BackendError) as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND

    extra = {}
    if args.lower_bound:
        inst = build_full(spec, scen, weights)
        _, warm = complete_plan_assignment(spec, scen, weights, plan)
        res = solve(inst, default_settings_for("P", args.lb_time_limit), initial=warm, backend=backend)
        if res.status in ("error",):
            print(f"lower-bound solve failed: {res.message}", file=sys.stderr)
            return EXIT_BACKEND
        # zero is always a valid bound for the nonnegative objective, so a
        # run that timed out without a dual bound still reports a gap <= 1
        bound = max(0.0, res.bound) if res.bound > -float("inf") else 0.0
        extra["lowerBound"] = bound
        extra["lowerBoundStatus"] = res.status
        extra["gap"] = compute_gap(plan.objective, bound)

    prefix = args.out or str(Path(args.instance).with_suffix(""))
    if args.steps is not None:
        prefix = f"{prefix}.{args.steps}steps"
    json_path, csv_path = write_plan(prefix, spec, scen, plan, extra)
    wall = time.perf_counter() - started
    print(f"plan written to {json_path} and {csv_path}")
    from itertools import groupby

    phases = " -> ".join(mode for mode, _ in groupby(plan.sequence.modes))
    print(
        f"objective {plan.objective:.3f}, modes {phases}"
        + (f", gap {extra['gap']:.4f}" if "gap" in extra else "")
        + f", wall {wall:.2f}s"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [read_report(p) for p in args.results]
    header = f"{'instance':<14} {'status':<8} {'objective':>12} {'gap':>8} {'wall s':>8}  phase shares (init/improve/smooth)"
    print(header)
    print("-" * len(header))
    for r in sorted(reports, key=lambda r: r["instance"]):
        gap = f"{r['gap']:.4f}" if r.get("gap") is not None else "-"
        wall = f"{r['wallTime']:.2f}" if r.get("wallTime") is not None else "-"
        shares = r.get("phaseShares", {})
        share_text = "/".join(
            f"{shares.get(k, 0.0):.2f}" for k in ("initial", "improvement", "smoothing")
        )
        print(
            f"{r['instance']:<14} {r['status']:<8} {r['objective']:>12.2f} {gap:>8} {wall:>8}  {share_text}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stationopt",
        description="Transient gas-flow control for pipeline network stations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance document")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-ranges", help="build and cache configuration operating ranges")
    p.add_argument("instance")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="cache path (default: <instance>.ranges.json)")
    p.set_defaults(func=cmd_build_ranges)

    p = sub.add_parser("solve", help="run the three-stage control algorithm")
    p.add_argument("instance")
    p.add_argument("--steps", choices=["12", "24", "48", "96"], default=None,
                   help="re-grid the scenario onto a named 12 h partition")
    p.add_argument("--h", type=int, default=4, help="rolling-horizon window (future steps)")
    p.add_argument("--lower-bound", action="store_true",
                   help="also solve the full model for a lower bound and report the gap")
    p.add_argument("--lb-time-limit", type=float, default=600.0)
    p.add_argument("--export-lp", help="directory for LP exports of every solved model")
    p.add_argument("--seed", type=int, default=0, help="seed for operating-range sampling")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLE_COUNT)
    p.add_argument("--out", help="output prefix (default: instance path without suffix)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("report", help="aggregate written plan documents")
    p.add_argument("results", nargs="+")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
