"""Command-line front end.

Subcommands ``optimize``, ``simulate``, ``baseline`` and ``validate`` share
the global flags.  Exit codes: 0 success, 1 invalid input, 2 no feasible or
infeasible scheme, 3 internal error, 64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .export import (
    read_scheme,
    skeleton_dot,
    write_history,
    write_manifest,
    write_profile,
    write_scheme,
    write_stages,
    write_timeline,
)
from .grid_model import GridError, GridModel, load_grid
from .optimize import GaConfig, NoFeasibleScheme, dijkstra_baseline, mpga_optimize, resolve_sources
from .simulate import InfeasibleScheme, SchemeError, simulate

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--grid", required=True, help="grid JSON file")
    common.add_argument("--out", default="run", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed; drawn and recorded when omitted")
    common.add_argument("--time-step", type=float, default=None, help="simulation step in minutes")
    common.add_argument("--scr-floor", type=float, default=None, help="minimum short-circuit ratio (>= 3)")
    common.add_argument("--generations", type=int, default=None, help="GA generations")
    common.add_argument("--subpops", type=int, default=None, help="GA subpopulations")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")

    parser = _Parser(prog="blackstart", description="Black-start restoration path planning with an LCC-HVDC infeed.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("optimize", parents=[common], help="search for the best restoration scheme")
    p = sub.add_parser("simulate", parents=[common], help="simulate a scheme file")
    p.add_argument("--scheme", required=True, help="scheme JSON file")
    p = sub.add_parser("baseline", parents=[common], help="shortest-path tree scheme for a source order")
    p.add_argument("--order", required=True, help="comma-separated generator ids and the HVDC node id")
    p.add_argument("--against", default=None, help="scheme JSON to compare with")
    p = sub.add_parser("validate", parents=[common], help="check a grid file and optionally a scheme")
    p.add_argument("--scheme", default=None, help="scheme JSON file")
    return parser


def _apply_overrides(model: GridModel, args) -> GridModel:
    if args.time_step is not None:
        if args.time_step <= 0:
            raise GridError("--time-step must be positive")
        model = dataclasses.replace(model, params=dataclasses.replace(model.params, time_step=args.time_step))
    if args.scr_floor is not None:
        if args.scr_floor < 3:
            raise GridError("--scr-floor must be at least 3")
        if model.hvdc is None:
            raise GridError("--scr-floor given but the grid has no HVDC terminal")
        model = dataclasses.replace(model, hvdc=dataclasses.replace(model.hvdc, scr_floor=args.scr_floor))
    return model


def _overrides(args) -> dict:
    keys = ("time_step", "scr_floor", "generations", "subpops")
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BLACKSTART_THREADS", "1")))
    except ValueError:
        return 1


def _write_run(out: Path, model, timeline, fmt: str, history=None) -> list[str]:
    ext = "json" if fmt == "json" else "csv"
    files = []
    write_scheme(out / "scheme.json", timeline.scheme)
    files.append("scheme.json")
    write_timeline(out / f"timeline.{ext}", timeline, fmt)
    files.append(f"timeline.{ext}")
    write_stages(out / f"stages.{ext}", model, timeline, fmt)
    files.append(f"stages.{ext}")
    write_profile(out / "dc_profile.csv", timeline)
    files.append("dc_profile.csv")
    if history is not None:
        write_history(out / f"history.{ext}", history, fmt)
        files.append(f"history.{ext}")
    (out / "skeleton.dot").write_text(skeleton_dot(model, timeline))
    files.append("skeleton.dot")
    return files


def _summary(timeline) -> str:
    start = "never" if timeline.hvdc_start is None else f"{timeline.hvdc_start:.0f} min"
    return (
        f"F = {timeline.objective:.2f} MW  T = {timeline.total_time:.0f} min  "
        f"HVDC start = {start}  final P_D = {timeline.final_p_d:.2f} MW"
    )


def _manifest(args, out: Path, files, seed, started: float) -> None:
    write_manifest(
        out / "manifest.json",
        {
            "scenario": str(args.grid),
            "command": args.command,
            "overrides": _overrides(args),
            "rng_seed": seed,
            "output_dir": str(out),
            "version": __version__,
            "duration_s": round(time.perf_counter() - started, 3),
            "files": files,
        },
    )


def cmd_optimize(args, model: GridModel, started: float) -> int:
    seed = args.seed if args.seed is not None else int(np.random.SeedSequence().entropy % 2**31)
    kw = {"rng_seed": seed, "workers": _workers()}
    if args.generations is not None:
        kw["max_generations"] = args.generations
    if args.subpops is not None:
        kw["subpopulations"] = args.subpops
    scheme, timeline, history = mpga_optimize(model, GaConfig(**kw))
    out = Path(args.out)
    files = _write_run(out, model, timeline, args.format, history)
    _manifest(args, out, files, seed, started)
    print(_summary(timeline))
    return EXIT_OK


def cmd_simulate(args, model: GridModel, started: float) -> int:
    scheme = read_scheme(args.scheme)
    out = Path(args.out)
    try:
        timeline = simulate(model, scheme)
    except InfeasibleScheme as exc:
        if exc.timeline is not None:
            files = _write_run(out, model, exc.timeline, args.format)
            _manifest(args, out, files, None, started)
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    files = _write_run(out, model, timeline, args.format)
    _manifest(args, out, files, None, started)
    print("feasible")
    print(_summary(timeline))
    return EXIT_OK


def _parse_order(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", ",").split(",") if x]
    except ValueError:
        raise GridError(f"--order must be a comma-separated list of ids, got {text!r}") from None


def cmd_baseline(args, model: GridModel, started: float) -> int:
    try:
        scheme = dijkstra_baseline(model, resolve_sources(model, _parse_order(args.order)))
    except ValueError as exc:
        if isinstance(exc, GridError):
            raise
        raise GridError(str(exc)) from exc
    timeline = simulate(model, scheme)
    out = Path(args.out)
    files = _write_run(out, model, timeline, args.format)
    _manifest(args, out, files, None, started)
    print(_summary(timeline))
    if args.against:
        other = simulate(model, read_scheme(args.against))
        print(f"against {args.against}: {_summary(other)}")
        print(
            f"delta (baseline - other): F {timeline.objective - other.objective:+.2f} MW  "
            f"T {timeline.total_time - other.total_time:+.0f} min  "
            f"final P_D {timeline.final_p_d - other.final_p_d:+.2f} MW"
        )
    return EXIT_OK


def cmd_validate(args, model: GridModel, started: float) -> int:
    print(f"grid ok: {len(model.nodes)} nodes, {len(model.branches)} branches, {len(model.generators)} generators")
    if args.scheme:
        timeline = simulate(model, read_scheme(args.scheme), power_flow=False, raise_on_infeasible=False)
        if not timeline.complete:
            print("scheme does not reach every source")
            return EXIT_INFEASIBLE
        print(f"scheme ok: {len(timeline.scheme.order)} branches")
    return EXIT_OK


COMMANDS = {"optimize": cmd_optimize, "simulate": cmd_simulate, "baseline": cmd_baseline, "validate": cmd_validate}


def main(argv=None) -> int:
    started = time.perf_counter()
    try:
        args = _build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        model = _apply_overrides(load_grid(args.grid), args)
        return COMMANDS[args.command](args, model, started)
    except (GridError, SchemeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NoFeasibleScheme, InfeasibleScheme) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
