"""Command line: ``mc4nls {run,preset,groundstate,report,verify}``.

Exit codes: 0 all acceptance verdicts passed, 1 some verdict failed,
2 invalid configuration or arguments, 3 numerically invalid run.
Artifacts go under ``$MC4NLS_OUTPUT_ROOT`` (default ``./runs``) unless
``--output-root`` is given.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..evolution import NumericalInvalidRun
from .checkpoint import CheckpointError
from .config import ConfigError, apply_overrides, load_config
from .presets import list_presets, preset_config
from .report import load_report
from .scenario import output_root, run_scenario, verify_run

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INVALID = 0, 1, 2, 3


def _run_one(config, root) -> tuple[str, bool, str]:
    rep = run_scenario(config, root)
    return rep.name, rep.passed, rep.summary()


def _execute(configs, root, jobs: int) -> int:
    status = EXIT_OK
    try:
        if jobs > 1 and len(configs) > 1:
            dirs = [c.output["directory"] for c in configs]
            if len(set(dirs)) != len(dirs):
                raise ConfigError("batch runs need distinct output directories", source="<batch>")
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_run_one, configs, [root] * len(configs)))
        else:
            results = [_run_one(c, root) for c in configs]
    except NumericalInvalidRun as exc:
        print(f"numerically invalid run: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for name, passed, summary in results:
        print(summary)
        if not passed:
            status = EXIT_FAILED
    return status


def cmd_run(args) -> int:
    configs = [load_config(p) for p in args.config]
    if args.set:
        configs = [apply_overrides(c, args.set) for c in configs]
    return _execute(configs, output_root(args.output_root), args.jobs)


def cmd_preset(args) -> int:
    if args.list or args.name is None:
        print("\n".join(list_presets()))
        return EXIT_OK
    try:
        config = preset_config(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return EXIT_CONFIG
    if args.overrides:
        config = apply_overrides(config, args.overrides)
    if args.print_config:
        print(config.to_ini())
        return EXIT_OK
    return _execute([config], output_root(args.output_root), 1)


def cmd_groundstate(args) -> int:
    from ..grid import make_grid, make_radial_grid
    from ..ground_state import GroundStateError, solve_ground_state
    from .checkpoint import save_checkpoint

    try:
        geo = (make_radial_grid(args.n, args.points, args.extent) if args.radial
               else make_grid(args.n, args.points, args.extent))
        Q = solve_ground_state(args.n, geo)
    except ValueError as exc:
        print(f"invalid geometry: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GroundStateError as exc:
        print(f"ground state solve failed ({exc.reason}): {exc}", file=sys.stderr)
        return EXIT_FAILED
    info = {"n": Q.n, "geometry": "radial" if args.radial else "full", "points": args.points,
            "extent": args.extent, "M_Q": Q.mass_Q, "M_star": Q.threshold_Mstar, "residual": Q.residual,
            "pohozaev": list(Q.pohozaev_residuals), "gn_ratio": Q.gn_ratio_at_Q, "iterations": Q.iterations}
    if args.save:
        save_checkpoint(Q.profile, Path(args.save))
        info["checkpoint"] = str(args.save)
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    rep = load_report(args.run_dir)
    print(rep.summary())
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_verify(args) -> int:
    results = verify_run(args.run_dir)
    bad = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        bad += not ok
    return EXIT_OK if bad == 0 else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mc4nls", description="Numerical lab for the mass-critical fourth-order NLS")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one or more INI scenario files")
    p.add_argument("config", nargs="+")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    p.add_argument("--jobs", type=int, default=1, help="run independent scenarios in parallel")
    p.add_argument("--output-root")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="run a named preset, optionally with SECTION.KEY=VALUE overrides")
    p.add_argument("name", nargs="?")
    p.add_argument("overrides", nargs="*")
    p.add_argument("--list", action="store_true")
    p.add_argument("--print-config", action="store_true", help="print the resolved INI and exit")
    p.add_argument("--output-root")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("groundstate", help="solve for the ground state Q")
    p.add_argument("n", type=int)
    p.add_argument("--points", type=int, default=1024)
    p.add_argument("--extent", type=float, default=20.0, help="half width L, or r_max with --radial")
    p.add_argument("--radial", action="store_true")
    p.add_argument("--save", help="write Q as a checkpoint")
    p.set_defaults(func=cmd_groundstate)

    p = sub.add_parser("report", help="summarise a stored run")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify", help="re-check a stored run's acceptance verdicts")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CheckpointError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
