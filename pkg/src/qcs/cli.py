"""Command-line driver.

    qcs eval SCENARIO.json
    qcs simulate SCENARIO.json
    qcs figure {fig3,fig4a,...}
    qcs sweep SWEEP.json

Exit codes: 0 success, 2 invalid input, 3 overloaded scenario.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import dessim
from .errors import InvalidConfig, Overloaded, QCSError
from .experiments import (
    FIGURES,
    METHODS,
    ROW_COLUMNS,
    RunOptions,
    default_workers,
    run_sweep,
    scenario_row,
    write_csv,
)
from .model import load_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_OVERLOADED = 3


def _add_common(p: argparse.ArgumentParser, samples: int) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--samples", type=int, default=samples,
                   help=f"Monte Carlo draws per window problem (default {samples})")
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--measured", type=int, default=10_000,
                   help="measured requests per replication")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcs", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="analyse one scenario")
    p.add_argument("scenario")
    p.add_argument("--method", choices=METHODS, default="auto")
    _add_common(p, 100_000)

    p = sub.add_parser("simulate", help="discrete-event simulation of one scenario")
    p.add_argument("scenario")
    p.add_argument("--warmup", type=int, default=None)
    _add_common(p, 100_000)

    p = sub.add_parser("figure", help="emit the data grid behind a figure")
    p.add_argument("name", choices=sorted(FIGURES))
    _add_common(p, 10_000)

    p = sub.add_parser("sweep", help="Cartesian parameter sweep")
    p.add_argument("spec", help='JSON: {"base": {...}, "axes": {...}, "method": ..., "seed": ..., "out": ...}')
    p.add_argument("--method", choices=METHODS, default=None)
    _add_common(p, 100_000)
    return parser


def _options(args, method: str = "auto") -> RunOptions:
    return RunOptions(
        samples=args.samples,
        seed=args.seed,
        method=method,
        replications=args.replications,
        measured=args.measured,
        workers=default_workers(),
    )


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_eval(args) -> int:
    sc = load_scenario(args.scenario)
    row = scenario_row(sc, _options(args, args.method))
    _emit(write_csv([row], ROW_COLUMNS), args.out)
    return EXIT_OVERLOADED if row["error"] == "overloaded" else EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    cfg = dessim.SimConfig(
        sc,
        measured_requests=args.measured,
        replications=args.replications,
        master_seed=args.seed,
        warmup_requests=args.warmup,
        workers=default_workers(),
    )
    try:
        report = dessim.run(cfg)
    except Overloaded as exc:
        print(f"error: {exc}", file=sys.stderr)
        _emit(json.dumps({"error": "overloaded", "rho": exc.rho}) + "\n", args.out)
        return EXIT_OVERLOADED
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_figure(args) -> int:
    columns, rows = FIGURES[args.name](_options(args))
    _emit(write_csv(rows, columns), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    if not isinstance(spec, dict) or "base" not in spec:
        raise InvalidConfig('sweep spec needs a "base" scenario')
    opts = _options(args, args.method or spec.get("method", "auto"))
    if "seed" in spec and args.seed == 0:
        opts.seed = int(spec["seed"])
    rows = run_sweep(spec["base"], spec.get("axes", {}), opts)
    _emit(write_csv(rows, ROW_COLUMNS), args.out or spec.get("out"))
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "simulate": cmd_simulate, "figure": cmd_figure, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (QCSError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
