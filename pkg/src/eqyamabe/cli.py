from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError
from .runner import EXIT_CONFIG, EXIT_OK, run
from .scenarios import list_scenarios, resolve


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eqyamabe",
        description="Green's-function blow-ups, level-set monotonicity and Rayleigh-quotient checks on model geometries.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario file (YAML or JSON) or builtin name, e.g. lens:p=5")
    common.add_argument("--t-max", type=float, help="largest level t of the scan")
    common.add_argument("--tol", type=float, help="tolerance of the monotonicity inequalities")
    common.add_argument("--grid", type=int, help="run the 3-D grid cross-check with N^3 nodes (0 disables)")
    common.add_argument("--out-dir", type=Path, help="directory for report.json and scan CSVs")
    common.add_argument("--no-timestamps", action="store_true", help="omit timings so reports are byte-identical")
    common.add_argument("--seed", type=int, help="seed for randomized sampling")

    sub.add_parser("run", parents=[common], help="full pipeline")
    sub.add_parser("scan", parents=[common], help="harmonic level-set scan and CSV export only")
    sub.add_parser("check-topology", parents=[common], help="topological assumptions and outermost-sphere verdict")
    sub.add_parser("list", help="list builtin scenarios")
    return parser


def _load(args):
    cfg = resolve(args.config)
    overrides = {"t_max": args.t_max, "tol": args.tol, "grid": args.grid}
    if any(v is not None for v in overrides.values()):
        cfg = cfg.with_solver(**overrides)
    if args.seed is not None:
        d = cfg.to_dict()
        d["seed"] = args.seed
        from .scenarios import parse_config

        cfg = parse_config(d)
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        for name, desc in list_scenarios().items():
            print(f"{name:18s} {desc}")
        return EXIT_OK

    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    mode = {"run": "run", "scan": "scan", "check-topology": "topology"}[args.command]
    out_dir = args.out_dir if args.out_dir is not None else cfg.output.get("dir")
    report = run(cfg, out_dir=out_dir, timestamps=not args.no_timestamps, mode=mode)
    if out_dir is None:
        sys.stdout.write(report.dumps(not args.no_timestamps))
    else:
        status = {k: v["status"] for k, v in sorted(report.stages.items())}
        print(f"{cfg.name}: exit {report.exit_code} {status}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
