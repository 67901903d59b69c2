"""Command-line entry point: ``kinnet <stage> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .config import load_config
from .pipeline import COMMANDS, MissingInputError, Stage, cmd_simulate, run_all

log = logging.getLogger("kinnet")

HELP = {
    "ingest": "parse and validate input records, link auxiliary files, flag hoppers",
    "graph": "build one kinship graph per province-year",
    "detect": "run Leiden on each graph and label dynastic winners",
    "metrics": "compute HHI, CGC, CCD and ACC per province-year",
    "party": "hopping, overlap, bandwagon and membership analytics",
    "trend": "linear trend of each indicator over election years",
    "regress": "panel regressions in both directions",
    "report": "collect a summary of every stage",
    "simulate": "write a synthetic record set, socio table and ground truth",
    "run": "run every stage in order",
}


def _overrides(args: argparse.Namespace) -> dict:
    o: dict = {}
    if args.out:
        o["out"] = args.out
    if args.workers is not None:
        o["workers"] = args.workers
    if getattr(args, "records", None):
        o.setdefault("inputs", {})["records"] = args.records
    if getattr(args, "aux", None):
        o.setdefault("inputs", {})["aux"] = args.aux
    if getattr(args, "socio", None):
        o.setdefault("inputs", {})["socio"] = args.socio
    if getattr(args, "gamma", None) is not None:
        o.setdefault("leiden", {})["gamma"] = args.gamma
    if getattr(args, "seed", None) is not None:
        o.setdefault("leiden", {})["seed"] = args.seed
    if getattr(args, "unweighted", False):
        o.setdefault("leiden", {})["weighted"] = False
    if getattr(args, "threshold", None) is not None:
        o.setdefault("linkage", {})["threshold"] = args.threshold
    if getattr(args, "normalized_acc", False):
        o.setdefault("indicators", {})["normalized_acc"] = True
    if getattr(args, "yearly_means", False):
        o.setdefault("trend", {})["yearly_means"] = True
    if getattr(args, "reml", False):
        o.setdefault("regression", {})["reml"] = True
    return o


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinnet", description="Political kinship network analysis.")
    parser.add_argument("--version", action="version", version=f"kinnet {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--workers", type=int, help="parallel province workers (or KINNET_WORKERS)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "simulate", "run"):
        sp = sub.add_parser(name, parents=[common], help=HELP[name])
        if name in ("ingest", "run"):
            sp.add_argument("--records", nargs="+", help="input record files")
            sp.add_argument("--aux", nargs="+", help="auxiliary files for linkage")
            sp.add_argument("--threshold", type=float, help="linkage similarity threshold")
        if name in ("regress", "run"):
            sp.add_argument("--socio", help="socio-economic table (province, year, POV, HDI)")
            sp.add_argument("--reml", action="store_true", help="REML instead of ML for the mixed model")
        if name in ("detect", "run"):
            sp.add_argument("--gamma", type=float, help="resolution parameter")
            sp.add_argument("--seed", type=int, help="Leiden seed")
            sp.add_argument("--unweighted", action="store_true", help="ignore edge weights")
        if name in ("metrics", "run"):
            sp.add_argument("--normalized-acc", action="store_true", help="divide the summed ratios by the number of communities")
        if name in ("trend", "run"):
            sp.add_argument("--yearly-means", action="store_true", help="fit on yearly means instead of pooled rows")
        if name == "simulate":
            sp.add_argument("--provinces", type=int, help="number of provinces")
            sp.add_argument("--sim-seed", type=int, help="generator seed")
        if name == "run":
            sp.add_argument("--synthetic", action="store_true", help="simulate first and analyse the synthetic data")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
        st = Stage(cfg)
        if args.command == "simulate":
            extra = {}
            if args.provinces is not None:
                extra["n_provinces"] = args.provinces
            if args.sim_seed is not None:
                extra["seed"] = args.sim_seed
            result = cmd_simulate(st, **extra)
        elif args.command == "run":
            result = run_all(st, synthetic=args.synthetic)
        else:
            result = COMMANDS[args.command](st)
    except MissingInputError as exc:
        print(f"kinnet {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"kinnet {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
