"""Command-line front end: ``saginmec run|compare|figure``.

Exit codes: 0 success, 1 usage or scenario error, 2 infeasible instance.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import InfeasibleError, ScenarioError
from .experiments import (ALL_SCHEMES, FIGURE_TAGS, compare_schemes, comparison_csv,
                          reproduce_figure, run_scheme, write_run)
from .scenario import default_scenario, load_scenario, validate

log = logging.getLogger("saginmec")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments, which would read as "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pattern(text):
    try:
        vals = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cache pattern must be comma-separated 0/1, got {text!r}")
    if not vals or any(v not in (0, 1) for v in vals):
        raise argparse.ArgumentTypeError(f"cache pattern must be comma-separated 0/1, got {text!r}")
    return tuple(vals)


def _schemes(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in ALL_SCHEMES]
    if bad or not names:
        raise argparse.ArgumentTypeError(
            f"unknown scheme(s) {bad}; expected a comma list of {', '.join(ALL_SCHEMES)}")
    return tuple(names)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario TOML file (default: built-in scenario)")
    common.add_argument("--cache-pattern", type=_pattern,
                        help="cache hit indicators per device, e.g. 1,1,1,1,1,1,0,0")
    common.add_argument("--seed", type=int, help="layout seed for randomly placed devices")
    common.add_argument("--eps", type=float, default=1e-3,
                        help="outer-loop relative improvement threshold (default 1e-3)")
    common.add_argument("--max-outer", type=int, default=15,
                        help="maximum outer iterations (default 15)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="saginmec", description="Cache-assisted SAGIN-MEC energy-efficiency solver")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    r = sub.add_parser("run", parents=[common], help="solve one scheme")
    r.add_argument("--scheme", default="JO-C", choices=ALL_SCHEMES)
    c = sub.add_parser("compare", parents=[common], help="solve several schemes on one scenario")
    c.add_argument("--schemes", type=_schemes, default=ALL_SCHEMES)
    f = sub.add_parser("figure", parents=[common], help="write the data behind a figure")
    f.add_argument("--tag", required=True, choices=FIGURE_TAGS)
    return p


def _scenario(args):
    cfg = default_scenario() if not args.scenario else load_scenario(open(args.scenario, "rb"))
    changes = {}
    if args.cache_pattern is not None:
        if len(args.cache_pattern) != cfg.K:
            raise ScenarioError(f"cache pattern has {len(args.cache_pattern)} entries, "
                                f"scenario has {cfg.K} devices")
        changes["cache_pattern"] = args.cache_pattern
    if args.seed is not None:
        changes["layout_seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    if args.eps <= 0 or args.max_outer < 1:
        print("saginmec: --eps must be positive and --max-outer at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _scenario(args)
    except (OSError, ScenarioError) as exc:
        print(f"saginmec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = validate(cfg)
    for path, msg in rep.warnings:
        print(f"saginmec: warning: {path}: {msg}", file=sys.stderr)
    if not rep.ok:
        for path, msg in rep.errors:
            print(f"saginmec: {path}: {msg}", file=sys.stderr)
        # a well-formed scenario that admits no feasible plan is an infeasibility,
        # not a usage error
        infeasible = all(path in ("plan", "q_uav_end") for path, _ in rep.errors)
        return EXIT_INFEASIBLE if infeasible else EXIT_USAGE
    say = log.info
    try:
        if args.command == "run":
            res = run_scheme(args.scheme, cfg, args.eps, args.max_outer)
            write_run(res, args.out)
            print(f"{res.scheme}: {res.energy_efficiency:.6e} bits/J, "
                  f"{res.total_energy_J:.3f} J, {res.report.outer_iterations} outer iterations")
        elif args.command == "compare":
            rows, results = compare_schemes(cfg, args.schemes, args.eps, args.max_outer, say)
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "comparison.csv"), "w", newline="") as fh:
                fh.write(comparison_csv(rows))
            for name, res in results.items():
                write_run(res, os.path.join(args.out, name))
            for r in rows:
                print(f"{r['scheme']:6s} {r['status']:10s} {r['ee']:.6e} bits/J")
            if all(r["status"] != "ok" for r in rows):
                return EXIT_INFEASIBLE
        else:
            base = cfg if (args.scenario or args.cache_pattern or args.seed is not None) else None
            files = reproduce_figure(args.tag, args.out, base, args.eps, args.max_outer, say)
            print("\n".join(os.path.join(args.out, f) for f in files))
    except InfeasibleError as exc:
        print(f"saginmec: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ScenarioError as exc:
        print(f"saginmec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
