"""Command line front end: ``freeknot-sde {tau,gamma,converge,compare} ...``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ConfigurationError
from .harness import RunConfig, run


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="freeknot-sde", description="Free-knot spline approximation of SDE paths.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--config", help="JSON config; command-line flags override it")
        p.add_argument("--degree", type=int, help="polynomial degree r")
        p.add_argument("--paths", type=int, help="number of Monte Carlo paths")
        p.add_argument("--grid-exp", type=int, help="fine grid has 2**grid_exp steps")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, help="worker threads, 0 = auto")

    def study(p):
        common(p)
        p.add_argument("--sde", help="preset name")
        p.add_argument("--k", type=_list(int), help="comma separated budgets")
        p.add_argument("--q", type=_list(float), help="comma separated moment orders")
        p.add_argument("--delta", type=float, help="coarse grid exponent")
        p.add_argument("--tau-paths", type=int, help="paths for the E(tau) estimate")
        p.add_argument("--tau-mean", type=float, help="use this E(tau) instead of estimating it")
        p.add_argument("--method", type=_list(str), help="comma separated: dagger, star, euler, min")

    common(sub.add_parser("tau", help="moments of the first stopping time"))
    gamma = sub.add_parser("gamma", help="median optimal error level per budget")
    common(gamma)
    gamma.add_argument("--k", type=_list(int), help="comma separated budgets")
    gamma.add_argument("--tau-paths", type=int, help="paths for the E(tau) estimate")
    gamma.add_argument("--tau-mean", type=float, help="use this E(tau) instead of estimating it")
    study(sub.add_parser("converge", help="error convergence table"))
    study(sub.add_parser("compare", help="methods side by side on shared paths"))
    return parser


_FLAG_TO_FIELD = {
    "degree": "degree", "paths": "n_paths", "grid_exp": "grid_exponent", "seed": "master_seed",
    "threads": "threads", "sde": "sde", "k": "ks", "q": "qs", "delta": "delta",
    "tau_paths": "tau_paths", "tau_mean": "tau_mean", "method": "methods", "out": "out",
}


def config_from_args(args) -> RunConfig:
    if args.config:
        try:
            cfg = RunConfig.from_json(Path(args.config).read_text())
        except (OSError, ValueError, TypeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
    else:
        cfg = RunConfig()
    cfg.command = args.command
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.command == "tau" and args.grid_exp is None and not args.config:
        cfg.grid_exponent = 18
    if args.command == "tau" and args.paths is None and not args.config:
        cfg.n_paths = 10_000
    return cfg.validate()


def main(argv=None) -> int:
    start = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
    except ConfigurationError as exc:
        print(f"freeknot-sde: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    out = Path(cfg.out)
    try:
        table = run(cfg)
        out.write_text(table, encoding="utf-8")
        out.with_suffix(".config.json").write_text(cfg.to_json(), encoding="utf-8")
    except ConfigurationError as exc:
        print(f"freeknot-sde: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"freeknot-sde: {cfg.command} failed: {exc}", file=sys.stderr)
        return 1
    rows = table.count("\n") - 1
    print(f"{cfg.command}: wrote {rows} rows to {out} in {time.perf_counter() - start:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
