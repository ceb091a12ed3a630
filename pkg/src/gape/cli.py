"""Command-line entry point: ``gape validate | metric | backtest | synth``.

Exit codes: 0 success, 1 validation diagnostics, 2 hard error, 3 bad usage.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path
from typing import Optional

from .data import load_and_validate, RETURNS_MODES
from .exceptions import DataError, FormationError, GapeError, InputError
from .growth import annualized_growth
from .portfolio import HOLDING_POLICIES, BacktestConfig, feasible_formation_years
from .reporting import write_backtest
from .synthetic import SyntheticSpec, generate_synthetic
from .valuation import (ValuationInputs, ga_pe, peg_payback_period, peg_ratio,
                        solvency_bound)

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 3

BACKTEST_DEFAULTS = {
    "windows": "1,2,3",
    "quantiles": "5",
    "formation_month": "3",
    "returns_mode": "total",
    "holding": "rebalance",
    "cap_sweep": "100,75,50,25",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _float_list(text):
    return tuple(float(v) for v in str(text).replace(" ", "").split(",") if v)


def _year_range(text):
    text = str(text).strip()
    for sep in (":", ".."):
        text = text.replace(sep, "-")
    parts = [p for p in text.split("-") if p]
    if len(parts) == 1:
        return (int(parts[0]),)
    if len(parts) != 2:
        raise UsageError(f"formation years must look like 1990-2014, got {text!r}")
    lo, hi = int(parts[0]), int(parts[1])
    if hi < lo:
        raise UsageError("formation year range is empty")
    return tuple(range(lo, hi + 1))


def read_config_file(path) -> dict:
    """Read ``key = value`` lines (``#`` comments allowed) into a dict."""
    parser = configparser.ConfigParser(interpolation=None)
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[run]\n" + text)
    return {k.replace("-", "_"): v for k, v in parser["run"].items()}


# --------------------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    try:
        universe = load_and_validate(args.data_dir)
    except DataError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    lines = universe.report.lines()
    for line in lines:
        print(line)
    return EXIT_DIAGNOSTICS if lines else EXIT_OK


def metric_report(price: float, eps: float, growth: float) -> dict:
    inputs = ValuationInputs(price, eps, growth)
    outcome = ga_pe(inputs)
    if outcome.finite:
        gape = {"finite": True, "n": outcome.n}
    else:
        gape = {"finite": False, "payback_proportion": outcome.payback_proportion,
                "note": "growth at or below the solvency bound; the price is never repaid"}
    payback = peg_payback_period(inputs)
    return {
        "price": inputs.price,
        "eps": inputs.eps,
        "growth": inputs.growth,
        "pe": inputs.pe,
        "solvency_bound": solvency_bound(inputs.price, inputs.eps),
        "ga_pe": gape,
        "peg": peg_ratio(inputs.pe, 100.0 * growth) if growth > 0 else None,
        "peg_payback": "INF" if math.isinf(payback) else int(payback),
    }


def cmd_metric(args) -> int:
    if (args.growth is None) == (args.eps_history is None):
        raise UsageError("give exactly one of --growth or --eps-history")
    if args.eps_history is not None:
        history = [float(v) for v in args.eps_history.split(",") if v.strip()]
        k = args.window
        if len(history) < k + 1:
            raise UsageError(f"--eps-history needs at least {k + 1} values for window {k}")
        eps = history[-1] if args.eps is None else args.eps
        growth = annualized_growth(history[-1], history[-1 - k], k)
    else:
        if args.eps is None:
            raise UsageError("--eps is required with --growth")
        eps, growth = args.eps, args.growth
    print(json.dumps(metric_report(args.price, eps, growth), indent=2, sort_keys=True))
    return EXIT_OK


def _setting(args, cfg, name):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return BACKTEST_DEFAULTS.get(name)


def cmd_backtest(args) -> int:
    cfg = read_config_file(args.config) if args.config else {}
    data_dir = _setting(args, cfg, "data_dir")
    output_dir = _setting(args, cfg, "output_dir")
    if not data_dir or not output_dir:
        raise UsageError("backtest needs --data-dir and --output-dir")
    returns_mode = _setting(args, cfg, "returns_mode")
    holding = _setting(args, cfg, "holding")
    if returns_mode not in RETURNS_MODES:
        raise UsageError(f"returns_mode must be one of {RETURNS_MODES}")
    if holding not in HOLDING_POLICIES:
        raise UsageError(f"holding must be one of {HOLDING_POLICIES}")
    windows = _int_list(_setting(args, cfg, "windows"))
    if not windows or any(k < 1 for k in windows):
        raise UsageError("windows must be a non-empty list of positive integers")
    formation_month = int(_setting(args, cfg, "formation_month"))
    if not 1 <= formation_month <= 12:
        raise UsageError("formation_month must be 1-12")
    cap_sweep = _float_list(_setting(args, cfg, "cap_sweep"))
    if any(not 0 < p <= 100 for p in cap_sweep):
        raise UsageError("cap sweep percentiles must lie in (0, 100]")

    universe = load_and_validate(data_dir, returns_mode=returns_mode)
    years = _setting(args, cfg, "formation_years")
    years = _year_range(years) if years else feasible_formation_years(
        universe, windows, formation_month)
    if not years:
        raise FormationError("no formation year has enough data")
    config = BacktestConfig(formation_years=years, windows=windows,
                            quantiles=int(_setting(args, cfg, "quantiles")),
                            formation_month=formation_month, holding=holding)
    paths = write_backtest(output_dir, universe, config, cap_sweep, input_dir=data_dir)
    for name in sorted(paths):
        print(paths[name])
    for line in universe.report.lines():
        print("warning:", line, file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    raw = {}
    if args.spec_file:
        raw = json.loads(Path(args.spec_file).read_text(encoding="utf-8"))
    spec = SyntheticSpec.from_dict(raw)
    data = generate_synthetic(spec, args.seed)
    out = data.write(args.output_dir)
    print(out)
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gape", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", help="check an input data directory")
    p.add_argument("data_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metric", help="GA-P/E and companion measures for one security")
    p.add_argument("--price", type=float, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--growth", type=float, help="annual fractional growth, e.g. 0.10")
    p.add_argument("--eps-history", help="comma-separated annual EPS, oldest first")
    p.add_argument("--window", type=int, default=1, help="growth window in years")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("backtest", help="run the sorted-portfolio study")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--formation-years", dest="formation_years", help="e.g. 1990-2014")
    p.add_argument("--windows")
    p.add_argument("--quantiles")
    p.add_argument("--formation-month", dest="formation_month")
    p.add_argument("--returns-mode", dest="returns_mode", choices=RETURNS_MODES)
    p.add_argument("--holding", choices=HOLDING_POLICIES)
    p.add_argument("--cap-sweep", dest="cap_sweep", help="e.g. 100,75,50,25")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="generate a synthetic data directory")
    p.add_argument("--spec-file", help="JSON generator parameters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, InputError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
