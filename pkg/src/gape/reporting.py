"""Tabular backtest artifacts: table analogues, plot data and the run manifest."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, replace
from itertools import combinations
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .data import FILES, Universe, atomic_write_text, csv_text
from .months import format_month
from .portfolio import SORTS, BacktestConfig, BacktestResult, run_backtest
from .stats import (annualized_return, ols_three_factor, paired_t_test, risk_free_series,
                    sharpe_ratio)

INF_TOKEN = "INF"

OUTPUT_FILES = (
    "summary_table.csv",
    "annual_returns.csv",
    "ttests.csv",
    "factors_gape.csv",
    "factors_pe.csv",
    "cumulative.csv",
    "cap_sweep.csv",
)


def fmt(value) -> str:
    """Full-precision text for CSV cells; infinities become ``INF``."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return INF_TOKEN if value > 0 else "-" + INF_TOKEN
        return repr(value)
    return str(value)


def parse_cell(text: str) -> float:
    if text == INF_TOKEN:
        return math.inf
    if text == "-" + INF_TOKEN:
        return -math.inf
    return float(text)


def _table(header: List[str], rows: Iterable[Sequence]) -> str:
    return csv_text(header, ([fmt(v) for v in row] for row in rows))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def summary_csv(result: BacktestResult) -> str:
    header = ["window", "portfolio", "median_gape", "infinite_years", "years",
              "median_pe", "median_growth"]
    rows = [[r[h] for h in header] for r in result.summary_table()]
    return _table(header, rows)


def annual_returns_csv(result: BacktestResult) -> str:
    labels = result.labels
    ann = {s: [annualized_return(result.series[s][l]) for l in labels] for s in SORTS}
    diff = [a - b for a, b in zip(ann["gape"], ann["pe"])]
    return _table(["sort"] + labels, [["gape"] + ann["gape"], ["pe"] + ann["pe"],
                                      ["difference"] + diff])


def ttests_csv(result: BacktestResult) -> str:
    rows = []
    for sort in SORTS:
        for a, b in combinations(result.labels, 2):
            t = paired_t_test(result.series[sort][a], result.series[sort][b])
            rows.append([sort, a, b, t.mean_diff, t.t, t.dof, t.p])
    return _table(["sort", "portfolio_i", "portfolio_j", "mean_diff", "t", "dof", "p"], rows)


def performance_rows(result: BacktestResult, universe: Universe, sort: str) -> List[list]:
    rows = []
    for label in result.labels:
        series = result.series[sort][label]
        rf = risk_free_series(series, universe.factors)
        sharpe = sharpe_ratio(series, rf)
        reg = ols_three_factor(series, universe.factors)
        rows.append([label, annualized_return(series), sharpe, sharpe * math.sqrt(12.0),
                     reg.alpha, reg.t_stats[0], reg.beta_market, reg.t_stats[1],
                     reg.beta_hml, reg.t_stats[2], reg.beta_smb, reg.t_stats[3],
                     reg.r_squared, reg.residual_dof])
    return rows


FACTOR_HEADER = ["portfolio", "annual_return", "sharpe", "sharpe_annualized",
                 "alpha", "alpha_t", "beta_market", "beta_market_t", "beta_hml", "beta_hml_t",
                 "beta_smb", "beta_smb_t", "r_squared", "residual_dof"]


def factors_csv(result: BacktestResult, universe: Universe, sort: str) -> str:
    return _table(FACTOR_HEADER, performance_rows(result, universe, sort))


def cumulative_csv(result: BacktestResult, universe: Universe) -> str:
    lo, hi = result.labels[0], result.labels[-1]
    cols = [(s, l) for s in SORTS for l in (lo, hi)]
    ref = result.series["gape"][lo]
    growth = {c: np.cumprod(1.0 + result.series[c[0]][c[1]].values) for c in cols}
    index = np.cumprod([1.0 + universe.factors[m].market_return for m in ref.months])
    header = ["month"] + [f"{s}_{l}" for s, l in cols] + ["index"]
    rows = [[format_month(m)] + [growth[c][i] for c in cols] + [index[i]]
            for i, m in enumerate(ref.months)]
    return _table(header, rows)


def cap_sweep_rows(universe: Universe, config: BacktestConfig,
                   percentiles: Sequence[float]) -> List[list]:
    rows = []
    for pct in percentiles:
        res = run_backtest(universe, replace(config, cap_percentile=float(pct)))
        size = float(np.mean(list(res.cohort_sizes.values())))
        for sort in SORTS:
            for row in performance_rows(res, universe, sort):
                rows.append([float(pct), sort, row[0], row[1], row[2], row[4], size])
    return rows


CAP_SWEEP_HEADER = ["percentile", "sort", "portfolio", "annual_return", "sharpe", "alpha",
                    "mean_cohort_size"]


def build_reports(universe: Universe, config: BacktestConfig,
                  cap_sweep: Sequence[float] = (100.0,),
                  result: Optional[BacktestResult] = None) -> Dict[str, str]:
    """Render every backtest artifact except the manifest, keyed by file name."""
    if result is None:
        result = run_backtest(universe, config)
    return {
        "summary_table.csv": summary_csv(result),
        "annual_returns.csv": annual_returns_csv(result),
        "ttests.csv": ttests_csv(result),
        "factors_gape.csv": factors_csv(result, universe, "gape"),
        "factors_pe.csv": factors_csv(result, universe, "pe"),
        "cumulative.csv": cumulative_csv(result, universe),
        "cap_sweep.csv": _table(CAP_SWEEP_HEADER, cap_sweep_rows(universe, config, cap_sweep)),
    }


def write_backtest(out_dir, universe: Universe, config: BacktestConfig,
                   cap_sweep: Sequence[float], input_dir=None,
                   extra: Optional[dict] = None) -> Dict[str, Path]:
    """Write all artifacts plus ``run_manifest.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    reports = build_reports(universe, config, cap_sweep)
    paths = {}
    for name, text in reports.items():
        atomic_write_text(out_dir / name, text)
        paths[name] = out_dir / name
    inputs = {}
    if input_dir is not None:
        inputs = {fname: sha256_file(Path(input_dir) / fname) for fname in FILES.values()}
    manifest = {
        "config": asdict(config),
        "cap_sweep": [float(p) for p in cap_sweep],
        "returns_mode": universe.returns_mode,
        "inputs": inputs,
        "outputs": {name: sha256_file(path) for name, path in sorted(paths.items())},
    }
    if extra:
        manifest.update(extra)
    atomic_write_text(out_dir / "run_manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    paths["run_manifest.json"] = out_dir / "run_manifest.json"
    return paths
