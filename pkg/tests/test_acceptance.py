"""Acceptance gate: one test per criterion, each at its stated tolerance.

A line per criterion is printed in the terminal summary (see conftest.py).
"""
import calendar
import datetime as dt
import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from gape.cli import main
from gape.data import Datasets, LinkRecord, MonthlyPriceRecord, Universe
from gape.growth import (QuarterlyEarningsRecord, align_fiscal_years, annualized_growth,
                         eligible_firms)
from gape.months import month_key
from gape.portfolio import BacktestConfig, FormationEvent, form_cohort, run_backtest
from gape.reporting import OUTPUT_FILES, cap_sweep_rows, performance_rows
from gape.series import ReturnSeries
from gape.stats import annualized_return, ols_three_factor, paired_t_test
from gape.synthetic import SyntheticSpec, generate_synthetic
from gape.valuation import (ValuationInputs, cumulative_earnings, ga_pe, n_star,
                            payback_proportion, peg_payback_period, solvency_bound)

from builders import PLANTED_SEED, PLANTED_YEARS, planted_spec, quarters
from oracles import bisect_payback, t_two_tailed_by_quadrature, whole_year_payback


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@criterion(1, "earnings schedule and PEG payback periods")
def test_schedule_reproduction():
    start = time.perf_counter()
    assert peg_payback_period(ValuationInputs(10, 1, 0.10)) == 7
    assert peg_payback_period(ValuationInputs(20, 1, 0.20)) == 9
    cells = {
        0.10: [1.10, 2.31, 3.64, 5.11, 6.72, 8.49, 10.44, 12.58, 14.94],
        0.20: [1.20, 2.64, 4.37, 6.44, 8.93, 11.92, 15.50, 19.80, 24.96],
    }
    for g, column in cells.items():
        for year, cell in enumerate(column, start=1):
            assert abs(round(cumulative_earnings(1.0, g, year), 2) - cell) <= 0.005
    assert time.perf_counter() - start < 1.0


@criterion(2, "closed form matches bisection and whole-year payback")
def test_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    n = 10_000
    pe = np.exp(rng.uniform(0.0, math.log(100.0), n))
    bound = -1.0 / (pe + 1.0)
    # half spread over the finite region, half crowded against the bound
    spread = rng.uniform(bound + 1e-6, 2.0)
    crowded = bound + 10.0 ** rng.uniform(-6, -1, n)
    growth = np.where(np.arange(n) % 2 == 0, spread, crowded)
    non_integer = 0
    for p, g in zip(pe.tolist(), growth.tolist()):
        inputs = ValuationInputs(p, 1.0, g)
        out = ga_pe(inputs)
        assert out.finite
        oracle = bisect_payback(p, 1.0, g)
        assert abs(out.n - oracle) <= 1e-9 * oracle
        if out.n != math.floor(out.n):
            non_integer += 1
            assert math.ceil(out.n) == whole_year_payback(p, 1.0, g)
    assert non_integer >= 9_990
    assert time.perf_counter() - start < 10.0


@criterion(3, "zero-growth limit and the solvency bound")
def test_limits_and_bound():
    for pe in (1.0, 10.0, 100.0):
        for g in (1e-10, -1e-10):
            assert abs(ga_pe(ValuationInputs(pe, 1.0, g)).n - pe) < 1e-6
    for price, eps in [(15.0, 1.0), (10.0, 1.0), (1.0, 1.0), (99.0, 1.0), (7.3, 0.9)]:
        b = solvency_bound(price, eps)
        assert ga_pe(ValuationInputs(price, eps, b + 1e-12)).finite
        assert not ga_pe(ValuationInputs(price, eps, b)).finite
        assert not ga_pe(ValuationInputs(price, eps, b - 1e-12)).finite
    assert solvency_bound(15, 1) == -0.0625


def _random_cohort_universe(rng, size):
    """One formation (March 2000) of ``size`` securities, about half contracting hard."""
    as_of = month_key(2000, 3)
    ds = Datasets()
    for i in range(size):
        sid, firm = f"S{i:03d}", f"F{i:03d}"
        pe = float(np.exp(rng.uniform(0.0, math.log(80.0))))
        bound = -1.0 / (pe + 1.0)
        if rng.uniform() < 0.5:
            g = float(rng.uniform(-0.9, bound))
        else:
            g = float(rng.uniform(bound + 1e-4, 1.0))
        e_end = float(rng.uniform(0.2, 5.0))
        ds.earnings += quarters(firm, 1999, e_end) + quarters(firm, 1998, e_end / (1.0 + g))
        ds.prices.append(MonthlyPriceRecord(sid, as_of, pe * e_end, 0.0,
                                            float(rng.uniform(1e6, 1e9))))
        ds.links.append(LinkRecord(firm, sid, as_of))
    return Universe.from_datasets(ds)


@criterion(4, "N* places infinite outcomes after finite ones")
def test_n_star_coherence():
    rng = np.random.default_rng(4)
    mixed = 0
    for _ in range(1000):
        universe = _random_cohort_universe(rng, int(rng.integers(5, 25)))
        cohort = form_cohort(universe, FormationEvent(2000), 1)
        classes = [r.outcome_class for r in cohort]
        if "infinite" in classes and "finite" in classes:
            mixed += 1
        if "infinite" in classes:
            first = classes.index("infinite")
            assert all(c == "infinite" for c in classes[first:])
            assert all(c == "finite" for c in classes[:first])
            infinite = cohort[first:]
            props = [payback_proportion(ValuationInputs(r.price, r.eps, r.growth))
                     for r in infinite]
            n_max = max((r.ga_pe for r in cohort[:first]), default=0.0)
            for r, prop in zip(infinite, props):
                assert r.metric_value == pytest.approx(
                    n_star(ValuationInputs(r.price, r.eps, r.growth), n_max), rel=1e-12)
            pairs = sorted(zip(props, (r.metric_value for r in infinite)))
            for (p1, k1), (p2, k2) in zip(pairs, pairs[1:]):
                if p1 < p2:
                    assert k1 > k2
    assert mixed > 900


@criterion(5, "growth compounding identity and eligibility rule")
def test_growth_estimator():
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        e_start, e_end = np.exp(rng.uniform(-5, 5, 2)).tolist()
        k = int(rng.integers(1, 4))
        g = annualized_growth(e_end, e_start, k)
        assert abs(e_start * (1.0 + g) ** k - e_end) <= 1e-12 * e_end

    def q(firm, y, m, eps):
        return QuarterlyEarningsRecord(firm, dt.date(y, m, calendar.monthrange(y, m)[1]), eps)

    records = (
        quarters("OK3", 1996, 0.8) + quarters("OK3", 1999, 1.2)             # k=3 endpoints only
        + quarters("NEG", 1998, -0.1) + quarters("NEG", 1999, 1.2)          # negative start
        + quarters("ZERO", 1998, 1.0) + quarters("ZERO", 1999, 0.0)         # zero end
        + quarters("GAP", 1998, 1.0) + quarters("GAP", 1999, 1.2)[1:]       # missing Q1 of n-1
        + quarters("NOV", 1998, 1.0, 11) + quarters("NOV", 1999, 1.1, 11)   # November close
        + [q("HOLE", 1998, m, 0.25) for m in (3, 6, 12)]                    # missing Sep quarter
        + quarters("HOLE", 1999, 1.0)
    )
    aligned = align_fiscal_years(records)
    assert eligible_firms(aligned, 2000, 1) == {"NOV"}
    assert eligible_firms(aligned, 2000, 3) == {"OK3"}
    assert aligned["GAP"].get(1999) is None and aligned["HOLE"].get(1998) is None


@criterion(6, "t-test p-values, noiseless regression, annualized return")
def test_statistics_oracles():
    rng = np.random.default_rng(6)
    for dof in (1, 4, 30, 299):
        for shift in (0.0, 0.1, 0.5, 2.0):
            a = rng.normal(shift, 1.0, dof + 1)
            b = rng.normal(0.0, 1.0, dof + 1)
            res = paired_t_test(a, b)
            assert res.dof == dof
            assert abs(res.p - t_two_tailed_by_quadrature(res.t, dof)) < 1e-8

    spec = SyntheticSpec(n_firms=50, n_months=60, noise=0.0)
    data = generate_synthetic(spec, 6)
    universe = Universe.from_datasets(data.datasets)
    first = spec.first_month
    for s, plant in enumerate(spec.strata):
        members = [f["security_id"] for f in data.manifest["firms"].values() if f["stratum"] == s]
        r = np.mean([[universe.security_return(sid, first + i) for i in range(60)]
                     for sid in members], axis=0)
        reg = ols_three_factor(ReturnSeries(first, r), universe.factors)
        planted = (plant.alpha, plant.beta, plant.b_hml, plant.b_smb)
        assert np.allclose(reg.coefficients, planted, rtol=0, atol=1e-12)
        assert abs(reg.r_squared - 1.0) < 1e-12

    annual = annualized_return(np.full(300, 0.01))
    # 0.126825 is the six-decimal display of 1.01**12 - 1 = 0.12682503...
    assert round(annual, 6) == 0.126825
    assert abs(annual - (1.01 ** 12 - 1)) < 1e-9


@criterion(7, "planted backtest recovers the return ordering")
def test_planted_backtest():
    start = time.perf_counter()
    spec = planted_spec()
    assert spec.n_months == 27 * 12 and spec.n_firms == 200

    def run():
        data = generate_synthetic(spec, PLANTED_SEED)
        universe = Universe.from_datasets(data.datasets)
        return universe, run_backtest(universe, BacktestConfig(formation_years=PLANTED_YEARS))

    universe, result = run()
    gape = result.series["gape"]
    annual = [annualized_return(gape[label]) for label in result.labels]
    assert all(a > b for a, b in zip(annual, annual[1:])), annual
    assert paired_t_test(gape["P1"], gape["P5"]).p < 0.01

    plants = [p.alpha for p in spec.strata]
    regs = [ols_three_factor(gape[label], universe.factors) for label in result.labels]
    for reg, plant in zip(regs, plants):
        assert abs(reg.alpha - plant) < 3 * reg.std_errors[0]
    for (r1, p1), (r2, p2) in zip(zip(regs, plants), zip(regs[1:], plants[1:])):
        assert p1 > p2
        assert r1.alpha - r2.alpha > -3 * math.hypot(r1.std_errors[0], r2.std_errors[0])

    _, again = run()
    for label in result.labels:
        assert again.series["gape"][label].values.tobytes() == gape[label].values.tobytes()
    assert time.perf_counter() - start < 60.0


@criterion(8, "no look-ahead reads; reruns give identical digests")
def test_protocol_hygiene(planted, tmp_path):
    data, universe = planted
    log = []
    run_backtest(universe, BacktestConfig(formation_years=PLANTED_YEARS), access_log=log)
    assert log and not [a for a in log if a.violates]

    data.write(tmp_path / "data")
    manifests = []
    for name in ("first", "second"):
        out = tmp_path / name
        argv = ["backtest", "--data-dir", str(tmp_path / "data"), "--output-dir", str(out),
                "--formation-years", "1990-2014", "--cap-sweep", "100,50"]
        assert main(argv) == 0
        manifests.append((out / "run_manifest.json").read_bytes())
    assert manifests[0] == manifests[1]
    assert set(json.loads(manifests[0])["outputs"]) == set(OUTPUT_FILES)


@criterion(9, "cap sweep at 100 equals the unfiltered run; cohorts shrink with the cap")
def test_cap_sweep(planted):
    _, universe = planted
    config = BacktestConfig(formation_years=PLANTED_YEARS)
    unfiltered = run_backtest(universe, config)
    sweep = cap_sweep_rows(universe, config, [100.0])
    mean_size = float(np.mean(list(unfiltered.cohort_sizes.values())))
    expected = []
    for sort in ("gape", "pe"):
        for row in performance_rows(unfiltered, universe, sort):
            expected.append([100.0, sort, row[0], row[1], row[2], row[4], mean_size])
    assert sweep == expected

    previous = None
    for pct in (100.0, 90.0, 75.0, 50.0, 25.0, 10.0):
        sizes = run_backtest(universe, replace(config, cap_percentile=pct)).cohort_sizes
        if previous is not None:
            assert all(sizes[key] <= previous[key] for key in sizes)
        previous = sizes
