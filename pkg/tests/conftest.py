import pytest

from gape.data import LinkRecord, Universe
from gape.months import month_key
from gape.portfolio import BacktestConfig, run_backtest
from gape.synthetic import generate_synthetic

from builders import (PLANTED_SEED, PLANTED_YEARS, build_universe, flat_factors, planted_spec,
                      priced, quarters)


@pytest.fixture
def tiny_universe():
    """Three linked securities, two fiscal years of earnings, one year of prices.

    S1: E_1993=0.8, E_1994=1.0, close 10 (g=0.25 for k=1)
    S2: E_1994 negative
    S3: E_1993=1.0, E_1994=0.5, close 20
    """
    first, last = month_key(1995, 1), month_key(1996, 6)
    prices = (priced("S1", first, last, 10.0, 0.01) + priced("S2", first, last, 5.0, 0.0)
              + priced("S3", first, last, 20.0, -0.01))
    earnings = (quarters("F1", 1993, 0.8) + quarters("F1", 1994, 1.0)
                + quarters("F2", 1993, 1.0) + quarters("F2", 1994, -0.4)
                + quarters("F3", 1993, 1.0) + quarters("F3", 1994, 0.5))
    links = [LinkRecord("F1", "S1", first), LinkRecord("F2", "S2", first),
             LinkRecord("F3", "S3", first)]
    return build_universe(prices, earnings, links, (), flat_factors(first, last))


@pytest.fixture(scope="session")
def planted():
    """A 200-firm, 27-year planted universe shared across the slower tests."""
    data = generate_synthetic(planted_spec(), PLANTED_SEED)
    return data, Universe.from_datasets(data.datasets)


@pytest.fixture(scope="session")
def planted_result(planted):
    _, universe = planted
    log = []
    result = run_backtest(universe, BacktestConfig(formation_years=PLANTED_YEARS), access_log=log)
    return result, log


# --------------------------------------------------------------------------- acceptance report

_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker
    failed = report.failed or (report.when == "setup" and report.skipped)
    state = _criteria.get(number, (title, "PASS"))[1]
    if failed:
        state = "FAIL"
    _criteria[number] = (title, state)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, state = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {state}  {title}")
