"""Fiscal-year alignment of quarterly EPS and historical growth estimation.

A firm's fiscal year ``n`` is redefined as the four successive quarters whose
last one ends in October, November or December of calendar year ``n``.  This
puts every firm on a common annual clock regardless of its reporting
calendar.
"""
from __future__ import annotations

import datetime as dt
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Set

from .exceptions import DataError, IneligibleError
from .months import date_month, year_of, month_of

DEFAULT_WINDOWS = (1, 2, 3)


@dataclass(frozen=True)
class QuarterlyEarningsRecord:
    firm_id: str
    quarter_end: dt.date
    eps: float


@dataclass
class FiscalEarningsSeries:
    """Four-quarter EPS sums keyed by redefined fiscal year.

    Years for which any constituent quarter was missing are simply absent.
    """

    firm_id: str
    annual_eps: Dict[int, float] = field(default_factory=dict)

    def get(self, year: int) -> Optional[float]:
        return self.annual_eps.get(year)


@dataclass(frozen=True)
class GrowthEstimate:
    firm_id: str
    formation_year: int
    window: int
    g: float


def align_fiscal_years(records: Iterable[QuarterlyEarningsRecord]) -> Dict[str, FiscalEarningsSeries]:
    """Group quarterly records by firm and sum them into fiscal years.

    Quarters are matched at month resolution: a fiscal year closing in month
    ``K`` needs quarters ending in ``K``, ``K-3``, ``K-6`` and ``K-9``.  If a
    firm reports two quarter ends within October to December (a fiscal
    calendar change) the later one closes the year.

    Raises :class:`DataError` if a firm has two quarters ending in the same
    month.
    """
    by_firm: Dict[str, Dict[int, float]] = defaultdict(dict)
    problems = []
    for rec in records:
        key = date_month(rec.quarter_end)
        quarters = by_firm[rec.firm_id]
        if key in quarters:
            problems.append(f"firm {rec.firm_id}: duplicate quarter ending {rec.quarter_end}")
            continue
        quarters[key] = float(rec.eps)
    if problems:
        raise DataError("duplicate quarterly earnings", problems)

    result = {}
    for firm, quarters in by_firm.items():
        closing: Dict[int, int] = {}
        for key in quarters:
            if month_of(key) >= 10:
                year = year_of(key)
                closing[year] = max(key, closing.get(year, key))
        annual = {}
        for year, last in sorted(closing.items()):
            keys = (last - 9, last - 6, last - 3, last)
            if all(k in quarters for k in keys):
                annual[year] = sum(quarters[k] for k in keys)
        result[firm] = FiscalEarningsSeries(firm, annual)
    return result


def annualized_growth(e_end: float, e_start: float, k: int) -> float:
    """Compound annual growth from ``e_start`` to ``e_end`` over ``k`` years."""
    if k < 1:
        raise ValueError(f"window must be at least one year, got {k}")
    if e_end <= 0 or e_start <= 0:
        raise IneligibleError(
            f"growth needs positive endpoint earnings, got start={e_start} end={e_end}"
        )
    return (e_end / e_start) ** (1.0 / k) - 1.0


def endpoint_years(formation_year: int, k: int):
    """Fiscal years ``(n-1, n-k-1)`` consulted for a formation in year ``n``."""
    return formation_year - 1, formation_year - k - 1


def is_eligible(series: FiscalEarningsSeries, formation_year: int, k: int) -> bool:
    end_year, start_year = endpoint_years(formation_year, k)
    e_end, e_start = series.get(end_year), series.get(start_year)
    return e_end is not None and e_start is not None and e_end > 0 and e_start > 0


def eligible_firms(series: Mapping[str, FiscalEarningsSeries], formation_year: int, k: int) -> Set[str]:
    return {firm for firm, s in series.items() if is_eligible(s, formation_year, k)}


def estimate_growth(series: FiscalEarningsSeries, formation_year: int, k: int) -> GrowthEstimate:
    end_year, start_year = endpoint_years(formation_year, k)
    e_end, e_start = series.get(end_year), series.get(start_year)
    if e_end is None or e_start is None:
        raise IneligibleError(
            f"firm {series.firm_id}: fiscal years {start_year}/{end_year} not both available"
        )
    g = annualized_growth(e_end, e_start, k)
    return GrowthEstimate(series.firm_id, formation_year, k, g)
