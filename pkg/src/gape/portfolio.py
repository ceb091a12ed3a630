"""Annual formation of sorted quantile portfolios and monthly return tracking.

Each year at the end of the formation month (March by default) every eligible
security is ranked by GA-P/E, or by plain P/E for the comparison sort, using
that month's closing price and the previous fiscal year's earnings.  One set
of quantile portfolios is formed per growth window; the sets are averaged
into a single set and held for the following twelve months.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import Universe
from .exceptions import FormationError
from .growth import DEFAULT_WINDOWS, annualized_growth, endpoint_years
from .months import Month, format_month, month_key
from .series import ReturnSeries
from .valuation import ValuationInputs, ga_pe

SORTS = ("gape", "pe")
HOLDING_POLICIES = ("rebalance", "buy_and_hold")


@dataclass(frozen=True)
class FormationEvent:
    year: int
    formation_month: int = 3
    windows: Tuple[int, ...] = DEFAULT_WINDOWS
    quantiles: int = 5
    cap_percentile: Optional[float] = None

    def __post_init__(self):
        if self.quantiles < 2:
            raise ValueError("need at least two quantiles")
        if not self.windows:
            raise ValueError("windows must not be empty")
        if self.cap_percentile is not None and not 0 < self.cap_percentile <= 100:
            raise ValueError("cap_percentile must lie in (0, 100]")

    @property
    def as_of(self) -> Month:
        return month_key(self.year, self.formation_month)


@dataclass(frozen=True)
class RankedSecurity:
    security_id: str
    firm_id: str
    metric_value: float
    outcome_class: str  # "finite" or "infinite"
    price: float
    eps: float
    growth: float
    ga_pe: float  # math.inf for infinite outcomes
    market_cap: float

    @property
    def pe(self) -> float:
        return self.price / self.eps


@dataclass
class Portfolio:
    label: str
    holdings: Dict[str, float]

    def total_weight(self) -> float:
        return math.fsum(self.holdings.values())


@dataclass
class PortfolioSet:
    year: int
    sort: str
    portfolios: List[Portfolio]
    window: Optional[int] = None
    cohort_size: int = 0

    @property
    def labels(self) -> List[str]:
        return [p.label for p in self.portfolios]

    def __getitem__(self, label: str) -> Portfolio:
        for p in self.portfolios:
            if p.label == label:
                return p
        raise KeyError(label)


# --------------------------------------------------------------------------- point in time

@dataclass(frozen=True)
class DataAccess:
    """One read made while forming portfolios; ``key`` is a month or fiscal year."""

    formation_year: int
    as_of: Month
    kind: str
    key: int

    @property
    def violates(self) -> bool:
        if self.kind == "earnings":
            return self.key >= self.formation_year
        return self.key > self.as_of


class PointInTimeView:
    """Read-only facade used by formation; optionally logs every read."""

    def __init__(self, universe: Universe, formation_year: int, as_of: Month,
                 access_log: Optional[list] = None):
        self.universe = universe
        self.formation_year = formation_year
        self.as_of = as_of
        self.access_log = access_log

    def _note(self, kind, key):
        if self.access_log is not None:
            self.access_log.append(DataAccess(self.formation_year, self.as_of, kind, key))

    def securities_priced(self, month: Month) -> List[str]:
        self._note("price", month)
        return self.universe.securities_priced_at(month)

    def price(self, security_id: str, month: Month):
        self._note("price", month)
        return self.universe.price(security_id, month)

    def firm_for(self, security_id: str, month: Month) -> Optional[str]:
        self._note("link", month)
        return self.universe.firm_for(security_id, month)

    def delisted_by(self, security_id: str, month: Month) -> bool:
        d = self.universe.delistings.get(security_id)
        if d is None or d.month > month:
            return False
        self._note("delisting", d.month)
        return True

    def fiscal_eps(self, firm_id: str, year: int) -> Optional[float]:
        self._note("earnings", year)
        return self.universe.fiscal_series(firm_id).get(year)


# --------------------------------------------------------------------------- formation

def parent_universe(view: PointInTimeView, cap_percentile: Optional[float] = None) -> List[Tuple[str, str, object]]:
    """Securities investable at formation: priced, linked and not yet delisted.

    With ``cap_percentile`` only the largest ``ceil(pct% * count)`` by
    formation-date market cap are kept (ties broken by security id).
    """
    as_of = view.as_of
    rows = []
    for sid in view.securities_priced(as_of):
        firm = view.firm_for(sid, as_of)
        if firm is None or view.delisted_by(sid, as_of):
            continue
        rec = view.price(sid, as_of)
        rows.append((sid, firm, rec))
    if cap_percentile is not None and cap_percentile < 100:
        keep = math.ceil(cap_percentile / 100.0 * len(rows))
        rows.sort(key=lambda r: (-r[2].market_cap, r[0]))
        rows = sorted(rows[:keep], key=lambda r: r[0])
    return rows


def form_cohort(universe: Universe, event: FormationEvent, window: int, metric: str = "gape",
                access_log: Optional[list] = None) -> List[RankedSecurity]:
    """Rank the eligible pool for one formation year and growth window.

    For ``metric="gape"`` finite outcomes carry their GA-P/E and infinite ones
    ``N_max + P/E_inf`` where ``N_max`` is the largest finite value in this
    cohort.  For ``metric="pe"`` the same pool is keyed by plain P/E.
    """
    if metric not in SORTS:
        raise ValueError(f"metric must be one of {SORTS}")
    view = PointInTimeView(universe, event.year, event.as_of, access_log)
    end_year, start_year = endpoint_years(event.year, window)

    pool = []
    for sid, firm, rec in parent_universe(view, event.cap_percentile):
        e_end = view.fiscal_eps(firm, end_year)
        e_start = view.fiscal_eps(firm, start_year)
        if e_end is None or e_start is None or e_end <= 0 or e_start <= 0:
            continue
        g = annualized_growth(e_end, e_start, window)
        outcome = ga_pe(ValuationInputs(rec.close_price, e_end, g))
        pool.append((sid, firm, rec, e_end, g, outcome))
    if not pool:
        raise FormationError(
            f"empty cohort for formation {format_month(event.as_of)} (window {window})",
            year=event.year)

    finite = [o.n for *_, o in pool if o.finite]
    n_max = max(finite) if finite else 0.0
    cohort = []
    for sid, firm, rec, eps, g, outcome in pool:
        key = outcome.rank_key(n_max) if metric == "gape" else rec.close_price / eps
        cohort.append(RankedSecurity(
            security_id=sid, firm_id=firm, metric_value=key,
            outcome_class="finite" if outcome.finite else "infinite",
            price=rec.close_price, eps=eps, growth=g, ga_pe=outcome.n,
            market_cap=rec.market_cap))
    cohort.sort(key=lambda r: (r.metric_value, r.security_id))
    return cohort


def quantile_labels(q: int) -> List[str]:
    return [f"P{i}" for i in range(1, q + 1)]


def quantile_groups(cohort: Sequence[RankedSecurity], q: int) -> List[List[RankedSecurity]]:
    if len(cohort) < q:
        raise FormationError(f"cohort of {len(cohort)} is smaller than {q} quantiles")
    ranked = sorted(cohort, key=lambda r: (r.metric_value, r.security_id))
    base, extra = divmod(len(ranked), q)
    groups, pos = [], 0
    for i in range(q):
        size = base + (1 if i < extra else 0)
        groups.append(ranked[pos:pos + size])
        pos += size
    return groups


def quantile_assign(cohort: Sequence[RankedSecurity], q: int) -> List[Portfolio]:
    """Equal-weighted quantile portfolios, ``P1`` holding the lowest metric.

    Sizes differ by at most one; the larger portfolios come first.
    """
    return [Portfolio(label, {r.security_id: 1.0 / len(group) for r in group})
            for label, group in zip(quantile_labels(q), quantile_groups(cohort, q))]


def average_holdings(sets: Sequence[PortfolioSet], normalize: bool = True) -> PortfolioSet:
    """Average each labelled portfolio across the per-window sets.

    A security absent from a window's portfolio counts as weight zero there.
    With ``normalize`` the averaged weights are rescaled to sum to one.
    """
    if not sets:
        raise ValueError("no portfolio sets to average")
    labels = sets[0].labels
    for s in sets[1:]:
        if s.labels != labels:
            raise ValueError("portfolio sets have different quantile labels")
    averaged = []
    for label in labels:
        acc: Dict[str, float] = {}
        for s in sets:
            for sid, w in s[label].holdings.items():
                acc[sid] = acc.get(sid, 0.0) + w
        weights = {sid: acc[sid] / len(sets) for sid in sorted(acc)}
        if normalize:
            total = math.fsum(weights.values())
            weights = {sid: w / total for sid, w in weights.items()}
        averaged.append(Portfolio(label, weights))
    return PortfolioSet(sets[0].year, sets[0].sort, averaged, window=None,
                        cohort_size=max(s.cohort_size for s in sets))


# --------------------------------------------------------------------------- tracking

def _month_return(universe: Universe, sid: str, month: Month) -> Tuple[float, bool]:
    """Return for one holding and whether it leaves the portfolio afterwards."""
    d = universe.delistings.get(sid)
    if d is not None and d.month == month:
        return (-1.0 if d.delist_return is None else d.delist_return), True
    r = universe.security_return(sid, month)
    if r is None:
        return -1.0, True
    return r, False


def track_returns(portfolio: Portfolio, start: Month, universe: Universe, months: int = 12,
                  holding: str = "rebalance") -> ReturnSeries:
    """Monthly returns of ``portfolio`` for ``months`` months from ``start``.

    ``rebalance`` restores the formation weights among surviving holdings
    every month; ``buy_and_hold`` lets weights drift with performance.  A
    holding's last month uses its delisting return, or -1 when it disappears
    without one; it is dropped from then on and the proceeds are spread over
    the survivors at the next month boundary.  An emptied portfolio earns 0.
    """
    if holding not in HOLDING_POLICIES:
        raise ValueError(f"holding must be one of {HOLDING_POLICIES}")
    base = dict(portfolio.holdings)
    value = dict(base)
    active = sorted(base)
    out = np.zeros(months)
    for i in range(months):
        if not active:
            continue
        m = start + i
        weights = base if holding == "rebalance" else value
        total = math.fsum(weights[s] for s in active)
        contrib, leaving = [], set()
        for sid in active:
            r, gone = _month_return(universe, sid, m)
            contrib.append(weights[sid] / total * r)
            value[sid] *= 1.0 + r
            if gone:
                leaving.add(sid)
        out[i] = math.fsum(contrib)
        active = [s for s in active if s not in leaving]
    return ReturnSeries(start, out)


# --------------------------------------------------------------------------- backtest

@dataclass(frozen=True)
class BacktestConfig:
    formation_years: Tuple[int, ...]
    windows: Tuple[int, ...] = DEFAULT_WINDOWS
    quantiles: int = 5
    formation_month: int = 3
    holding: str = "rebalance"
    cap_percentile: Optional[float] = None

    def __post_init__(self):
        if not self.formation_years:
            raise ValueError("formation_years must not be empty")
        if not self.windows or any(k < 1 for k in self.windows):
            raise ValueError("windows must be a non-empty set of positive integers")
        if self.holding not in HOLDING_POLICIES:
            raise ValueError(f"holding must be one of {HOLDING_POLICIES}")
        years = tuple(sorted(set(self.formation_years)))
        if years != tuple(range(years[0], years[-1] + 1)):
            raise ValueError("formation_years must be consecutive")
        object.__setattr__(self, "formation_years", years)
        object.__setattr__(self, "windows", tuple(sorted(set(self.windows))))

    def event(self, year: int) -> FormationEvent:
        return FormationEvent(year, self.formation_month, self.windows, self.quantiles,
                              self.cap_percentile)


@dataclass(frozen=True)
class PortfolioStats:
    """Median characteristics of one window's portfolio in one year."""

    year: int
    window: int
    label: str
    size: int
    median_gape: float
    median_pe: float
    median_growth: float


@dataclass
class BacktestResult:
    config: BacktestConfig
    labels: List[str]
    series: Dict[str, Dict[str, ReturnSeries]]
    holdings: Dict[Tuple[str, int], PortfolioSet]
    cohort_sizes: Dict[Tuple[int, int], int]
    formation_stats: List[PortfolioStats] = field(default_factory=list)

    def summary_table(self) -> List[dict]:
        """Average over years of the yearly medians, per window and portfolio.

        Years whose median GA-P/E is infinite are left out of the GA-P/E
        average and counted in ``infinite_years``; if every year is
        infinite the average itself is ``math.inf``.
        """
        rows = []
        for k in self.config.windows:
            for label in self.labels:
                stats = [s for s in self.formation_stats if s.window == k and s.label == label]
                finite = [s.median_gape for s in stats if math.isfinite(s.median_gape)]
                rows.append({
                    "window": k,
                    "portfolio": label,
                    "median_gape": float(np.mean(finite)) if finite else math.inf,
                    "infinite_years": len(stats) - len(finite),
                    "median_pe": float(np.mean([s.median_pe for s in stats])),
                    "median_growth": float(np.mean([s.median_growth for s in stats])),
                    "years": len(stats),
                })
        return rows


def _median(values):
    return float(np.median(np.asarray(values, dtype=float)))


def run_backtest(universe: Universe, config: BacktestConfig,
                 access_log: Optional[list] = None) -> BacktestResult:
    """Form, average and track GA-P/E and P/E sorted portfolios every year.

    Each sort yields one return series per portfolio label covering
    ``12 * len(formation_years)`` contiguous months.
    """
    labels = quantile_labels(config.quantiles)
    parts: Dict[str, Dict[str, List[ReturnSeries]]] = {s: {l: [] for l in labels} for s in SORTS}
    holdings: Dict[Tuple[str, int], PortfolioSet] = {}
    sizes: Dict[Tuple[int, int], int] = {}
    stats: List[PortfolioStats] = []

    for year in config.formation_years:
        event = config.event(year)
        per_sort: Dict[str, List[PortfolioSet]] = {s: [] for s in SORTS}
        for k in config.windows:
            try:
                cohort = form_cohort(universe, event, k, "gape", access_log)
            except FormationError as exc:
                raise FormationError(f"formation year {year}: {exc}", year=year) from exc
            sizes[(year, k)] = len(cohort)
            for sort in SORTS:
                if sort == "gape":
                    ranked = cohort
                else:
                    ranked = sorted(cohort, key=lambda r: (r.pe, r.security_id))
                    ranked = [_rekey(r, r.pe) for r in ranked]
                try:
                    groups = quantile_groups(ranked, config.quantiles)
                except FormationError as exc:
                    raise FormationError(f"formation year {year}: {exc}", year=year) from exc
                ports = [Portfolio(l, {r.security_id: 1.0 / len(g) for r in g})
                         for l, g in zip(labels, groups)]
                per_sort[sort].append(PortfolioSet(year, sort, ports, k, len(cohort)))
                if sort == "gape":
                    for label, group in zip(labels, groups):
                        stats.append(PortfolioStats(
                            year, k, label, len(group),
                            _median([r.ga_pe for r in group]),
                            _median([r.pe for r in group]),
                            _median([r.growth for r in group])))
        start = event.as_of + 1
        for sort in SORTS:
            averaged = average_holdings(per_sort[sort])
            holdings[(sort, year)] = averaged
            for p in averaged.portfolios:
                parts[sort][p.label].append(
                    track_returns(p, start, universe, 12, config.holding))

    series = {sort: {label: ReturnSeries.concat(parts[sort][label]) for label in labels}
              for sort in SORTS}
    return BacktestResult(config, labels, series, holdings, sizes, stats)


def _rekey(r: RankedSecurity, value: float) -> RankedSecurity:
    return RankedSecurity(r.security_id, r.firm_id, value, r.outcome_class, r.price, r.eps,
                          r.growth, r.ga_pe, r.market_cap)


def feasible_formation_years(universe: Universe, windows=DEFAULT_WINDOWS,
                             formation_month: int = 3) -> Tuple[int, ...]:
    """Consecutive years with enough earnings history and twelve tracked months.

    A year qualifies when fiscal year ``n - max(windows) - 1`` is on file for
    some firm, the formation month is priced, and factor data covers the
    following twelve months.
    """
    fiscal = universe.fiscal_year_range()
    fmonths = universe.factor_months()
    if fiscal is None or not fmonths:
        return ()
    first_fy = fiscal[0]
    covered = set(fmonths)
    years = []
    for year in range(first_fy + max(windows) + 1, fiscal[1] + 2):
        as_of = month_key(year, formation_month)
        if not universe.securities_priced_at(as_of):
            continue
        if all(as_of + i in covered for i in range(1, 13)):
            years.append(year)
    # keep the longest leading consecutive run
    run = years[:1]
    for y in years[1:]:
        if y != run[-1] + 1:
            break
        run.append(y)
    return tuple(run)
