"""Seeded synthetic universes with planted valuation strata and factor models.

Every firm belongs to one of ``len(strata)`` strata.  A stratum fixes

* a band of GA-P/E values (or an infinite-payback regime) that the firm's
  March price is set to hit every year, given its constant earnings growth;
* the three-factor model generating the firm's monthly total returns.

Because growth is constant per firm, the growth estimate over any window
reproduces the planted rate, and GA-P/E strata are strictly separated so
quantile sorts recover the strata.  The planted parameters are written to
``manifest.json`` so that tests can compare estimates against them.

Closing prices are anchored to the planted P/E each March and interpolated
geometrically in between; total returns come from the factor model.  The gap
between the two is attributed to distributions.
"""
from __future__ import annotations

import calendar
import datetime as dt
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import (Datasets, DelistingRecord, FactorMonth, LinkRecord, MonthlyPriceRecord,
                   atomic_write_text, write_datasets)
from .exceptions import InputError
from .growth import QuarterlyEarningsRecord
from .months import format_month, month_key, year_of
from .valuation import cumulative_earnings


@dataclass(frozen=True)
class StratumPlant:
    """Valuation regime and factor loadings shared by a stratum's firms.

    ``gape_range`` is ``None`` for the infinite-payback stratum, whose P/E is
    then drawn from ``pe_range`` with growth below the solvency bound.
    """

    growth_range: Tuple[float, float]
    gape_range: Optional[Tuple[float, float]]
    alpha: float
    beta: float
    b_hml: float
    b_smb: float
    pe_range: Tuple[float, float] = (8.0, 20.0)


DEFAULT_STRATA = (
    StratumPlant((0.15, 0.35), (2.0, 4.0), 0.0100, 1.00, 0.30, 0.60),
    StratumPlant((0.06, 0.15), (5.0, 7.0), 0.0075, 0.95, 0.30, 0.50),
    StratumPlant((0.00, 0.06), (8.0, 11.0), 0.0050, 0.90, 0.25, 0.45),
    StratumPlant((-0.04, 0.02), (13.0, 18.0), 0.0025, 0.90, 0.30, 0.50),
    StratumPlant((-0.25, -0.15), None, 0.0000, 1.00, 0.35, 0.60),
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_firms: int = 200
    start_year: int = 1990
    n_months: int = 312
    history_years: int = 4
    max_window: int = 3
    noise: float = 0.05
    turnover: float = 0.0
    cap_log_mean: float = 20.0
    cap_log_sd: float = 1.5
    market_mean: float = 0.006
    market_sd: float = 0.045
    hml_mean: float = 0.003
    hml_sd: float = 0.03
    smb_mean: float = 0.002
    smb_sd: float = 0.03
    risk_free: float = 0.003
    strata: Tuple[StratumPlant, ...] = DEFAULT_STRATA

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticSpec":
        raw = dict(raw)
        if "strata" in raw:
            raw["strata"] = tuple(
                StratumPlant(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in s.items()})
                for s in raw["strata"])
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown synthetic spec keys: {', '.join(sorted(unknown))}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def check(self) -> None:
        if self.n_firms < len(self.strata):
            raise InputError("need at least one firm per stratum")
        if self.n_months < 15:
            raise InputError("month span must cover one formation month plus twelve months of returns")
        if self.history_years < 0:
            raise InputError("history_years must be non-negative")
        fiscal_years = self.history_years + math.ceil(self.n_months / 12)
        if fiscal_years < self.max_window + 2:
            raise InputError(
                f"{fiscal_years} fiscal years of earnings cannot support a {self.max_window}-year "
                "growth window")
        if not 0.0 <= self.turnover <= 1.0:
            raise InputError("turnover must lie in [0, 1]")
        if self.noise < 0:
            raise InputError("noise must be non-negative")

    @property
    def first_month(self) -> int:
        return month_key(self.start_year, 1)

    @property
    def last_month(self) -> int:
        return self.first_month + self.n_months - 1


@dataclass
class SyntheticData:
    datasets: Datasets
    manifest: dict

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        write_datasets(self.datasets, out_dir)
        atomic_write_text(out_dir / "manifest.json",
                          json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")
        return out_dir


@dataclass
class _Firm:
    firm_id: str
    security_id: str
    stratum: int
    growth: float
    base_eps: float
    fiscal_month: int
    log_cap: float
    listed: int
    delisted: Optional[int] = None
    delist_kind: str = "none"
    delist_return: Optional[float] = None
    pe_by_year: Dict[int, float] = field(default_factory=dict)


def _quarter_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, calendar.monthrange(year, month)[1])


def _draw_firm(rng, spec, index, stratum, listed):
    plant = spec.strata[stratum]
    g = float(rng.uniform(*plant.growth_range))
    firm = _Firm(
        firm_id=f"F{index:05d}", security_id=f"S{index:05d}", stratum=stratum, growth=g,
        base_eps=float(rng.uniform(0.5, 5.0)), fiscal_month=int(rng.choice([10, 11, 12])),
        log_cap=float(rng.normal(spec.cap_log_mean, spec.cap_log_sd)), listed=listed)
    for year in range(spec.start_year, year_of(spec.last_month) + 2):
        if plant.gape_range is None:
            pe = float(rng.uniform(*plant.pe_range))
            if g > -1.0 / (pe + 1.0):
                raise InputError("infinite stratum growth must lie below the solvency bound")
        else:
            pe = cumulative_earnings(1.0, g, float(rng.uniform(*plant.gape_range)))
        firm.pe_by_year[year] = pe
    return firm


def generate_synthetic(spec: SyntheticSpec, seed: int) -> SyntheticData:
    """Generate the five datasets plus a manifest; deterministic in ``seed``."""
    spec.check()
    rng = np.random.default_rng(seed)
    first, last = spec.first_month, spec.last_month
    months = np.arange(first, last + 1)
    n_strata = len(spec.strata)

    rf = np.full(len(months), spec.risk_free)
    mkt_excess = rng.normal(spec.market_mean, spec.market_sd, len(months))
    hml = rng.normal(spec.hml_mean, spec.hml_sd, len(months))
    smb = rng.normal(spec.smb_mean, spec.smb_sd, len(months))
    factors = [FactorMonth(int(m), float(rf[i] + mkt_excess[i]), float(rf[i]), float(hml[i]),
                           float(smb[i]))
               for i, m in enumerate(months)]

    firms: List[_Firm] = []
    next_index = 1
    for slot in range(spec.n_firms):
        stratum = slot % n_strata
        firm = _draw_firm(rng, spec, next_index, stratum, first)
        next_index += 1
        firms.append(firm)
        if rng.uniform() < spec.turnover and spec.n_months > 36:
            # vanishes mid-span; a same-stratum newcomer lists the month after
            end = int(rng.integers(first + 12, last - 23))
            firm.delisted = end
            firm.delist_kind = str(rng.choice(["return", "blank", "missing"]))
            if firm.delist_kind == "return":
                firm.delist_return = float(rng.uniform(-0.6, 0.1))
            newcomer = _draw_firm(rng, spec, next_index, stratum, end + 1)
            next_index += 1
            firms.append(newcomer)

    datasets = Datasets(factors=factors)
    y0 = spec.start_year - spec.history_years
    for firm in firms:
        plant = spec.strata[firm.stratum]
        life_end = firm.delisted if firm.delisted is not None else last
        fiscal_last = year_of(life_end) if firm.delisted is not None else year_of(last)
        for year in range(y0, fiscal_last + 1):
            annual = firm.base_eps * (1.0 + firm.growth) ** (year - y0)
            quarter = annual / 4.0
            for back in (9, 6, 3, 0):
                qm = firm.fiscal_month - back
                datasets.earnings.append(
                    QuarterlyEarningsRecord(firm.firm_id, _quarter_end(year, qm), quarter))

        def anchor(year):
            eps_prev = firm.base_eps * (1.0 + firm.growth) ** (year - 1 - y0)
            return firm.pe_by_year[year] * eps_prev

        shares = None
        noise = rng.normal(0.0, 1.0, len(months)) * spec.noise
        for i, m in enumerate(months):
            m = int(m)
            if m < firm.listed or m > life_end:
                continue
            year = year_of(m)
            march = month_key(year, 3)
            if m >= march:
                lo_month, lo_year = march, year
            else:
                lo_month, lo_year = month_key(year - 1, 3), year - 1
            if lo_year < spec.start_year:
                close = anchor(spec.start_year)
            else:
                p0, p1 = anchor(lo_year), anchor(lo_year + 1)
                close = p0 * (p1 / p0) ** ((m - lo_month) / 12.0)
            if shares is None:
                shares = math.exp(firm.log_cap) / close
            ret = (rf[i] + plant.alpha + plant.beta * mkt_excess[i] + plant.b_hml * hml[i]
                   + plant.b_smb * smb[i] + noise[i])
            ret = max(ret, -0.95)
            datasets.prices.append(
                MonthlyPriceRecord(firm.security_id, m, float(close), float(ret),
                                   float(shares * close)))
        valid_to = None
        if firm.delisted is not None:
            valid_to = firm.delisted
            if firm.delist_kind != "missing":
                datasets.delistings.append(
                    DelistingRecord(firm.security_id, firm.delisted, firm.delist_return))
        datasets.links.append(LinkRecord(firm.firm_id, firm.security_id, firm.listed, valid_to))

    datasets.prices.sort(key=lambda r: (r.security_id, r.month))
    datasets.earnings.sort(key=lambda r: (r.firm_id, r.quarter_end))

    manifest = {
        "seed": seed,
        "spec": spec.to_dict(),
        "strata": [asdict(p) for p in spec.strata],
        "firms": {
            f.firm_id: {
                "security_id": f.security_id,
                "stratum": f.stratum,
                "growth": f.growth,
                "listed": format_month(f.listed),
                "delisted": None if f.delisted is None else format_month(f.delisted),
                "delisting": f.delist_kind,
            }
            for f in firms
        },
    }
    return SyntheticData(datasets, manifest)
