"""Closed-form valuation measures built around earnings payback periods.

The central quantity is the growth-adjusted P/E (GA-P/E): the real number of
years ``N`` after which earnings growing at a constant rate ``g`` from a
trailing figure ``E`` have cumulatively repaid the share price ``P``::

    P = E (1 + g) ((1 + g)**N - 1) / g
    N = log(1 + g / (1 + g) * P / E) / log(1 + g)

When ``g`` is at or below ``-E / (P + E)`` the geometric series of future
earnings never reaches ``P`` and the payback period is infinite.  Such
securities are ranked by the fraction of the price that *is* repaid.

All functions are pure and operate on 64-bit floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .exceptions import DivergenceError, InputError, UndefinedMeasureError

#: Below this absolute growth the closed form is 0/0; use the g -> 0 limit P/E.
ZERO_GROWTH_TOL = 1e-9


def _finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise InputError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ValuationInputs:
    """Price, trailing annual EPS and annual fractional growth for one security."""

    price: float
    eps: float
    growth: float

    def __post_init__(self):
        price = _finite("price", self.price)
        eps = _finite("eps", self.eps)
        growth = _finite("growth", self.growth)
        if price <= 0:
            raise InputError(f"price must be positive, got {price}")
        if eps <= 0:
            raise InputError(f"eps must be positive, got {eps}")
        if growth <= -1:
            raise InputError(f"growth must exceed -1, got {growth}")
        object.__setattr__(self, "price", price)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "growth", growth)

    @property
    def pe(self) -> float:
        return self.price / self.eps


@dataclass(frozen=True)
class GaPeOutcome:
    """Result of :func:`ga_pe`.

    A finite outcome has ``n`` set to the payback period in years and
    ``payback_proportion`` left as ``None``.  An infinite outcome has
    ``n == math.inf`` and carries the proportion of the price that total
    future earnings repay; its ranking key depends on the cohort and is
    obtained from :meth:`rank_key`.
    """

    n: float
    payback_proportion: Optional[float] = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.n)

    def rank_key(self, n_max: float) -> float:
        if self.finite:
            return self.n
        return n_max + 1.0 / self.payback_proportion


@dataclass(frozen=True)
class GordonInputs:
    payout_ratio: float
    cost_of_equity: float
    growth: float

    def __post_init__(self):
        for name in ("payout_ratio", "cost_of_equity", "growth"):
            _finite(name, getattr(self, name))
        if not 0 < self.payout_ratio <= 1:
            raise InputError(f"payout_ratio must lie in (0, 1], got {self.payout_ratio}")
        if self.cost_of_equity <= 0:
            raise InputError(f"cost_of_equity must be positive, got {self.cost_of_equity}")


def cumulative_earnings(eps: float, growth: float, years: float) -> float:
    """Total earnings over the next ``years`` years, first year at ``eps*(1+g)``.

    ``years`` may be fractional; the geometric-series closed form is used
    throughout, with the linear limit ``eps * years`` near zero growth.
    """
    if years <= 0:
        raise InputError(f"years must be positive, got {years}")
    if growth <= -1:
        raise InputError(f"growth must exceed -1, got {growth}")
    if abs(growth) < ZERO_GROWTH_TOL:
        return eps * years
    return eps * (1.0 + growth) * math.expm1(years * math.log1p(growth)) / growth


def solvency_bound(price: float, eps: float) -> float:
    """Growth floor ``-E/(P+E)``; at or below it the payback period is infinite."""
    return -eps / (price + eps)


def _is_infinite(inputs: ValuationInputs) -> bool:
    # The second test catches bound rounding: it is the sign of the log argument.
    g = inputs.growth
    if g >= 0:
        return False
    return (g <= solvency_bound(inputs.price, inputs.eps)
            or inputs.eps * (1.0 + g) <= -g * inputs.price)


def ga_pe(inputs: ValuationInputs) -> GaPeOutcome:
    """Growth-adjusted P/E of ``inputs``.

    >>> round(ga_pe(ValuationInputs(10, 1, 0.10)).n, 4)
    6.7845
    """
    g = inputs.growth
    if abs(g) < ZERO_GROWTH_TOL:
        return GaPeOutcome(inputs.price / inputs.eps)
    if _is_infinite(inputs):
        return GaPeOutcome(math.inf, payback_proportion(inputs))
    n = math.log1p(g / (1.0 + g) * inputs.pe) / math.log1p(g)
    return GaPeOutcome(n)


def payback_proportion(inputs: ValuationInputs) -> float:
    """Fraction ``E_inf / P`` of the price repaid by all future earnings.

    Only defined where the payback period is infinite.
    """
    if not _is_infinite(inputs):
        raise InputError(
            "payback proportion is only defined for growth at or below "
            f"{solvency_bound(inputs.price, inputs.eps):.6g}; got {inputs.growth}"
        )
    g = inputs.growth
    return min(1.0, inputs.eps * (1.0 + g) / (-g * inputs.price))


def n_star(inputs: ValuationInputs, n_max: float) -> float:
    """Ranking key for an infinite GA-P/E: ``n_max + P / E_inf``."""
    return n_max + 1.0 / payback_proportion(inputs)


def peg_ratio(pe: float, growth_percent: float) -> float:
    if growth_percent <= 0:
        raise UndefinedMeasureError(
            f"PEG ratio is undefined for non-positive growth ({growth_percent}%)"
        )
    return pe / growth_percent


def peg_payback_period(inputs: ValuationInputs) -> float:
    """Smallest whole number of years whose cumulative earnings reach the price.

    Returns an ``int``, or ``math.inf`` when the price is never repaid.
    """
    outcome = ga_pe(inputs)
    if not outcome.finite:
        return math.inf
    price, eps, g = inputs.price, inputs.eps, inputs.growth
    years = max(1, math.ceil(outcome.n))
    # the closed-form root can land a hair either side of an integer
    while years > 1 and cumulative_earnings(eps, g, years - 1) >= price:
        years -= 1
    while cumulative_earnings(eps, g, years) < price:
        years += 1
    return years


def gordon_fair_pe(inputs: GordonInputs) -> float:
    """Dividend-discount fair P/E, ``(1 + g) * payout / (r - g)``."""
    r, g = inputs.cost_of_equity, inputs.growth
    if r <= g:
        raise DivergenceError(f"cost of equity {r} must exceed growth {g}")
    return (1.0 + g) * inputs.payout_ratio / (r - g)
