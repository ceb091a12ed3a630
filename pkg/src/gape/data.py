"""Loading, validating and linking the five input datasets.

Expected files (UTF-8 CSV with a header row, columns in any order)::

    prices.csv              security_id, month, close_price, total_return, market_cap
    earnings_quarterly.csv  firm_id, quarter_end, eps
    delistings.csv          security_id, month, delist_return
    links.csv               firm_id, security_id, valid_from, valid_to
    factors.csv             month, market_return, risk_free, hml, smb

Months are ``YYYY-MM``; ``quarter_end`` is an ISO-8601 date.  Blank
``delist_return`` means no delisting return is available and blank
``valid_to`` leaves a link open-ended.  EPS and prices must already be on a
consistent, split-adjusted share basis.

Problems come in two grades.  Hard errors (schema violations, duplicate keys,
overlapping links) raise :class:`~gape.exceptions.DataError`.  Soft findings
(orphan securities, gap months, misplaced delistings) are collected in
:class:`ValidationReport` and the data still loads.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from .exceptions import DataError
from .growth import FiscalEarningsSeries, QuarterlyEarningsRecord, align_fiscal_years
from .months import Month, format_month, parse_month

RETURNS_MODES = ("total", "price_only")

FILES = {
    "prices": "prices.csv",
    "earnings": "earnings_quarterly.csv",
    "delistings": "delistings.csv",
    "links": "links.csv",
    "factors": "factors.csv",
}


@dataclass(frozen=True)
class MonthlyPriceRecord:
    security_id: str
    month: Month
    close_price: float
    total_return: float
    market_cap: float


@dataclass(frozen=True)
class DelistingRecord:
    security_id: str
    month: Month
    delist_return: Optional[float]


@dataclass(frozen=True)
class LinkRecord:
    firm_id: str
    security_id: str
    valid_from: Month
    valid_to: Optional[Month] = None

    def covers(self, month: Month) -> bool:
        return self.valid_from <= month and (self.valid_to is None or month <= self.valid_to)


@dataclass(frozen=True)
class FactorMonth:
    month: Month
    market_return: float
    risk_free: float
    hml: float
    smb: float


@dataclass
class Datasets:
    """The five raw record lists, in the order they were read or generated."""

    prices: List[MonthlyPriceRecord] = field(default_factory=list)
    earnings: List[QuarterlyEarningsRecord] = field(default_factory=list)
    delistings: List[DelistingRecord] = field(default_factory=list)
    links: List[LinkRecord] = field(default_factory=list)
    factors: List[FactorMonth] = field(default_factory=list)


@dataclass
class ValidationReport:
    orphan_securities: List[str] = field(default_factory=list)
    gap_months: List[Tuple[str, Month]] = field(default_factory=list)
    delisting_mismatches: List[Tuple[str, Month]] = field(default_factory=list)
    factor_gaps: List[Month] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.orphan_securities or self.gap_months
                    or self.delisting_mismatches or self.factor_gaps)

    def lines(self) -> List[str]:
        out = [f"orphan security {sid}: priced but never linked to a firm"
               for sid in self.orphan_securities]
        out += [f"gap month {format_month(m)} for security {sid}" for sid, m in self.gap_months]
        out += [f"delisting of {sid} at {format_month(m)} is not its last price month"
                for sid, m in self.delisting_mismatches]
        out += [f"factors missing month {format_month(m)}" for m in self.factor_gaps]
        return out


@dataclass(frozen=True)
class SecurityView:
    """A security's price record for one month together with its linked firm."""

    price: MonthlyPriceRecord
    firm_id: str
    earnings: FiscalEarningsSeries


# --------------------------------------------------------------------------- parsing

def _real(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _optional(parse):
    def inner(text):
        return None if text.strip() == "" else parse(text)
    return inner


def _date(text):
    return dt.date.fromisoformat(text.strip())


def _ident(text):
    text = text.strip()
    if not text:
        raise ValueError("empty identifier")
    return text


_SCHEMAS: Dict[str, Dict[str, Callable]] = {
    "prices": {"security_id": _ident, "month": parse_month, "close_price": _real,
               "total_return": _real, "market_cap": _real},
    "earnings": {"firm_id": _ident, "quarter_end": _date, "eps": _real},
    "delistings": {"security_id": _ident, "month": parse_month,
                   "delist_return": _optional(_real)},
    "links": {"firm_id": _ident, "security_id": _ident, "valid_from": parse_month,
              "valid_to": _optional(parse_month)},
    "factors": {"month": parse_month, "market_return": _real, "risk_free": _real,
                "hml": _real, "smb": _real},
}

_RECORD_TYPES = {
    "prices": MonthlyPriceRecord,
    "earnings": QuarterlyEarningsRecord,
    "delistings": DelistingRecord,
    "links": LinkRecord,
    "factors": FactorMonth,
}


def _row_checks(name, rec) -> Optional[str]:
    if name == "prices":
        if rec.close_price <= 0:
            return "close_price must be positive"
        if rec.total_return <= -1:
            return "total_return must exceed -1"
        if rec.market_cap <= 0:
            return "market_cap must be positive"
    elif name == "delistings":
        if rec.delist_return is not None and rec.delist_return < -1:
            return "delist_return must be at least -1"
    elif name == "links":
        if rec.valid_to is not None and rec.valid_to < rec.valid_from:
            return "valid_to precedes valid_from"
    return None


def _read_table(name: str, stream, label: str):
    """Parse one CSV stream into records, returning ``(records, line_numbers)``."""
    schema = _SCHEMAS[name]
    reader = csv.DictReader(stream)
    missing = [c for c in schema if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{label}: missing columns {', '.join(missing)}")
    records, lines, problems = [], [], []
    for row in reader:
        line = reader.line_num
        try:
            values = {col: parse(row[col] or "") for col, parse in schema.items()}
            rec = _RECORD_TYPES[name](**values)
        except (ValueError, TypeError) as exc:
            problems.append(f"{label}:{line}: {exc}")
            continue
        complaint = _row_checks(name, rec)
        if complaint:
            problems.append(f"{label}:{line}: {complaint}")
            continue
        records.append(rec)
        lines.append(line)
    if problems:
        raise DataError(f"{label}: schema violations", problems)
    return records, lines


def _duplicates(label, keys, lines, describe):
    seen, problems = {}, []
    for key, line in zip(keys, lines):
        if key in seen:
            problems.append(f"{label}: {describe(key)} on lines {seen[key]} and {line}")
        else:
            seen[key] = line
    return problems


# --------------------------------------------------------------------------- universe

class Universe:
    """Immutable, linked view over the five datasets.

    Use :func:`load_and_validate` to build one from files or
    :meth:`from_datasets` to build one from in-memory records.
    """

    def __init__(self, datasets: Datasets, report: ValidationReport,
                 returns_mode: str = "total"):
        if returns_mode not in RETURNS_MODES:
            raise ValueError(f"returns_mode must be one of {RETURNS_MODES}")
        self.datasets = datasets
        self.report = report
        self.returns_mode = returns_mode

        self._prices: Dict[str, Dict[Month, MonthlyPriceRecord]] = {}
        for rec in datasets.prices:
            self._prices.setdefault(rec.security_id, {})[rec.month] = rec
        self._price_months = {sid: sorted(rows) for sid, rows in self._prices.items()}
        self._by_month: Dict[Month, List[str]] = {}
        for sid, months in self._price_months.items():
            for m in months:
                self._by_month.setdefault(m, []).append(sid)
        for sids in self._by_month.values():
            sids.sort()

        self._returns: Dict[str, Dict[Month, float]] = {}
        for sid, rows in self._prices.items():
            if returns_mode == "total":
                self._returns[sid] = {m: r.total_return for m, r in rows.items()}
            else:
                self._returns[sid] = {
                    m: (r.close_price / rows[m - 1].close_price - 1.0) if m - 1 in rows
                    else r.total_return
                    for m, r in rows.items()
                }

        self.fiscal: Dict[str, FiscalEarningsSeries] = align_fiscal_years(datasets.earnings)
        self.delistings: Dict[str, DelistingRecord] = {d.security_id: d for d in datasets.delistings}
        self._links: Dict[str, List[LinkRecord]] = {}
        for link in datasets.links:
            self._links.setdefault(link.security_id, []).append(link)
        for links in self._links.values():
            links.sort(key=lambda l: l.valid_from)
        self._link_starts = {sid: [l.valid_from for l in ls] for sid, ls in self._links.items()}
        self.factors: Dict[Month, FactorMonth] = {f.month: f for f in datasets.factors}

    @classmethod
    def from_datasets(cls, datasets: Datasets, returns_mode: str = "total") -> "Universe":
        report = validate(datasets)
        return cls(datasets, report, returns_mode)

    # -- lookups -----------------------------------------------------------------

    @property
    def security_ids(self) -> List[str]:
        return sorted(self._prices)

    def price(self, security_id: str, month: Month) -> Optional[MonthlyPriceRecord]:
        return self._prices.get(security_id, {}).get(month)

    def security_return(self, security_id: str, month: Month) -> Optional[float]:
        """Month return under the configured returns mode, or ``None`` if unpriced."""
        return self._returns.get(security_id, {}).get(month)

    def securities_priced_at(self, month: Month) -> List[str]:
        return list(self._by_month.get(month, ()))

    def price_months(self, security_id: str) -> List[Month]:
        return list(self._price_months.get(security_id, ()))

    def last_price_month(self, security_id: str) -> Optional[Month]:
        months = self._price_months.get(security_id)
        return months[-1] if months else None

    def firm_for(self, security_id: str, month: Month) -> Optional[str]:
        starts = self._link_starts.get(security_id)
        if not starts:
            return None
        i = bisect.bisect_right(starts, month) - 1
        if i < 0:
            return None
        link = self._links[security_id][i]
        return link.firm_id if link.covers(month) else None

    def fiscal_series(self, firm_id: str) -> FiscalEarningsSeries:
        return self.fiscal.get(firm_id) or FiscalEarningsSeries(firm_id)

    def security_record_at(self, security_id: str, month: Month) -> Optional[SecurityView]:
        rec = self.price(security_id, month)
        if rec is None:
            return None
        firm = self.firm_for(security_id, month)
        if firm is None:
            return None
        return SecurityView(rec, firm, self.fiscal_series(firm))

    def factor_months(self) -> List[Month]:
        return sorted(self.factors)

    def fiscal_year_range(self) -> Optional[Tuple[int, int]]:
        years = [y for s in self.fiscal.values() for y in s.annual_eps]
        return (min(years), max(years)) if years else None


def validate(datasets: Datasets, lines: Optional[Mapping[str, List[int]]] = None) -> ValidationReport:
    """Check cross-record invariants; raise on hard errors, report soft ones."""
    def line_list(name, records):
        if lines and name in lines:
            return lines[name]
        return list(range(2, len(records) + 2))

    problems = []
    problems += _duplicates(
        FILES["prices"], [(r.security_id, r.month) for r in datasets.prices],
        line_list("prices", datasets.prices),
        lambda k: f"duplicate row for security {k[0]} month {format_month(k[1])}")
    problems += _duplicates(
        FILES["earnings"], [(r.firm_id, r.quarter_end) for r in datasets.earnings],
        line_list("earnings", datasets.earnings),
        lambda k: f"duplicate quarter {k[1]} for firm {k[0]}")
    problems += _duplicates(
        FILES["delistings"], [r.security_id for r in datasets.delistings],
        line_list("delistings", datasets.delistings),
        lambda k: f"more than one delisting for security {k}")
    problems += _duplicates(
        FILES["factors"], [r.month for r in datasets.factors],
        line_list("factors", datasets.factors),
        lambda k: f"duplicate factor month {format_month(k)}")

    link_lines = line_list("links", datasets.links)
    by_sec: Dict[str, List[Tuple[LinkRecord, int]]] = {}
    for link, line in zip(datasets.links, link_lines):
        by_sec.setdefault(link.security_id, []).append((link, line))
    for sid, entries in by_sec.items():
        entries.sort(key=lambda e: e[0].valid_from)
        for (a, la), (b, lb) in zip(entries, entries[1:]):
            if a.valid_to is None or a.valid_to >= b.valid_from:
                problems.append(
                    f"{FILES['links']}: overlapping links for security {sid} on lines {la} and {lb}")
    if problems:
        raise DataError("input data failed validation", problems)

    report = ValidationReport()
    price_months: Dict[str, List[Month]] = {}
    for rec in datasets.prices:
        price_months.setdefault(rec.security_id, []).append(rec.month)
    for sid in sorted(price_months):
        months = sorted(price_months[sid])
        if sid not in by_sec:
            report.orphan_securities.append(sid)
        present = set(months)
        report.gap_months += [(sid, m) for m in range(months[0], months[-1] + 1) if m not in present]
    for d in sorted(datasets.delistings, key=lambda d: d.security_id):
        months = price_months.get(d.security_id)
        if not months or max(months) != d.month:
            report.delisting_mismatches.append((d.security_id, d.month))
    fmonths = sorted(f.month for f in datasets.factors)
    if fmonths:
        present = set(fmonths)
        report.factor_gaps = [m for m in range(fmonths[0], fmonths[-1] + 1) if m not in present]
    return report


Source = Union[str, os.PathLike, Mapping[str, Union[str, os.PathLike, io.TextIOBase]]]


def load_and_validate(source: Source, returns_mode: str = "total") -> Universe:
    """Read the five datasets from a directory (or a name -> path/stream map)."""
    if isinstance(source, Mapping):
        entries = dict(source)
    else:
        base = Path(source)
        entries = {name: base / fname for name, fname in FILES.items()}
    missing = [n for n in FILES if n not in entries]
    if missing:
        raise DataError(f"missing datasets: {', '.join(missing)}")

    datasets, lines = Datasets(), {}
    for name in FILES:
        entry = entries[name]
        if hasattr(entry, "read"):
            label = getattr(entry, "name", FILES[name])
            records, ln = _read_table(name, entry, str(label))
        else:
            path = Path(entry)
            if not path.exists():
                raise DataError(f"missing input file {path}")
            with open(path, newline="", encoding="utf-8") as fh:
                records, ln = _read_table(name, fh, path.name)
        setattr(datasets, name, records)
        lines[name] = ln
    report = validate(datasets, lines)
    return Universe(datasets, report, returns_mode)


# --------------------------------------------------------------------------- writing

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, dt.date):
        return value.isoformat()
    return str(value)


def _rows(name, records) -> Iterable[list]:
    for rec in records:
        row = []
        for col in _SCHEMAS[name]:
            value = getattr(rec, col)
            if col in ("month", "valid_from", "valid_to") and value is not None:
                value = format_month(value)
            row.append(_fmt(value))
        yield row


def atomic_write_text(path: Union[str, os.PathLike], text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: List[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_datasets(datasets: Datasets, out_dir: Union[str, os.PathLike]) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {}
    for name, fname in FILES.items():
        text = csv_text(list(_SCHEMAS[name]), _rows(name, getattr(datasets, name)))
        atomic_write_text(out_dir / fname, text)
        paths[name] = out_dir / fname
    return paths
