"""Calendar-month keys.

Months are plain integers counting from year 0 (``year * 12 + month - 1``),
so arithmetic such as "twelve months after formation" is ordinary addition.
"""
from __future__ import annotations

import datetime as _dt

Month = int


def month_key(year: int, month: int) -> Month:
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range: {month}")
    return year * 12 + month - 1


def year_of(key: Month) -> int:
    return key // 12


def month_of(key: Month) -> int:
    return key % 12 + 1


def parse_month(text: str) -> Month:
    """Parse ``YYYY-MM`` (a trailing ``-DD`` is tolerated and ignored)."""
    parts = text.strip().split("-")
    if len(parts) not in (2, 3):
        raise ValueError(f"not a year-month: {text!r}")
    return month_key(int(parts[0]), int(parts[1]))


def format_month(key: Month) -> str:
    return f"{year_of(key):04d}-{month_of(key):02d}"


def date_month(day: _dt.date) -> Month:
    return month_key(day.year, day.month)
