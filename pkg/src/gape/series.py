"""Monthly return series on a contiguous calendar-month axis."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .months import Month, format_month


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Returns for ``len(values)`` consecutive months beginning at ``start``.

    Contiguity holds by construction; the month of ``values[i]`` is
    ``start + i``.
    """

    start: Month
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(values < -1):
            raise ValueError("returns below -1 are impossible")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        return (isinstance(other, ReturnSeries) and self.start == other.start
                and np.array_equal(self.values, other.values))

    @property
    def months(self) -> List[Month]:
        return list(range(self.start, self.start + len(self.values)))

    @property
    def end(self) -> Month:
        return self.start + len(self.values) - 1

    def same_months(self, other: "ReturnSeries") -> bool:
        return self.start == other.start and len(self) == len(other)

    def labels(self) -> List[str]:
        return [format_month(m) for m in self.months]

    @classmethod
    def concat(cls, parts: Sequence["ReturnSeries"]) -> "ReturnSeries":
        if not parts:
            raise ValueError("nothing to concatenate")
        for a, b in zip(parts, parts[1:]):
            if b.start != a.end + 1:
                raise ValueError(
                    f"series not contiguous: {format_month(a.end)} then {format_month(b.start)}")
        return cls(parts[0].start, np.concatenate([p.values for p in parts]))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> "ReturnSeries":
        pairs = sorted(pairs)
        months = [m for m, _ in pairs]
        if months != list(range(months[0], months[0] + len(months))):
            raise ValueError("months must be contiguous and strictly increasing")
        return cls(months[0], np.array([r for _, r in pairs]))
