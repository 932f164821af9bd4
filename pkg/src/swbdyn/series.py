"""Date-indexed daily series and panel algebra.

Values are either a float or ``None`` (missing). Missingness is always an
explicit state: transforms propagate it and never impute silently.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats


class DegenerateSeriesError(ValueError):
    """Raised when an operation is undefined on the data (e.g. zero variance)."""


def _as_value_tuple(values: Iterable[float | None]) -> tuple[float | None, ...]:
    out: list[float | None] = []
    for v in values:
        if v is None:
            out.append(None)
            continue
        f = float(v)
        if math.isnan(f):
            raise ValueError("NaN is not a value; use None for missing")
        out.append(f)
    return tuple(out)


@dataclass(frozen=True)
class DailySeries:
    """A named series of daily observations with explicit missing slots.

    Invariants: dates strictly increasing, one slot per date.
    """

    name: str
    dates: tuple[dt.date, ...]
    values: tuple[float | None, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "values", _as_value_tuple(self.values))
        if len(self.dates) != len(self.values):
            raise ValueError(f"{self.name}: {len(self.dates)} dates vs {len(self.values)} values")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise ValueError(f"{self.name}: dates must be strictly increasing ({a!s} >= {b!s})")

    def __len__(self) -> int:
        return len(self.dates)

    def value_array(self) -> np.ndarray:
        """Float array with NaN standing in for missing (internal use only)."""
        return np.array([np.nan if v is None else v for v in self.values], dtype=float)

    def non_missing(self) -> list[tuple[dt.date, float]]:
        return [(d, v) for d, v in zip(self.dates, self.values) if v is not None]

    def at(self, date: dt.date) -> float | None:
        try:
            return self.values[self.dates.index(date)]
        except ValueError:
            raise KeyError(f"{date!s} not in series {self.name!r}") from None

    def with_values(self, values: Sequence[float | None], name: str | None = None) -> "DailySeries":
        return DailySeries(name or self.name, self.dates, tuple(values))

    def rename(self, name: str) -> "DailySeries":
        return DailySeries(name, self.dates, self.values)

    @staticmethod
    def from_array(name: str, dates: Sequence[dt.date], values: np.ndarray) -> "DailySeries":
        """Build from a float array, mapping NaN back to missing."""
        vals = tuple(None if np.isnan(v) else float(v) for v in np.asarray(values, dtype=float))
        return DailySeries(name, tuple(dates), vals)


@dataclass(frozen=True)
class Panel:
    """A set of uniquely named DailySeries re-indexed to one shared date axis."""

    dates: tuple[dt.date, ...]
    columns: tuple[DailySeries, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names in panel")
        for c in self.columns:
            if c.dates != self.dates:
                raise ValueError(f"column {c.name!r} is not indexed to the panel dates")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def __len__(self) -> int:
        return len(self.dates)

    def series(self, name: str) -> DailySeries:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"no column {name!r} in panel")

    def __getitem__(self, name: str) -> DailySeries:
        return self.series(name)

    def value_matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        """(n_dates, k) float matrix with NaN for missing."""
        cols = [self.series(n) for n in (names or self.names)]
        return np.column_stack([c.value_array() for c in cols]) if cols else np.empty((len(self), 0))

    def replace_column(self, series: DailySeries) -> "Panel":
        cols = tuple(series if c.name == series.name else c for c in self.columns)
        return Panel(self.dates, cols)


@dataclass(frozen=True)
class CorrelationResult:
    """Spearman rank correlation with its t-approximation p-value."""

    rho: float
    p_value: float
    n: int


def align_panel(
    series: Sequence[DailySeries],
    policy: Literal["intersection", "union"] = "intersection",
) -> Panel:
    """Re-index a collection of series onto a shared date axis.

    ``intersection`` keeps only dates present in every input; ``union`` keeps
    all dates and fills the gaps with missing.
    """
    if not series:
        raise ValueError("align_panel requires at least one series")
    names = [s.name for s in series]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate series names: {sorted(names)}")
    if policy == "intersection":
        shared = set(series[0].dates)
        for s in series[1:]:
            shared &= set(s.dates)
        if not shared:
            raise ValueError("no shared dates under intersection alignment")
        dates = tuple(sorted(shared))
    elif policy == "union":
        all_dates: set[dt.date] = set()
        for s in series:
            all_dates |= set(s.dates)
        dates = tuple(sorted(all_dates))
    else:
        raise ValueError(f"unknown alignment policy {policy!r}")

    columns = []
    for s in series:
        lookup = dict(zip(s.dates, s.values))
        columns.append(DailySeries(s.name, dates, tuple(lookup.get(d) for d in dates)))
    return Panel(dates, tuple(columns))


def moving_average(s: DailySeries, window: int) -> DailySeries:
    """Trailing moving average: mean of the ``window`` observations ending at
    each date. The first ``window - 1`` dates are missing, as is any date whose
    window contains a missing input.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    v = s.value_array()
    out = np.full(len(v), np.nan)
    if len(v) >= window:
        # NaN propagates through the mean, which is exactly the missing rule.
        out[window - 1:] = sliding_window_view(v, window).mean(axis=-1)
    return DailySeries.from_array(s.name, s.dates, out)


def standardize(s: DailySeries) -> DailySeries:
    """Scale to sample mean 0 and sample standard deviation 1 (ddof=1) over
    the non-missing entries; missing entries stay missing.
    """
    v = s.value_array()
    obs = v[~np.isnan(v)]
    if obs.size < 2:
        raise DegenerateSeriesError(f"{s.name}: need >= 2 observations to standardize")
    sd = float(np.std(obs, ddof=1))
    if sd == 0.0:
        raise DegenerateSeriesError(f"{s.name}: zero variance, cannot standardize")
    return DailySeries.from_array(s.name, s.dates, (v - float(np.mean(obs))) / sd)


def lag(s: DailySeries, k: int) -> DailySeries:
    """Shift values ``k`` positions forward in date order; first ``k`` outputs missing."""
    if k < 0:
        raise ValueError("lag must be non-negative")
    if k == 0:
        return s
    values = (None,) * min(k, len(s)) + s.values[: max(len(s) - k, 0)]
    return DailySeries(s.name, s.dates, values)


def clamp_negative(s: DailySeries) -> DailySeries:
    """Replace negative values with zero; missing stays missing."""
    return s.with_values(tuple(None if v is None else max(v, 0.0) for v in s.values))


def forward_fill(s: DailySeries) -> DailySeries:
    """Carry the last observed value forward over missing slots (opt-in only;
    no transform applies this implicitly). Leading missing slots remain missing.
    """
    out: list[float | None] = []
    last: float | None = None
    for v in s.values:
        if v is not None:
            last = v
        out.append(last)
    return s.with_values(tuple(out))


def _midranks(v: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties replaced by the average of their rank positions."""
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    sv = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: DailySeries, y: DailySeries) -> CorrelationResult:
    """Spearman rank correlation over the shared non-missing dates.

    rho is the Pearson correlation of mid-ranks; the p-value uses the
    two-sided t approximation with n - 2 degrees of freedom.
    """
    xv = dict(x.non_missing())
    yv = dict(y.non_missing())
    shared = sorted(set(xv) & set(yv))
    n = len(shared)
    if n < 3:
        raise ValueError(f"need >= 3 shared non-missing dates, got {n}")
    a = np.array([xv[d] for d in shared])
    b = np.array([yv[d] for d in shared])
    ra, rb = _midranks(a), _midranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0.0:
        raise DegenerateSeriesError("rank variance is zero (all values tied)")
    rho = float(np.clip(float(ra @ rb) / denom, -1.0, 1.0))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return CorrelationResult(rho=rho, p_value=p, n=n)
