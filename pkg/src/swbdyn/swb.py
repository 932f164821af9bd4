"""Composite well-being index from daily sentiment category distributions.

Each of the eight components carries a four-way distribution over
positive / neutral / negative / off-topic shares. The per-component index is
positive / (positive + negative); the daily composite is the unweighted mean
of the eight components, reported on a 0-100 scale at the series level.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Mapping, Sequence

from .series import DailySeries

COMPONENT_SUM_TOL = 1e-9

COMPONENTS = ("emo", "sat", "vit", "res", "fun", "tru", "rel", "wor")


@dataclass(frozen=True)
class ComponentDistribution:
    """Estimated shares of one component's four sentiment categories."""

    positive: float
    neutral: float
    negative: float
    offtopic: float

    def __post_init__(self) -> None:
        for field in ("positive", "neutral", "negative", "offtopic"):
            v = getattr(self, field)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{field}={v} outside [0, 1]")
        total = self.positive + self.neutral + self.negative + self.offtopic
        if abs(total - 1.0) > COMPONENT_SUM_TOL:
            raise ValueError(f"category shares sum to {total}, expected 1")


@dataclass(frozen=True)
class DailyComponents:
    """One day's distributions for all eight index components."""

    date: dt.date
    components: Mapping[str, ComponentDistribution]

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", dict(self.components))
        keys = set(self.components)
        if keys != set(COMPONENTS):
            raise ValueError(f"expected components {set(COMPONENTS)}, got {keys}")


def component_index(d: ComponentDistribution) -> float | None:
    """positive / (positive + negative); None when both shares are zero."""
    mass = d.positive + d.negative
    if mass == 0.0:
        return None
    return d.positive / mass


def swb_daily(dc: DailyComponents) -> float | None:
    """Unweighted mean of the eight component indices on [0, 1].

    A day with any undefined component yields None rather than an average
    over fewer components.
    """
    parts = []
    for name in COMPONENTS:
        idx = component_index(dc.components[name])
        if idx is None:
            return None
        parts.append(idx)
    return sum(parts) / 8.0


def swb_series(days: Sequence[DailyComponents], name: str = "swb") -> DailySeries:
    """Daily composite index scaled to [0, 100], one slot per input day."""
    seen = set()
    for day in days:
        if day.date in seen:
            raise ValueError(f"duplicate date {day.date!s}")
        seen.add(day.date)
    ordered = sorted(days, key=lambda day: day.date)
    values = []
    for day in ordered:
        v = swb_daily(day)
        values.append(None if v is None else 100.0 * v)
    return DailySeries(name, tuple(day.date for day in ordered), tuple(values))
