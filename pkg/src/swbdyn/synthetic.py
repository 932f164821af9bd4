"""Deterministic synthetic panels with a known sparse generating model.

The drifting panel drives the target from exactly one covariate per regime
(plus its own lag), switching the active covariate twice over the span, so a
window-level selection method can be scored against ground truth: which
variable was active on which days is known exactly.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .series import DailySeries, Panel


@dataclass(frozen=True)
class DriftingPanel:
    panel: Panel
    target: str
    regimes: tuple[tuple[str, dt.date, dt.date], ...]  # (active variable, first, last)

    def active_on(self, day: dt.date) -> str:
        for name, first, last in self.regimes:
            if first <= day <= last:
                return name
        raise KeyError(f"{day!s} outside the panel span")


def make_drifting_panel(
    n_days: int = 320,
    n_noise: int = 5,
    seed: int = 2024,
    start: dt.date = dt.date(2020, 1, 1),
    signal: float = 1.6,
    ar_coef: float = 0.55,
    noise_sd: float = 0.35,
) -> DriftingPanel:
    """Target y_d = ar_coef*y_{d-1} + signal*active_{d-1} + noise, where the
    active covariate is act1, act2, act3 over three equal-length regimes.
    """
    rng = np.random.default_rng(seed)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n_days))
    actives = ["act1", "act2", "act3"]
    cov_names = actives + [f"noise{i + 1}" for i in range(n_noise)]
    # AR(1) covariates so lagged values still carry signal
    X = np.empty((n_days, len(cov_names)))
    X[0] = rng.standard_normal(len(cov_names))
    for t in range(1, n_days):
        X[t] = 0.4 * X[t - 1] + rng.standard_normal(len(cov_names))

    third = n_days // 3
    bounds = [(0, third - 1), (third, 2 * third - 1), (2 * third, n_days - 1)]
    active_idx = np.empty(n_days, dtype=int)
    for k, (lo, hi) in enumerate(bounds):
        active_idx[lo : hi + 1] = k

    y = np.empty(n_days)
    y[0] = rng.standard_normal()
    for t in range(1, n_days):
        y[t] = (
            ar_coef * y[t - 1]
            + signal * X[t - 1, active_idx[t]]
            + noise_sd * rng.standard_normal()
        )

    columns = [DailySeries("y", dates, tuple(map(float, y)))]
    for j, name in enumerate(cov_names):
        columns.append(DailySeries(name, dates, tuple(map(float, X[:, j]))))
    regimes = tuple(
        (actives[k], dates[lo], dates[hi]) for k, (lo, hi) in enumerate(bounds)
    )
    return DriftingPanel(panel=Panel(dates, tuple(columns)), target="y", regimes=regimes)


def make_swb_like_series(
    n_days: int = 300,
    seed: int = 11,
    start: dt.date = dt.date(2020, 1, 1),
    level: float = 45.0,
    name: str = "SWB",
) -> DailySeries:
    """A positive, mean-reverting daily index resembling a composite
    well-being series; used by the bundled sample data and smoke tests.
    """
    rng = np.random.default_rng(seed)
    delta = 1.0 / 365.0
    x = np.empty(n_days)
    x[0] = level
    for t in range(1, n_days):
        x[t] = x[t - 1] + 4.0 * (level - x[t - 1]) * delta + 9.0 * np.sqrt(delta) * rng.standard_normal()
        x[t] = max(x[t], 1.0)
    dates = tuple(start + dt.timedelta(days=i) for i in range(n_days))
    return DailySeries(name, dates, tuple(map(float, x)))
