"""Rolling-window analyses of a daily panel.

The centerpiece regresses each day's target on the previous day's covariates
over a 30-day sliding window, picking the penalty by cross-validation within
every window, forecasting one step ahead, and scoring against an ARMA(1,1)
baseline refit on the same window. Also here: random-forest relative
importance ranks, the monthly rank-correlation screen, and bidirectional
stepwise OLS.
"""

from __future__ import annotations

import concurrent.futures
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .arima import arima_fit, arima_forecast_one
from .enet import DesignMatrix, EnetConfig, cv_lambda, enet_fit
from .series import DailySeries, DegenerateSeriesError, Panel, spearman

log = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.05


class WindowSkipped(Exception):
    """A window that cannot be fit; carries the reason."""

    def __init__(self, date: dt.date, reason: str):
        super().__init__(f"{date!s}: {reason}")
        self.date = date
        self.reason = reason


@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window settings for the one-step-ahead model."""

    window_len: int = 30
    mix_alpha: float = 0.5
    folds: int = 10
    seed: int = 0
    include_lagged_target: bool = True
    lagged_target_name: str = "swbLag"
    rf_trees: int = 500
    tolerance: float = 1e-7
    n_lambda: int = 100

    def __post_init__(self) -> None:
        if self.window_len < self.folds:
            raise ValueError("window_len must be >= folds")

    def enet_config(self) -> EnetConfig:
        return EnetConfig(
            mix_alpha=self.mix_alpha, tolerance=self.tolerance, n_lambda=self.n_lambda
        )


@dataclass(frozen=True)
class WindowFit:
    """One window's standardized coefficients, penalty, forecast, and ranks.

    forecast and actual are on the window's standardized target scale;
    actual is None when the next day's target is unobserved.
    """

    date_t: dt.date
    coefficients: dict[str, float]
    lambda_t: float
    forecast: float
    rf_relative_rank: dict[str, float]
    actual: float | None = None


@dataclass(frozen=True)
class DynResult:
    windows: tuple[WindowFit, ...]
    enet_mse: float
    arima_mse: float
    selection_counts: dict[str, int]
    avg_relative_rank: dict[str, float]
    skipped: tuple[tuple[dt.date, str], ...] = ()


def _window_seeds(global_seed: int, date: dt.date) -> tuple[int, int]:
    """Deterministic (cv, rf) seeds from the run seed and the window date,
    so results do not depend on evaluation order or worker count.
    """
    ss = np.random.SeedSequence(entropy=(int(global_seed), date.toordinal()))
    a, b = ss.generate_state(2)
    return int(a), int(b)


def _standardize_columns(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Center and scale columns (ddof=1); zero-variance columns are zeroed
    so constant-in-window regressors simply cannot be selected.
    """
    mu = M.mean(axis=0)
    sd = M.std(axis=0, ddof=1)
    safe = np.where(sd > 0.0, sd, 1.0)
    Z = (M - mu) / safe
    Z[:, sd == 0.0] = 0.0
    return Z, mu, sd


def _assemble_window(
    panel: Panel, target: str, t: dt.date, cfg: WindowConfig
) -> tuple[tuple[str, ...], np.ndarray, np.ndarray, np.ndarray, float | None]:
    """Build the standardized lagged design, target, forecast row, and the
    standardized realized next-day target for the window ending at t.
    """
    try:
        i = panel.dates.index(t)
    except ValueError:
        raise WindowSkipped(t, "date not in panel") from None
    w = cfg.window_len
    if i < w:
        raise WindowSkipped(t, f"needs {w} prior dates plus one lag, has {i}")

    covariates = tuple(n for n in panel.names if n != target)
    y_all = panel.series(target).value_array()
    X_all = panel.value_matrix(covariates)

    rows = np.arange(i - w + 1, i + 1)
    y_win = y_all[rows]
    design_raw = X_all[rows - 1, :]
    fore_raw = X_all[i, :]
    names = covariates
    if cfg.include_lagged_target:
        design_raw = np.column_stack([design_raw, y_all[rows - 1]])
        fore_raw = np.append(fore_raw, y_all[i])
        names = covariates + (cfg.lagged_target_name,)

    if np.isnan(y_win).any():
        raise WindowSkipped(t, "missing target value inside window")
    if np.isnan(design_raw).any() or np.isnan(fore_raw).any():
        raise WindowSkipped(t, "missing lagged regressor inside window")

    y_sd = float(y_win.std(ddof=1))
    if y_sd == 0.0:
        raise WindowSkipped(t, "zero-variance target inside window")
    y_mean = float(y_win.mean())
    y_std = (y_win - y_mean) / y_sd

    Z, mu, sd = _standardize_columns(design_raw)
    fore_std = np.where(sd > 0.0, (fore_raw - mu) / np.where(sd > 0.0, sd, 1.0), 0.0)

    actual: float | None = None
    if i + 1 < len(panel.dates) and not np.isnan(y_all[i + 1]):
        actual = (float(y_all[i + 1]) - y_mean) / y_sd
    return names, Z, y_std, fore_std, actual


def _fit_window(
    names: tuple[str, ...],
    Z: np.ndarray,
    y_std: np.ndarray,
    fore_std: np.ndarray,
    actual: float | None,
    t: dt.date,
    cfg: WindowConfig,
) -> WindowFit:
    if len(names) > 2 * cfg.window_len:
        log.warning("window %s: %d regressors over %d days", t, len(names), cfg.window_len)
    X = DesignMatrix(names, Z, standardized=True)
    cv_seed, rf_seed = _window_seeds(cfg.seed, t)
    try:
        lam, _curve = cv_lambda(X, y_std, cfg.enet_config(), folds=cfg.folds, seed=cv_seed)
    except ValueError as exc:
        raise WindowSkipped(t, f"cross-validation failed: {exc}") from None
    sol = enet_fit(X, y_std, lam, cfg.enet_config())
    forecast = float(sol.predict(fore_std[None, :])[0])
    selected = {n for n, b in sol.coefficients.items() if b != 0.0}
    ranks = rf_relative_rank(X, y_std, selected, trees=cfg.rf_trees, seed=rf_seed)
    return WindowFit(
        date_t=t,
        coefficients=sol.coefficients,
        lambda_t=lam,
        forecast=forecast,
        rf_relative_rank=ranks,
        actual=actual,
    )


def run_window(panel: Panel, target: str, t: dt.date, cfg: WindowConfig) -> WindowFit:
    """Fit one window: cross-validate the penalty, solve the elastic net,
    forecast the next day, and attach random-forest relative ranks.
    """
    names, Z, y_std, fore_std, actual = _assemble_window(panel, target, t, cfg)
    return _fit_window(names, Z, y_std, fore_std, actual, t, cfg)


def _evaluate_window(
    panel: Panel, target: str, t: dt.date, cfg: WindowConfig
) -> tuple[dt.date, WindowFit | None, float | None, str | None]:
    """Worker unit: (date, fit-or-None, arima squared-error-or-None, skip reason)."""
    try:
        names, Z, y_std, fore_std, actual = _assemble_window(panel, target, t, cfg)
        if actual is None:
            return t, None, None, "no realized target at t+1 to score the forecast"
        wf = _fit_window(names, Z, y_std, fore_std, actual, t, cfg)
    except WindowSkipped as skip:
        return t, None, None, skip.reason
    i = panel.dates.index(t)
    dates = panel.dates[i - cfg.window_len + 1 : i + 1]
    window_series = DailySeries(target, dates, tuple(float(v) for v in y_std))
    try:
        afit = arima_fit(window_series)
        a_fore = arima_forecast_one(afit, window_series)
        a_err = (a_fore - wf.actual) ** 2
    except (ValueError, DegenerateSeriesError) as exc:
        return t, None, None, f"baseline ARMA fit failed: {exc}"
    return t, wf, float(a_err), None


def dynamic_elastic_net(
    panel: Panel, target: str, cfg: WindowConfig, workers: int = 1
) -> DynResult:
    """Run the window model over every admissible date and aggregate.

    A date t is admissible when the full window, its lagged regressors, and
    the realized next-day target are all observed. Windows are independent
    work units; per-window seeds derive from (seed, date), so any worker
    count yields identical output.
    """
    if target not in panel.names:
        raise KeyError(f"target {target!r} not in panel")
    n = len(panel.dates)
    if n < cfg.window_len + 2:
        raise ValueError(f"panel spans {n} dates; needs at least {cfg.window_len + 2}")
    candidates = [panel.dates[i] for i in range(cfg.window_len, n - 1)]

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    _evaluate_window,
                    [panel] * len(candidates),
                    [target] * len(candidates),
                    candidates,
                    [cfg] * len(candidates),
                    chunksize=max(1, len(candidates) // (4 * workers)),
                )
            )
    else:
        results = [_evaluate_window(panel, target, t, cfg) for t in candidates]

    results.sort(key=lambda r: r[0])
    windows: list[WindowFit] = []
    arima_errs: list[float] = []
    skipped: list[tuple[dt.date, str]] = []
    for t, wf, a_err, reason in results:
        if wf is None:
            skipped.append((t, reason or "unknown"))
        else:
            windows.append(wf)
            arima_errs.append(a_err if a_err is not None else math.nan)

    if len(windows) < 10:
        raise ValueError(f"only {len(windows)} admissible windows; too short to be meaningful")

    names = sorted(windows[0].coefficients)
    counts = {v: sum(1 for w in windows if w.coefficients[v] != 0.0) for v in names}
    avg_rank = {
        v: float(np.mean([w.rf_relative_rank[v] for w in windows])) for v in names
    }
    enet_mse = float(np.mean([(w.forecast - w.actual) ** 2 for w in windows]))
    arima_mse = float(np.mean(arima_errs))
    return DynResult(
        windows=tuple(windows),
        enet_mse=enet_mse,
        arima_mse=arima_mse,
        selection_counts=counts,
        avg_relative_rank=avg_rank,
        skipped=tuple(skipped),
    )


def rf_relative_rank(
    X: DesignMatrix,
    y: Sequence[float] | np.ndarray,
    selected: Iterable[str],
    trees: int = 500,
    seed: int = 0,
) -> dict[str, float]:
    """Relative importance ranks from a regression random forest.

    Only variables in `selected` are ranked (by total impurity decrease,
    descending): the top one scores 1 and the m-th scores 1/m. Everything
    else is exactly 0. An empty selection is an all-zero vector.
    """
    selected = set(selected)
    unknown = selected - set(X.names)
    if unknown:
        raise KeyError(f"selected names not in design: {sorted(unknown)}")
    ranks = {n: 0.0 for n in X.names}
    if not selected:
        return ranks

    from sklearn.tree import DecisionTreeRegressor

    # Trees are built directly (seeded bootstrap per tree) rather than through
    # RandomForestRegressor, whose per-estimator cloning dominates the cost at
    # this window size. Importance is the total impurity decrease per variable
    # accumulated over trees.
    yv = np.asarray(y, dtype=float)
    n = X.n
    rng = np.random.default_rng(seed)
    max_features = max(1, math.ceil(X.k / 3))
    importance = np.zeros(X.k)
    for _ in range(trees):
        rows = rng.integers(0, n, size=n)
        tree = DecisionTreeRegressor(
            max_features=max_features,
            min_samples_leaf=5,
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        tree.fit(X.values[rows], yv[rows], check_input=False)
        importance += tree.tree_.compute_feature_importances(normalize=False)

    sel_idx = [j for j, n in enumerate(X.names) if n in selected]
    order = sorted(sel_idx, key=lambda j: (-importance[j], j))
    m = len(order)
    for pos, j in enumerate(order):
        ranks[X.names[j]] = (m - pos) / m
    return ranks


@dataclass(frozen=True)
class MonthlyCorrelations:
    """Per-month (plus full-period) significant rank correlations.

    rho[i][j] is the coefficient for periods[i] x variables[j], or None when
    masked; reasons carries why a cell is masked.
    """

    periods: tuple[str, ...]
    variables: tuple[str, ...]
    rho: tuple[tuple[float | None, ...], ...]
    reasons: tuple[tuple[str | None, ...], ...]

    def cell(self, period: str, variable: str) -> float | None:
        return self.rho[self.periods.index(period)][self.variables.index(variable)]


def monthly_correlations(panel: Panel, target: str) -> MonthlyCorrelations:
    """Spearman screen of the target against every covariate by calendar
    month and over the whole period, masking entries with p >= 0.05,
    undefined correlations, or fewer than 3 paired observations.
    """
    if target not in panel.names:
        raise KeyError(f"target {target!r} not in panel")
    if not panel.dates:
        raise ValueError("empty panel")
    month_keys: list[str] = []
    for d in panel.dates:
        key = f"{d.year:04d}-{d.month:02d}"
        if key not in month_keys:
            month_keys.append(key)
    periods = tuple(month_keys) + ("full",)
    variables = tuple(n for n in panel.names if n != target)
    y = panel.series(target)

    rho_rows: list[tuple[float | None, ...]] = []
    reason_rows: list[tuple[str | None, ...]] = []
    for period in periods:
        if period == "full":
            idx = list(range(len(panel.dates)))
        else:
            idx = [k for k, d in enumerate(panel.dates) if f"{d.year:04d}-{d.month:02d}" == period]
        dates = tuple(panel.dates[k] for k in idx)
        y_sub = DailySeries(target, dates, tuple(y.values[k] for k in idx))
        rho_row: list[float | None] = []
        reason_row: list[str | None] = []
        for v in variables:
            col = panel.series(v)
            x_sub = DailySeries(v, dates, tuple(col.values[k] for k in idx))
            try:
                res = spearman(x_sub, y_sub)
            except DegenerateSeriesError:
                rho_row.append(None)
                reason_row.append("undefined correlation")
                continue
            except ValueError:
                rho_row.append(None)
                reason_row.append("fewer than 3 paired observations")
                continue
            if res.p_value >= SIGNIFICANCE_LEVEL:
                rho_row.append(None)
                reason_row.append(f"not significant (p={res.p_value:.3f})")
            else:
                rho_row.append(res.rho)
                reason_row.append(None)
        rho_rows.append(tuple(rho_row))
        reason_rows.append(tuple(reason_row))
    return MonthlyCorrelations(periods, variables, tuple(rho_rows), tuple(reason_rows))


@dataclass(frozen=True)
class StepwiseResult:
    selected: tuple[str, ...]
    coefficients: dict[str, float]
    intercept: float
    aic: float
    r2: float
    adj_r2: float
    n: int


def _gaussian_aic(rss: float, n: int, n_terms: int) -> float:
    """n*log(RSS/n) + 2p, p counting the intercept (constant terms dropped)."""
    return n * math.log(max(rss / n, 1e-300)) + 2.0 * (n_terms + 1)


def _ols(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, int]:
    A = np.column_stack([np.ones(len(y)), X]) if X.size else np.ones((len(y), 1))
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(resid @ resid), int(rank)


def stepwise_ols(
    X: DesignMatrix, y: Sequence[float] | np.ndarray, criterion: str = "aic"
) -> StepwiseResult:
    """Bidirectional stepwise OLS from the intercept-only model.

    Each step applies the single add or drop with the largest AIC improvement
    (ties broken by first column order); candidate additions that make the
    design rank-deficient are skipped with a warning.
    """
    if criterion.lower() != "aic":
        raise ValueError(f"unsupported criterion {criterion!r}")
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n <= 2:
        raise ValueError("need more than 2 observations")
    if np.isnan(y).any():
        raise ValueError("response contains missing values")

    included: list[int] = []
    _, rss, _ = _ols(np.empty((n, 0)), y)
    current_aic = _gaussian_aic(rss, n, 0)

    while True:
        best_move: tuple[float, str, int] | None = None
        for j in range(X.k):
            if j in included:
                continue
            cols = included + [j]
            coef, rss, rank = _ols(X.values[:, cols], y)
            if rank < len(cols) + 1:
                log.warning("stepwise: adding %r is collinear with the current model; skipped",
                            X.names[j])
                continue
            aic = _gaussian_aic(rss, n, len(cols))
            if aic < current_aic - 1e-10 and (best_move is None or aic < best_move[0] - 1e-12):
                best_move = (aic, "add", j)
        for j in included:
            cols = [c for c in included if c != j]
            _, rss, _ = _ols(X.values[:, cols], y)
            aic = _gaussian_aic(rss, n, len(cols))
            if aic < current_aic - 1e-10 and (best_move is None or aic < best_move[0] - 1e-12):
                best_move = (aic, "drop", j)
        if best_move is None:
            break
        current_aic = best_move[0]
        if best_move[1] == "add":
            included.append(best_move[2])
        else:
            included.remove(best_move[2])

    included_sorted = sorted(included)
    coef, rss, _ = _ols(X.values[:, included_sorted], y)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    p = len(included_sorted)
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1) if n - p - 1 > 0 else math.nan
    return StepwiseResult(
        selected=tuple(X.names[j] for j in included_sorted),
        coefficients={X.names[j]: float(coef[m + 1]) for m, j in enumerate(included_sorted)},
        intercept=float(coef[0]),
        aic=current_aic,
        r2=r2,
        adj_r2=adj_r2,
        n=n,
    )
