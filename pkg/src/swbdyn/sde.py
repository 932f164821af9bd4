"""Mean-reverting diffusion calibration, comparison, and simulation.

All four model families share the drift alpha*(beta - x) and differ only in
the diffusion term b(x): constant, sqrt(x), x, or x^gamma. Estimation uses
the Euler local-Gaussian transition density (quasi-maximum likelihood) with a
derivative-free simplex search from seeded multistarts.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.special import expit, logit

from .series import DailySeries

POSITIVE_FLOOR = 1e-6
HESS_STEP = 1e-4


class SdeModelKind(enum.Enum):
    VAS = "VAS"
    GBM = "GBM"
    CIR = "CIR"
    CKLS = "CKLS"

    @property
    def fixed_gamma(self) -> float | None:
        """Implied diffusion exponent; None for CKLS (free)."""
        return {"VAS": 0.0, "CIR": 0.5, "GBM": 1.0, "CKLS": None}[self.value]

    @property
    def requires_positive_state(self) -> bool:
        return self is not SdeModelKind.VAS

    @property
    def n_params(self) -> int:
        return 4 if self is SdeModelKind.CKLS else 3


@dataclass(frozen=True)
class SdeParams:
    """Drift and diffusion parameters; gamma only for the free-exponent model."""

    alpha: float
    beta: float
    sigma: float
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.gamma is not None and not 0.0 <= self.gamma <= 2.0:
            raise ValueError("gamma must lie in [0, 2]")

    def as_dict(self) -> dict[str, float]:
        d = {"alpha": self.alpha, "beta": self.beta, "sigma": self.sigma}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        return d


@dataclass(frozen=True)
class SdeConfig:
    """Sampling interval and optimizer budget.

    delta is the time between consecutive observations in the units alpha is
    quoted in; the default treats daily data on a yearly clock.
    """

    delta: float = 1.0 / 365.0
    max_iter: int = 4000
    multistarts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class SdeFit:
    kind: SdeModelKind
    params: SdeParams
    std_errors: dict[str, float] | None
    loglik: float
    aic: float
    converged: bool


@dataclass(frozen=True)
class SelectionResult:
    best: SdeModelKind
    fits: dict[SdeModelKind, SdeFit]
    excluded: dict[SdeModelKind, str]


def _diffusion(kind: SdeModelKind, x: np.ndarray, gamma: float | None) -> np.ndarray:
    if kind is SdeModelKind.VAS:
        return np.ones_like(x)
    if kind is SdeModelKind.CIR:
        return np.sqrt(x)
    if kind is SdeModelKind.GBM:
        return x
    if gamma is None:
        raise ValueError("CKLS requires gamma")
    return np.power(x, gamma)


def transitions(x: DailySeries) -> tuple[np.ndarray, np.ndarray]:
    """(x_i, x_{i+1}) pairs over consecutive positions, formed only inside
    contiguous non-missing runs.
    """
    v = x.value_array()
    ok = ~np.isnan(v)
    keep = ok[:-1] & ok[1:]
    return v[:-1][keep], v[1:][keep]


def quasi_loglik(
    kind: SdeModelKind, params: SdeParams, x: DailySeries, cfg: SdeConfig
) -> float:
    """Euler local-Gaussian log-likelihood of the observed transitions.

    Returns -inf (optimizer-safe rejection) when a positive-state model sees
    a nonpositive observation or the scheme's variance is nonpositive.
    """
    x0, x1 = transitions(x)
    if x0.size < 1:
        raise ValueError("need at least 2 consecutive non-missing values")
    if kind.requires_positive_state and (np.any(x0 <= 0.0) or np.any(x1 <= 0.0)):
        return -math.inf
    gamma = params.gamma if kind is SdeModelKind.CKLS else kind.fixed_gamma
    d = cfg.delta
    mean = x0 + params.alpha * (params.beta - x0) * d
    var = params.sigma**2 * _diffusion(kind, x0, gamma) ** 2 * d
    if np.any(var <= 0.0) or not np.all(np.isfinite(var)):
        return -math.inf
    resid = x1 - mean
    ll = -0.5 * np.sum(np.log(2.0 * math.pi * var) + resid * resid / var)
    return float(ll) if np.isfinite(ll) else -math.inf


def _to_params(kind: SdeModelKind, u: np.ndarray) -> SdeParams:
    gamma = 2.0 * float(expit(u[3])) if kind is SdeModelKind.CKLS else None
    return SdeParams(alpha=math.exp(u[0]), beta=float(u[1]), sigma=math.exp(u[2]), gamma=gamma)


def _from_params(kind: SdeModelKind, p: SdeParams) -> np.ndarray:
    u = [math.log(p.alpha), p.beta, math.log(p.sigma)]
    if kind is SdeModelKind.CKLS:
        u.append(float(logit(min(max(p.gamma / 2.0, 1e-9), 1.0 - 1e-9))))
    return np.array(u)


def _start_points(
    kind: SdeModelKind, x: DailySeries, cfg: SdeConfig
) -> list[np.ndarray]:
    x0, x1 = transitions(x)
    xbar = float(np.mean(np.concatenate([x0, x1[-1:]])))
    sd = float(np.std(x0)) or 1.0
    # lag-1 autocorrelation gives a crude reversion speed
    if x0.size > 2 and np.std(x0) > 0 and np.std(x1) > 0:
        phi = float(np.corrcoef(x0, x1)[0, 1])
    else:
        phi = 0.5
    phi = min(max(phi, 0.01), 0.999)
    alpha0 = -math.log(phi) / cfg.delta if phi < 1 else 1.0
    alpha0 = max(alpha0, 1e-6)
    resid = (x1 - x0) - alpha0 * (xbar - x0) * cfg.delta
    gamma_seq = (0.3, 0.8, 1.3, 1.8)
    rng = np.random.default_rng(cfg.seed)
    starts = []
    for i in range(cfg.multistarts):
        g0 = gamma_seq[i % len(gamma_seq)]
        scale = _diffusion(kind, np.array([max(xbar, POSITIVE_FLOOR)]), g0)[0]
        sigma0 = max(float(np.std(resid)) / math.sqrt(cfg.delta) / max(scale, 1e-12), 1e-9)
        jit_a = math.exp(rng.normal(0.0, 0.7)) if i else 1.0
        jit_s = math.exp(rng.normal(0.0, 0.7)) if i else 1.0
        jit_b = rng.normal(0.0, 0.3) * sd if i else 0.0
        p = SdeParams(
            alpha=alpha0 * jit_a,
            beta=xbar + jit_b,
            sigma=sigma0 * jit_s,
            gamma=g0 if kind is SdeModelKind.CKLS else None,
        )
        starts.append(_from_params(kind, p))
    return starts


def _hessian(fun, u: np.ndarray, h: float = HESS_STEP) -> np.ndarray:
    """Central-difference Hessian on the transformed scale."""
    m = u.size
    H = np.empty((m, m))
    f0 = fun(u)
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = h
        H[i, i] = (fun(u + ei) - 2.0 * f0 + fun(u - ei)) / h**2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = h
            H[i, j] = H[j, i] = (
                fun(u + ei + ej) - fun(u + ei - ej) - fun(u - ei + ej) + fun(u - ei - ej)
            ) / (4.0 * h**2)
    return H


def _std_errors(kind: SdeModelKind, fun, u: np.ndarray) -> dict[str, float] | None:
    try:
        H = _hessian(fun, u)
        if not np.all(np.isfinite(H)):
            return None
        eig = np.linalg.eigvalsh(0.5 * (H + H.T))
        if np.any(eig <= 0.0):
            return None
        cov = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(cov) <= 0.0):
        return None
    p = _to_params(kind, u)
    jac = [p.alpha, 1.0, p.sigma]
    names = ["alpha", "beta", "sigma"]
    if kind is SdeModelKind.CKLS:
        jac.append(p.gamma * (2.0 - p.gamma) / 2.0)
        names.append("gamma")
    return {
        n: float(abs(j) * math.sqrt(cov[i, i])) for i, (n, j) in enumerate(zip(names, jac))
    }


def fit_sde(kind: SdeModelKind, x: DailySeries, cfg: SdeConfig | None = None) -> SdeFit:
    """Maximize the quasi-likelihood by Nelder-Mead from seeded multistarts.

    Parameters are optimized on an unconstrained scale (log for alpha and
    sigma, scaled logit for gamma). Standard errors come from the inverse
    numerical Hessian, delta-method back-transformed; a non-positive-definite
    Hessian yields std_errors=None rather than a failure.
    """
    cfg = cfg or SdeConfig()
    x0_arr, _ = transitions(x)
    if x0_arr.size < 1:
        raise ValueError("need at least 2 consecutive non-missing values")
    if kind.requires_positive_state:
        v = x.value_array()
        if np.nanmin(v) <= 0.0:
            raise ValueError(f"{kind.value} requires strictly positive states")

    def negll(u: np.ndarray) -> float:
        try:
            p = _to_params(kind, u)
        except (ValueError, OverflowError):
            return 1e12
        ll = quasi_loglik(kind, p, x, cfg)
        return -ll if math.isfinite(ll) else 1e12

    best = None
    best_success = False
    for u0 in _start_points(kind, x, cfg):
        res = optimize.minimize(
            negll, u0, method="Nelder-Mead",
            options={"maxiter": cfg.max_iter, "xatol": 1e-8, "fatol": 1e-10},
        )
        # restart once from the found point with a fresh simplex
        res2 = optimize.minimize(
            negll, res.x, method="Nelder-Mead",
            options={"maxiter": cfg.max_iter, "xatol": 1e-9, "fatol": 1e-11},
        )
        cand = res2 if res2.fun <= res.fun else res
        if best is None or cand.fun < best.fun:
            best = cand
            best_success = bool(res.success or res2.success)
    assert best is not None

    params = _to_params(kind, best.x)
    loglik = -float(best.fun)
    aic = -2.0 * loglik + 2.0 * kind.n_params
    return SdeFit(
        kind=kind,
        params=params,
        std_errors=_std_errors(kind, negll, best.x),
        loglik=loglik,
        aic=aic,
        converged=best_success,
    )


def select_model(x: DailySeries, cfg: SdeConfig | None = None) -> SelectionResult:
    """Fit all four families and pick the lowest AIC (ties: fewer parameters).

    Models whose state-space preconditions fail on the data are excluded and
    reported rather than crashing the comparison.
    """
    cfg = cfg or SdeConfig()
    fits: dict[SdeModelKind, SdeFit] = {}
    excluded: dict[SdeModelKind, str] = {}
    for kind in SdeModelKind:
        try:
            fits[kind] = fit_sde(kind, x, cfg)
        except ValueError as exc:
            excluded[kind] = str(exc)
    if not fits:
        raise ValueError("no model could be fitted")
    best = min(fits, key=lambda k: (fits[k].aic, k.n_params))
    return SelectionResult(best=best, fits=fits, excluded=excluded)


def simulate(
    kind: SdeModelKind,
    params: SdeParams,
    x0: float,
    n: int,
    cfg: SdeConfig | None = None,
    seed: int = 0,
    start: dt.date = dt.date(2000, 1, 1),
    name: str = "simulated",
) -> DailySeries:
    """Euler-Maruyama path of n steps (n+1 points, x0 first).

    Positive-state models reflect at a small floor so the path stays inside
    the state space.
    """
    cfg = cfg or SdeConfig()
    if kind.requires_positive_state and x0 <= 0.0:
        raise ValueError(f"{kind.value} requires x0 > 0")
    gamma = params.gamma if kind is SdeModelKind.CKLS else kind.fixed_gamma
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    sqdt = math.sqrt(cfg.delta)
    path = np.empty(n + 1)
    path[0] = x0
    xi = x0
    for i in range(n):
        b = float(_diffusion(kind, np.array([xi]), gamma)[0])
        xi = xi + params.alpha * (params.beta - xi) * cfg.delta + params.sigma * b * sqdt * z[i]
        if kind.requires_positive_state and xi < POSITIVE_FLOOR:
            xi = 2.0 * POSITIVE_FLOOR - xi
        path[i + 1] = xi
    dates = tuple(start + dt.timedelta(days=i) for i in range(n + 1))
    return DailySeries.from_array(name, dates, path)


def limit_trajectory(
    params: SdeParams,
    x0: float,
    times: Sequence[float],
    start: dt.date = dt.date(2000, 1, 1),
    name: str = "limit",
) -> DailySeries:
    """Exact noise-free trajectory beta + (x0 - beta) * exp(-alpha * t).

    Values are the exact solution at the supplied times; the date axis is a
    positional day grid from `start`.
    """
    values = [params.beta + (x0 - params.beta) * math.exp(-params.alpha * t) for t in times]
    dates = tuple(start + dt.timedelta(days=i) for i in range(len(values)))
    return DailySeries(name, dates, tuple(values))
