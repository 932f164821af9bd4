"""Exact Gaussian maximum likelihood for ARMA(1,1) with mean.

The likelihood is computed by the innovations recursion on the transformed
process w_1 = x_1, w_t = x_t - phi*x_{t-1} (all centered), whose covariance
is bidiagonal. That makes both the one-step predictors and the prediction
variances a pair of scalar recursions:

    r_1 = (1 + 2*phi*theta + theta^2) / (1 - phi^2)
    xhat_{t+1} = phi*x_t + (theta / r_t) * (x_t - xhat_t)
    r_{t+1} = 1 + theta^2 - theta^2 / r_t

with innovation variance sigma2 * r_t. Stationarity and invertibility are
enforced through a tanh reparameterization; sigma2 is concentrated out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .series import DailySeries, DegenerateSeriesError


@dataclass(frozen=True)
class ArimaFit:
    """Estimated ARMA(1,1) parameters: |phi| < 1 and |theta| < 1 by construction."""

    phi: float
    theta: float
    mu: float
    sigma2: float
    loglik: float


def _longest_run(x: DailySeries) -> np.ndarray:
    v = x.value_array()
    best: np.ndarray = np.empty(0)
    i = 0
    n = len(v)
    while i < n:
        if np.isnan(v[i]):
            i += 1
            continue
        j = i
        while j + 1 < n and not np.isnan(v[j + 1]):
            j += 1
        if j - i + 1 > best.size:
            best = v[i : j + 1]
        i = j + 1
    return best


def _recursion(phi: float, theta: float, centered: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-step innovations e_t and relative variances r_t over a centered sample."""
    n = centered.size
    e = np.empty(n)
    r = np.empty(n)
    r[0] = (1.0 + 2.0 * phi * theta + theta * theta) / (1.0 - phi * phi)
    e[0] = centered[0]
    xhat = 0.0
    for t in range(n - 1):
        th_t = theta / r[t]
        xhat = phi * centered[t] + th_t * e[t]
        e[t + 1] = centered[t + 1] - xhat
        r[t + 1] = 1.0 + theta * theta - theta * theta / r[t]
    return e, r


def _profile_negloglik(phi: float, theta: float, mu: float, values: np.ndarray) -> tuple[float, float]:
    """(negative loglik, concentrated sigma2)."""
    centered = values - mu
    e, r = _recursion(phi, theta, centered)
    n = values.size
    s2 = float(np.sum(e * e / r)) / n
    if s2 <= 0.0 or not math.isfinite(s2):
        return 1e12, 0.0
    ll = -0.5 * n * math.log(2.0 * math.pi * s2) - 0.5 * float(np.sum(np.log(r))) - 0.5 * n
    return -ll, s2


def _fit_variant(values: np.ndarray, free_phi: bool, free_theta: bool) -> tuple[float, float, float, float, float]:
    """ML estimates (phi, theta, mu, sigma2, loglik) with optional parameters
    pinned to exactly zero.
    """
    mu0 = float(np.mean(values))
    if not (free_phi or free_theta):
        # white noise: the ML solution is closed form
        nll, s2 = _profile_negloglik(0.0, 0.0, mu0, values)
        return 0.0, 0.0, mu0, s2, -nll

    v0, v1 = values[:-1], values[1:]
    phi0 = 0.0
    if np.std(v0) > 0 and np.std(v1) > 0:
        phi0 = float(np.clip(np.corrcoef(v0, v1)[0, 1], -0.95, 0.95))

    def unpack(u: np.ndarray) -> tuple[float, float, float]:
        idx = 0
        phi = theta = 0.0
        if free_phi:
            phi = math.tanh(u[idx])
            idx += 1
        if free_theta:
            theta = math.tanh(u[idx])
            idx += 1
        return phi, theta, float(u[idx])

    def negll(u: np.ndarray) -> float:
        phi, theta, mu = unpack(u)
        return _profile_negloglik(phi, theta, mu, values)[0]

    starts = []
    for p_init, t_init in ((phi0, 0.0), (0.0, 0.0), (0.5 * phi0, 0.25)):
        u = []
        if free_phi:
            u.append(math.atanh(p_init))
        if free_theta:
            u.append(math.atanh(t_init))
        u.append(mu0)
        starts.append(np.array(u))

    best = None
    for u0 in starts:
        res = optimize.minimize(
            negll, u0, method="Nelder-Mead",
            options={"maxiter": 4000, "xatol": 1e-9, "fatol": 1e-11},
        )
        if best is None or res.fun < best.fun:
            best = res
    phi, theta, mu = unpack(best.x)
    nll, s2 = _profile_negloglik(phi, theta, mu, values)
    return phi, theta, mu, s2, -nll


def arima_fit(x: DailySeries) -> ArimaFit:
    """Fit ARMA(1,1) with mean on the longest contiguous non-missing run.

    The unrestricted likelihood is maximized alongside the three nested
    submodels (theta = 0, phi = 0, both zero), and the BIC-best of the four
    is reported. Without the guard, near-white-noise data puts the estimate
    on the common-factor ridge phi = -theta where the individual values are
    arbitrary; the guard reports exact zeros there instead and leaves
    genuinely autocorrelated data untouched.
    """
    values = _longest_run(x)
    if values.size < 10:
        raise ValueError(f"need >= 10 consecutive non-missing values, got {values.size}")
    if float(np.std(values)) == 0.0:
        raise DegenerateSeriesError("zero-variance series has a degenerate likelihood")
    n = values.size

    candidates = []
    for free_phi, free_theta in ((True, True), (True, False), (False, True), (False, False)):
        phi, theta, mu, s2, ll = _fit_variant(values, free_phi, free_theta)
        k = 2 + int(free_phi) + int(free_theta)  # mu and sigma2 always free
        bic = -2.0 * ll + k * math.log(n)
        candidates.append((bic, k, ArimaFit(phi=phi, theta=theta, mu=mu, sigma2=s2, loglik=ll)))
    _, _, fit = min(candidates, key=lambda c: (c[0], c[1]))
    return fit


def arima_forecast_one(fit: ArimaFit, history: DailySeries) -> float:
    """One-step conditional mean mu + phi*(x_t - mu) + theta*e_t, with the
    last innovation e_t taken from the recursion over the trailing contiguous
    non-missing run of the history.
    """
    v = history.value_array()
    if v.size == 0:
        raise ValueError("history is empty")
    ok = ~np.isnan(v)
    if not ok[-1]:
        raise ValueError("history must end with an observed value")
    start = int(np.max(np.flatnonzero(~ok)) + 1) if (~ok).any() else 0
    tail = v[start:]
    e, _ = _recursion(fit.phi, fit.theta, tail - fit.mu)
    return fit.mu + fit.phi * (float(tail[-1]) - fit.mu) + fit.theta * float(e[-1])
