"""Elastic-net regression by cyclic coordinate descent.

Minimizes (1/2n)·sum (y_i - x_i'b)^2 + lam·((1-a)/2·sum b_j^2 + a·sum |b_j|)
for a mixing weight a in [0, 1]. Inputs are standardized designs with the
response centered internally; no intercept is penalized or estimated inside
the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Pure-ridge grids have no shrink-to-zero threshold, so the auto grid floors
# the mixing weight here when computing lambda_max.
RIDGE_ALPHA_FLOOR = 1e-3


@dataclass(frozen=True)
class DesignMatrix:
    """Named, fully observed regression design."""

    names: tuple[str, ...]
    values: np.ndarray
    standardized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        X = np.asarray(self.values, dtype=float)
        if X.ndim != 2:
            raise ValueError("design must be 2-d")
        if X.shape[1] != len(self.names):
            raise ValueError(f"{X.shape[1]} columns vs {len(self.names)} names")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate column names")
        if X.shape[0] < 2:
            raise ValueError("need at least 2 rows")
        if np.isnan(X).any():
            raise ValueError("design contains missing values")
        X = X.copy()
        X.setflags(write=False)
        object.__setattr__(self, "values", X)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def standardize(self) -> "DesignMatrix":
        """Center and scale every column to sample sd 1 (ddof=1)."""
        X = self.values
        mu = X.mean(axis=0)
        sd = X.std(axis=0, ddof=1)
        if np.any(sd == 0.0):
            bad = [self.names[j] for j in np.flatnonzero(sd == 0.0)]
            raise ValueError(f"zero-variance columns: {bad}")
        return DesignMatrix(self.names, (X - mu) / sd, standardized=True)


@dataclass(frozen=True)
class EnetConfig:
    """Solver and path settings.

    A supplied lambda_grid must be strictly descending and positive; when
    absent, cv_lambda builds n_lambda log-spaced values from lambda_max down
    to lambda_min_ratio * lambda_max.
    """

    mix_alpha: float = 0.5
    lambda_grid: tuple[float, ...] | None = None
    tolerance: float = 1e-7
    max_passes: int = 100_000
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-3

    def __post_init__(self) -> None:
        if not 0.0 <= self.mix_alpha <= 1.0:
            raise ValueError("mix_alpha must lie in [0, 1]")
        if self.lambda_grid is not None:
            grid = tuple(float(g) for g in self.lambda_grid)
            if any(g <= 0 for g in grid):
                raise ValueError("lambda grid values must be positive")
            if any(a <= b for a, b in zip(grid, grid[1:])):
                raise ValueError("lambda grid must be strictly descending")
            object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class EnetSolution:
    names: tuple[str, ...]
    beta: np.ndarray
    intercept: float
    lam: float
    mix_alpha: float
    converged: bool
    passes: int

    @property
    def coefficients(self) -> dict[str, float]:
        return {n: float(b) for n, b in zip(self.names, self.beta)}

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=float) @ self.beta


def soft_threshold(z: float, g: float) -> float:
    """sign(z) * max(|z| - g, 0)."""
    if g < 0:
        raise ValueError("threshold must be non-negative")
    if z > g:
        return z - g
    if z < -g:
        return z + g
    return 0.0


def objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float, mix_alpha: float) -> float:
    """The penalized least-squares objective being minimized (y already centered)."""
    n = y.shape[0]
    resid = y - X @ beta
    pen = lam * ((1.0 - mix_alpha) / 2.0 * float(beta @ beta) + mix_alpha * float(np.abs(beta).sum()))
    return float(resid @ resid) / (2.0 * n) + pen


def lambda_max(X: DesignMatrix, y: np.ndarray, mix_alpha: float) -> float:
    """Smallest penalty at which every coefficient is zero:
    max_j |(1/n) sum_i x_ij y_i| / alpha, with alpha floored for pure ridge.
    """
    y = np.asarray(y, dtype=float)
    yc = y - y.mean()
    a = max(mix_alpha, RIDGE_ALPHA_FLOOR)
    return float(np.max(np.abs(X.values.T @ yc)) / X.n / a)


def _cd_solve(
    G: np.ndarray,
    c: np.ndarray,
    lam: float,
    mix_alpha: float,
    beta: np.ndarray,
    tol: float,
    max_passes: int,
) -> tuple[np.ndarray, bool, int]:
    """Cyclic coordinate descent on the covariance form.

    G = X'X/n, c = X'y/n; the maintained gradient is g = c - G beta. After a
    full sweep the active (nonzero) set is cycled to convergence before the
    next full sweep, glmnet-style.
    """
    k = c.shape[0]
    diag = np.ascontiguousarray(np.diag(G))
    den = diag + lam * (1.0 - mix_alpha)
    thr = lam * mix_alpha
    g = c - G @ beta
    passes = 0

    def sweep(idx: np.ndarray) -> float:
        maxd = 0.0
        for j in idx:
            bj = beta[j]
            z = g[j] + diag[j] * bj
            if z > thr:
                new = (z - thr) / den[j] if den[j] > 0.0 else 0.0
            elif z < -thr:
                new = (z + thr) / den[j] if den[j] > 0.0 else 0.0
            else:
                new = 0.0
            d = new - bj
            if d != 0.0:
                beta[j] = new
                g[:] -= G[:, j] * d
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        return maxd

    all_idx = np.arange(k)
    converged = False
    while passes < max_passes:
        passes += 1
        maxd = sweep(all_idx)
        if maxd < tol:
            converged = True
            break
        active = np.flatnonzero(beta)
        if active.size == 0 or active.size == k:
            continue
        while passes < max_passes:
            passes += 1
            if sweep(active) < tol:
                break
    return beta, converged, passes


def enet_fit(
    X: DesignMatrix,
    y: Sequence[float] | np.ndarray,
    lam: float,
    cfg: EnetConfig | None = None,
    warm_start: np.ndarray | None = None,
) -> EnetSolution:
    """Solve the elastic net at one penalty value.

    The design must be standardized; y is centered internally and its mean is
    returned as the intercept.
    """
    cfg = cfg or EnetConfig()
    if not X.standardized:
        raise ValueError("design must be standardized before fitting")
    y = np.asarray(y, dtype=float)
    if y.shape != (X.n,):
        raise ValueError(f"response length {y.shape} does not match {X.n} rows")
    if np.isnan(y).any():
        raise ValueError("response contains missing values")
    if lam < 0:
        raise ValueError("lambda must be non-negative")

    ybar = float(y.mean())
    yc = y - ybar
    Xv = X.values
    G = (Xv.T @ Xv) / X.n
    c = (Xv.T @ yc) / X.n
    beta0 = np.zeros(X.k) if warm_start is None else np.array(warm_start, dtype=float)
    beta, converged, passes = _cd_solve(
        G, c, lam, cfg.mix_alpha, beta0, cfg.tolerance, cfg.max_passes
    )
    return EnetSolution(
        names=X.names,
        beta=beta,
        intercept=ybar,
        lam=float(lam),
        mix_alpha=cfg.mix_alpha,
        converged=converged,
        passes=passes,
    )


def enet_path(
    X: DesignMatrix,
    y: Sequence[float] | np.ndarray,
    lambdas: Sequence[float],
    cfg: EnetConfig | None = None,
) -> list[EnetSolution]:
    """Warm-started solutions along a descending lambda sequence."""
    cfg = cfg or EnetConfig()
    out: list[EnetSolution] = []
    warm: np.ndarray | None = None
    for lam in lambdas:
        sol = enet_fit(X, y, lam, cfg, warm_start=warm)
        out.append(sol)
        warm = sol.beta
    return out


def kkt_violation(X: DesignMatrix, y: np.ndarray, sol: EnetSolution) -> float:
    """Largest violation of the stationarity conditions at a solution.

    For b_j != 0 the subgradient equation must hold with equality; for
    b_j = 0 the correlation must sit inside the threshold band.
    """
    y = np.asarray(y, dtype=float)
    yc = y - sol.intercept
    r = yc - X.values @ sol.beta
    grad = X.values.T @ r / X.n
    lam, a = sol.lam, sol.mix_alpha
    worst = 0.0
    for j, b in enumerate(sol.beta):
        if b != 0.0:
            v = abs(grad[j] - lam * a * math.copysign(1.0, b) - lam * (1.0 - a) * b)
        else:
            v = max(0.0, abs(grad[j]) - lam * a)
        worst = max(worst, v)
    return worst


def default_grid(X: DesignMatrix, y: np.ndarray, cfg: EnetConfig) -> tuple[float, ...]:
    lmax = lambda_max(X, y, cfg.mix_alpha)
    if lmax <= 0.0:
        raise ValueError("lambda_max is zero: response is orthogonal to every column")
    return tuple(
        float(v)
        for v in np.geomspace(lmax, cfg.lambda_min_ratio * lmax, num=cfg.n_lambda)
    )


def cv_lambda(
    X: DesignMatrix,
    y: Sequence[float] | np.ndarray,
    cfg: EnetConfig | None = None,
    folds: int = 10,
    seed: int = 0,
) -> tuple[float, list[tuple[float, float, float]]]:
    """Pick the penalty minimizing k-fold cross-validated forecast MSE.

    Fold assignment is a seeded permutation split into contiguous chunks, so
    identical seeds give identical curves. Returns (lambda_min, curve) where
    the curve rows are (lambda, mean fold MSE, se across folds). Folds reuse
    the full-design standardization; each training fold centers its own
    response.
    """
    cfg = cfg or EnetConfig()
    y = np.asarray(y, dtype=float)
    n = X.n
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds over {n} rows leaves empty folds")

    grid = cfg.lambda_grid or default_grid(X, y, cfg)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    chunks = np.array_split(perm, folds)

    fold_mse = np.empty((folds, len(grid)))
    for f, test_idx in enumerate(chunks):
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        Xtr, ytr = X.values[mask], y[mask]
        Xte, yte = X.values[test_idx], y[test_idx]
        # covariance form once per fold; warm-started descent along the grid
        n_tr = Xtr.shape[0]
        ybar = float(ytr.mean())
        G = (Xtr.T @ Xtr) / n_tr
        c = (Xtr.T @ (ytr - ybar)) / n_tr
        beta = np.zeros(X.k)
        for gi, lam in enumerate(grid):
            beta, _, _ = _cd_solve(
                G, c, lam, cfg.mix_alpha, beta, cfg.tolerance, cfg.max_passes
            )
            err = yte - ybar - Xte @ beta
            fold_mse[f, gi] = float(err @ err) / len(test_idx)

    mean = fold_mse.mean(axis=0)
    se = fold_mse.std(axis=0, ddof=1) / math.sqrt(folds)
    best = int(np.argmin(mean))
    curve = [(float(l), float(m), float(s)) for l, m, s in zip(grid, mean, se)]
    return float(grid[best]), curve
