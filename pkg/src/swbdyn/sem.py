"""Maximum-likelihood structural equation modeling.

Models are compiled to the RAM form: directed paths (loadings and
regressions) in an asymmetric matrix A, variances and covariances in a
symmetric matrix O, and an observed-row filter F, giving the implied
covariance F (I-A)^-1 O (I-A)^-T F'. The ML discrepancy between the sample
and implied covariances is minimized by quasi-Newton iteration with an
analytic gradient.

Identification: every latent's (residual) variance is fixed to 1 and all
loadings are free, so coefficients are on the standardized-latent scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .series import Panel

HEYWOOD_FLOOR = 1e-6
_BIG = 1e12


class IdentificationError(ValueError):
    """The compiled pattern has structurally confounded parameters."""


@dataclass(frozen=True)
class SemModel:
    """Latent-variable model pattern.

    loadings: (latent, observed, fixed value or None for free)
    regressions: (outcome, predictor), always free
    covariances: (a, b, fixed value or None), a == b meaning a variance;
        these override the defaults (free residual variance for observed
        variables, variance fixed to 1 for latents).
    """

    observed: tuple[str, ...]
    latent: tuple[str, ...]
    loadings: tuple[tuple[str, str, float | None], ...]
    regressions: tuple[tuple[str, str], ...] = ()
    covariances: tuple[tuple[str, str, float | None], ...] = ()

    def __post_init__(self) -> None:
        if set(self.observed) & set(self.latent):
            raise ValueError("a name cannot be both observed and latent")
        names = set(self.observed) | set(self.latent)
        for lat, obs, _ in self.loadings:
            if lat not in self.latent or obs not in self.observed:
                raise ValueError(f"bad loading {lat} =~ {obs}")
        for out, pred in self.regressions:
            if out not in names or pred not in names:
                raise ValueError(f"bad regression {out} ~ {pred}")
        for a, b, _ in self.covariances:
            if a not in names or b not in names:
                raise ValueError(f"bad covariance {a} ~~ {b}")


@dataclass(frozen=True)
class SemFit:
    estimates: dict[str, float]
    std_errors: dict[str, float] | None
    fml: float
    converged: bool
    n: int
    heywood: tuple[str, ...] = ()


@dataclass(frozen=True)
class RamPattern:
    """Compiled free/fixed structure over the node order observed + latent."""

    nodes: tuple[str, ...]
    n_observed: int
    a_fixed: np.ndarray
    a_index: np.ndarray          # -1 where fixed, else parameter index
    o_fixed: np.ndarray
    o_index: np.ndarray
    labels: tuple[str, ...]      # one per free parameter
    is_variance: np.ndarray      # log-transformed parameters

    @property
    def n_free(self) -> int:
        return len(self.labels)

    def matrices(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        A = self.a_fixed.copy()
        O = self.o_fixed.copy()
        free_a = self.a_index >= 0
        A[free_a] = theta[self.a_index[free_a]]
        free_o = self.o_index >= 0
        O[free_o] = theta[self.o_index[free_o]]
        return A, O

    def implied(self, theta: np.ndarray) -> np.ndarray:
        A, O = self.matrices(theta)
        B = np.linalg.inv(np.eye(len(self.nodes)) - A)
        full = B @ O @ B.T
        p = self.n_observed
        return full[:p, :p]


def _has_cycle(adj: dict[str, set[str]]) -> bool:
    state: dict[str, int] = {}

    def visit(v: str) -> bool:
        state[v] = 1
        for w in adj.get(v, ()):
            s = state.get(w, 0)
            if s == 1 or (s == 0 and visit(w)):
                return True
        state[v] = 2
        return False

    return any(state.get(v, 0) == 0 and visit(v) for v in adj)


def compile_model(spec: SemModel, check_identification: bool = True) -> RamPattern:
    """Lay the pattern out as RAM matrices and index the free parameters.

    Raises on cyclic paths; a rank check of d vech(Sigma) / d theta at random
    points flags structurally unidentified parameterizations.
    """
    nodes = spec.observed + spec.latent
    q = len(nodes)
    pos = {n: i for i, n in enumerate(nodes)}

    adj: dict[str, set[str]] = {n: set() for n in nodes}
    a_fixed = np.zeros((q, q))
    a_index = np.full((q, q), -1, dtype=int)
    o_fixed = np.zeros((q, q))
    o_index = np.full((q, q), -1, dtype=int)
    labels: list[str] = []
    is_var: list[bool] = []

    def new_param(label: str, variance: bool) -> int:
        labels.append(label)
        is_var.append(variance)
        return len(labels) - 1

    for lat, obs, value in spec.loadings:
        i, j = pos[obs], pos[lat]
        adj[lat].add(obs)
        if value is None:
            a_index[i, j] = new_param(f"{lat}=~{obs}", False)
        else:
            a_fixed[i, j] = value
    for out, pred in spec.regressions:
        i, j = pos[out], pos[pred]
        adj[pred].add(out)
        a_index[i, j] = new_param(f"{out}~{pred}", False)
    if _has_cycle(adj):
        raise ValueError("cyclic path structure")

    # defaults: free residual variance for observed, fixed unit for latent
    explicit_var = {a for a, b, _ in spec.covariances if a == b}
    for name in spec.observed:
        if name not in explicit_var:
            i = pos[name]
            o_index[i, i] = new_param(f"var({name})", True)
    for name in spec.latent:
        if name not in explicit_var:
            o_fixed[pos[name], pos[name]] = 1.0
    for a, b, value in spec.covariances:
        i, j = pos[a], pos[b]
        if value is None:
            idx = new_param(f"{a}~~{b}" if i != j else f"var({a})", i == j)
            o_index[i, j] = o_index[j, i] = idx
        else:
            o_fixed[i, j] = o_fixed[j, i] = value

    pattern = RamPattern(
        nodes=nodes,
        n_observed=len(spec.observed),
        a_fixed=a_fixed,
        a_index=a_index,
        o_fixed=o_fixed,
        o_index=o_index,
        labels=tuple(labels),
        is_variance=np.array(is_var, dtype=bool),
    )
    if check_identification and pattern.n_free > 0:
        p = pattern.n_observed
        n_moments = p * (p + 1) // 2
        if pattern.n_free > n_moments:
            raise IdentificationError(
                f"{pattern.n_free} free parameters exceed {n_moments} covariance moments"
            )
        deficient = 0
        for draw in range(2):
            rng = np.random.default_rng(draw + 7)
            theta = rng.normal(0.4, 0.2, pattern.n_free)
            theta[pattern.is_variance] = np.abs(theta[pattern.is_variance]) + 0.5
            jac = np.column_stack(
                [_dsigma(pattern, theta, k)[np.triu_indices(p)] for k in range(pattern.n_free)]
            )
            if np.linalg.matrix_rank(jac, tol=1e-8) < pattern.n_free:
                deficient += 1
        if deficient == 2:
            raise IdentificationError("pattern fails the Jacobian rank check")
    return pattern


def _dsigma(pattern: RamPattern, theta: np.ndarray, k: int) -> np.ndarray:
    """d Sigma / d theta_k at theta (observed block)."""
    A, O = pattern.matrices(theta)
    q = len(pattern.nodes)
    p = pattern.n_observed
    B = np.linalg.inv(np.eye(q) - A)
    C = B @ O @ B.T
    in_a = np.argwhere(pattern.a_index == k)
    if in_a.size:
        i, j = in_a[0]
        M = np.outer(B[:, i], C[j, :])
        return (M + M.T)[:p, :p]
    in_o = np.argwhere(pattern.o_index == k)
    (i, j) = in_o[0]
    dO = np.zeros((q, q))
    dO[i, j] = dO[j, i] = 1.0
    return (B @ dO @ B.T)[:p, :p]


def fml(S: np.ndarray, Sigma: np.ndarray) -> float:
    """ML discrepancy log det Sigma + tr(S Sigma^-1) - log det S - p.

    Returns +inf when Sigma is not positive definite, which lets optimizers
    reject the point instead of crashing.
    """
    S = np.asarray(S, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    p = S.shape[0]
    if S.shape != Sigma.shape or S.shape != (p, p):
        raise ValueError("S and Sigma must be square matrices of equal size")
    sign_s, logdet_s = np.linalg.slogdet(S)
    if sign_s <= 0:
        raise ValueError("sample covariance must be positive definite")
    try:
        chol = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        return math.inf
    logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(chol))))
    inv_sigma = np.linalg.inv(Sigma)
    return float(logdet_sigma + np.trace(S @ inv_sigma) - logdet_s - p)


def _objective(pattern: RamPattern, S: np.ndarray, logdet_s: float):
    """fml and its analytic gradient on the transformed (unconstrained) scale."""
    q = len(pattern.nodes)
    p = pattern.n_observed
    eye = np.eye(q)
    a_entries = [tuple(np.argwhere(pattern.a_index == k)[0]) if (pattern.a_index == k).any() else None
                 for k in range(pattern.n_free)]
    o_entries = [tuple(np.argwhere(pattern.o_index == k)[0]) if (pattern.o_index == k).any() else None
                 for k in range(pattern.n_free)]

    def fun(u: np.ndarray) -> tuple[float, np.ndarray]:
        theta = u.copy()
        theta[pattern.is_variance] = np.exp(u[pattern.is_variance])
        A, O = pattern.matrices(theta)
        try:
            B = np.linalg.inv(eye - A)
        except np.linalg.LinAlgError:
            return _BIG, np.zeros_like(u)
        C = B @ O @ B.T
        Sigma = C[:p, :p]
        try:
            chol = np.linalg.cholesky(Sigma)
        except np.linalg.LinAlgError:
            return _BIG, np.zeros_like(u)
        logdet_sigma = 2.0 * float(np.sum(np.log(np.diag(chol))))
        inv_sigma = np.linalg.inv(Sigma)
        value = float(logdet_sigma + np.trace(S @ inv_sigma) - logdet_s - p)

        W = inv_sigma - inv_sigma @ S @ inv_sigma
        Q = np.zeros((q, q))
        Q[:p, :p] = W
        P = C @ Q @ B          # for A entries: dF = 2 * P[j, i]
        R = B.T @ Q @ B        # for O entries
        grad = np.empty(pattern.n_free)
        for k in range(pattern.n_free):
            if a_entries[k] is not None:
                i, j = a_entries[k]
                grad[k] = 2.0 * P[j, i]
            else:
                i, j = o_entries[k]
                grad[k] = R[i, j] if i == j else 2.0 * R[i, j]
        grad[pattern.is_variance] *= theta[pattern.is_variance]
        return value, grad

    return fun


def _start_vector(pattern: RamPattern, rng: np.random.Generator, jitter: float) -> np.ndarray:
    u = np.empty(pattern.n_free)
    for k, label in enumerate(pattern.labels):
        if pattern.is_variance[k]:
            u[k] = math.log(0.5)
        elif "=~" in label:
            u[k] = 0.7
        elif "~~" in label:
            u[k] = 0.05
        else:
            u[k] = 0.0
    return u + rng.normal(0.0, jitter, pattern.n_free)


def fit_sem(
    model: SemModel,
    panel: Panel,
    multistarts: int = 4,
    seed: int = 0,
    gtol: float = 1e-6,
    max_iter: int = 5000,
) -> SemFit:
    """Estimate the model on the listwise-complete, standardized panel rows.

    Standard errors are sqrt of the diagonal of (2/n) x inverse Hessian of
    the discrepancy at the optimum; a non-invertible Hessian yields None.
    Free variances at the boundary of their log parameterization are flagged
    as Heywood cases rather than clamped.
    """
    missing_cols = [v for v in model.observed if v not in panel.names]
    if missing_cols:
        raise KeyError(f"panel lacks observed variables: {missing_cols}")
    M = panel.value_matrix(model.observed)
    complete = ~np.isnan(M).any(axis=1)
    M = M[complete]
    n = M.shape[0]
    pattern = compile_model(model)
    if n <= pattern.n_free:
        raise ValueError(f"{n} complete rows cannot identify {pattern.n_free} parameters")
    sd = M.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        bad = [model.observed[j] for j in np.flatnonzero(sd == 0.0)]
        raise ValueError(f"zero-variance observed variables: {bad}")
    Z = (M - M.mean(axis=0)) / sd
    S = np.cov(Z, rowvar=False, ddof=1)
    S = np.atleast_2d(S)
    _, logdet_s = np.linalg.slogdet(S)

    fun = _objective(pattern, S, float(logdet_s))
    best = None
    for k in range(multistarts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, k)))
        u0 = _start_vector(pattern, rng, jitter=0.0 if k == 0 else 0.15)
        res = optimize.minimize(
            fun, u0, jac=True, method="BFGS",
            options={"gtol": gtol, "maxiter": max_iter},
        )
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None

    u = best.x
    theta = u.copy()
    theta[pattern.is_variance] = np.exp(u[pattern.is_variance])
    value, grad = fun(u)
    converged = bool(best.success or float(np.linalg.norm(grad)) < gtol * 10)

    std_errors = _sem_std_errors(fun, pattern, u, theta, n)
    heywood = tuple(
        pattern.labels[k]
        for k in range(pattern.n_free)
        if pattern.is_variance[k] and theta[k] < HEYWOOD_FLOOR
    )
    estimates = {lab: float(v) for lab, v in zip(pattern.labels, theta)}
    return SemFit(
        estimates=estimates,
        std_errors=std_errors,
        fml=float(value),
        converged=converged,
        n=n,
        heywood=heywood,
    )


def _sem_std_errors(fun, pattern: RamPattern, u: np.ndarray, theta: np.ndarray, n: int,
                    h: float = 1e-5) -> dict[str, float] | None:
    m = u.size
    H = np.empty((m, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        _, gp = fun(u + e)
        _, gm = fun(u - e)
        H[i] = (gp - gm) / (2.0 * h)
    H = 0.5 * (H + H.T)
    try:
        eig = np.linalg.eigvalsh(H)
        if np.any(eig <= 0.0):
            return None
        cov_u = np.linalg.inv(H) * (2.0 / n)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(cov_u) <= 0.0):
        return None
    jac = np.where(pattern.is_variance, theta, 1.0)
    return {
        lab: float(abs(jac[k]) * math.sqrt(cov_u[k, k]))
        for k, lab in enumerate(pattern.labels)
    }


def parse_model(text: str) -> SemModel:
    """Parse the line-oriented model syntax.

    Three statement kinds: `latent =~ ind1 ind2 ...` (measurement),
    `outcome ~ pred1 pred2 ...` (regression), `a ~~ b` (covariance).
    `#` starts a comment.
    """
    loadings: list[tuple[str, str, float | None]] = []
    regressions: list[tuple[str, str]] = []
    covariances: list[tuple[str, str, float | None]] = []
    latents: list[str] = []
    mentioned: list[str] = []

    def note(name: str) -> None:
        if name not in mentioned:
            mentioned.append(name)

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=~" in line:
            lhs, rhs = (part.strip() for part in line.split("=~", 1))
            if lhs not in latents:
                latents.append(lhs)
            note(lhs)
            for ind in rhs.split():
                loadings.append((lhs, ind, None))
                note(ind)
        elif "~~" in line:
            parts = line.split("~~", 1)
            a, b = parts[0].strip(), parts[1].strip()
            if not a or not b or " " in b:
                raise ValueError(f"malformed covariance line: {raw!r}")
            covariances.append((a, b, None))
            note(a)
            note(b)
        elif "~" in line:
            lhs, rhs = (part.strip() for part in line.split("~", 1))
            note(lhs)
            for pred in rhs.split():
                regressions.append((lhs, pred))
                note(pred)
        else:
            raise ValueError(f"unrecognized statement: {raw!r}")

    observed = tuple(nm for nm in mentioned if nm not in latents)
    return SemModel(
        observed=observed,
        latent=tuple(latents),
        loadings=tuple(loadings),
        regressions=tuple(regressions),
        covariances=tuple(covariances),
    )


def builtin_model(name: str) -> SemModel:
    """Load one of the shipped country model specs ('italy' or 'japan')."""
    fname = f"{name.lower()}.sem"
    ref = resources.files("swbdyn.modelspecs").joinpath(fname)
    if not ref.is_file():
        raise ValueError(f"no builtin model {name!r}")
    return parse_model(ref.read_text())


def load_model(path: str | Path) -> SemModel:
    return parse_model(Path(path).read_text())
