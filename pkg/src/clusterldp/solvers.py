"""Spectral radius, survival and characteristic fixed points, saturation, chi.

All fixed points are computed by monotone iteration, class by class over
the irreducible decomposition of the kernel on the support of the measure.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from .measures import irreducible_classes, support

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
MAX_ITER = 1_000_000
CRITICAL_BAND = 1e-4
# below this distance from 1 a class is treated as exactly critical
CRITICAL_SNAP = 1e-9


class ConvergenceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class FixedPointResult:
    solution: np.ndarray
    iterations: int
    residual: float
    regime: str
    sigma: float = float("nan")
    converged: bool = True
    extra: dict = field(default_factory=dict)


def regime_of(sigma_value: float) -> str:
    if abs(sigma_value - 1.0) < CRITICAL_BAND:
        return "critical"
    return "subcritical" if sigma_value < 1.0 else "supercritical"


def operator_matrix(kappa, nu) -> np.ndarray:
    """Matrix of ``f -> kappa(f nu)``: entries ``kappa[r, s] * nu[s]``."""
    return np.asarray(kappa, dtype=float) * np.asarray(nu, dtype=float)[None, :]


def sigma(kappa, nu, tol: float = DEFAULT_TOL, max_iter: int = 100_000) -> float:
    """Spectral radius of ``(kappa[r, s] nu[s])``.

    Power iteration runs on the symmetrised matrix shifted by the identity,
    which is primitive on each irreducible block, so bipartite kernels
    converge too. Falls back to a symmetric eigensolve if the iteration
    stalls.
    """
    kappa = np.asarray(kappa, dtype=float)
    nu = np.asarray(nu, dtype=float)
    root = np.sqrt(nu)
    sym = root[:, None] * kappa * root[None, :]
    n = sym.shape[0]
    if not np.any(sym > 0):
        return 0.0
    shifted = sym + np.eye(n)
    v = np.ones(n) / math.sqrt(n)
    est = 0.0
    for _ in range(max_iter):
        w = shifted @ v
        norm = np.linalg.norm(w)
        w /= norm
        new = float(w @ shifted @ w)
        if abs(new - est) <= tol * max(1.0, abs(new)) and np.linalg.norm(w - v) < math.sqrt(tol):
            return max(new - 1.0, 0.0)
        est, v = new, w
    warnings.warn("power iteration did not converge; using eigendecomposition",
                  ConvergenceWarning, stacklevel=2)
    return float(np.max(np.abs(np.linalg.eigvalsh(sym))))


def _class_sigma(kappa, mu, cls) -> float:
    idx = np.asarray(cls)
    return sigma(kappa[np.ix_(idx, idx)], mu[idx])


def solve_survival(kappa, mu, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
                   check_monotone: bool = False) -> FixedPointResult:
    """Maximal solution of ``rho = 1 - exp(-kappa(rho mu))``.

    Iterates from ``rho = 1`` on every supercritical irreducible class; the
    classes at or below criticality get ``rho = 0``. Types outside the
    support of ``mu`` receive the survival probability of a process started
    there.
    """
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = mu.shape[0]
    rho = np.zeros(n)
    total_iter = 0
    converged = True
    worst = 0.0
    for cls in irreducible_classes(kappa, mu):
        idx = np.asarray(cls)
        s = _class_sigma(kappa, mu, idx)
        if s <= 1.0 + CRITICAL_SNAP:
            continue
        t = kappa[np.ix_(idx, idx)] * mu[idx][None, :]
        x = np.ones(idx.size)
        res = math.inf
        for it in range(1, max_iter + 1):
            nxt = -np.expm1(-(t @ x))
            if check_monotone:
                assert np.all(nxt <= x + 1e-15) and np.all(nxt >= 0) and np.all(nxt <= 1)
            res = float(np.max(np.abs(nxt - x)))
            x = nxt
            if res <= tol:
                break
        else:
            converged = False
            warnings.warn(f"survival iteration hit the cap on class {cls} (sigma={s:.6g})",
                          ConvergenceWarning, stacklevel=2)
        total_iter += it
        rho[idx] = x
        worst = max(worst, res)
    outside = np.setdiff1d(np.arange(n), support(mu))
    if outside.size:
        rho[outside] = -np.expm1(-(kappa[outside] @ (rho * mu)))
    resid = float(np.max(np.abs(rho + np.expm1(-(kappa @ (rho * mu)))))) if n else 0.0
    s_all = sigma(kappa, mu)
    return FixedPointResult(rho, total_iter, max(resid, 0.0), regime_of(s_all), s_all, converged)


def solve_characteristic(kappa, mu, tol: float = DEFAULT_TOL,
                         max_iter: int = MAX_ITER) -> FixedPointResult:
    """Solution ``c* = (1 - rho) mu`` of ``c exp(-kappa c) = mu exp(-kappa mu)``.

    ``c* = mu`` when ``mu`` is (sub)critical; otherwise the nontrivial
    solution with ``sigma(kappa, c*) < 1``.
    """
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    surv = solve_survival(kappa, mu, tol, max_iter)
    c = (1.0 - surv.solution) * mu
    lhs = c * np.exp(-(kappa @ c))
    rhs = mu * np.exp(-(kappa @ mu))
    resid = float(np.max(np.abs(lhs - rhs))) if mu.size else 0.0
    return FixedPointResult(c, surv.iterations, resid, surv.regime, surv.sigma, surv.converged,
                            {"rho": surv.solution, "survival_residual": surv.residual})


def solve_b_star(kappa, c, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
                 check_monotone: bool = False) -> FixedPointResult:
    """Minimal nontrivial solution of ``kappa(c - b) b = c - b`` with ``b <= c``.

    On each supercritical class iterate ``g <- T(g / (1 + g))`` downwards
    from ``T 1``; ``b = c / (1 + g)``. Subcritical classes keep ``b = c``.
    """
    kappa = np.asarray(kappa, dtype=float)
    c = np.asarray(c, dtype=float)
    b = c.copy()
    total_iter = 0
    converged = True
    for cls in irreducible_classes(kappa, c):
        idx = np.asarray(cls)
        s = _class_sigma(kappa, c, idx)
        if s <= 1.0 + CRITICAL_SNAP:
            continue
        t = kappa[np.ix_(idx, idx)] * c[idx][None, :]
        g = t @ np.ones(idx.size)
        for it in range(1, max_iter + 1):
            nxt = t @ (g / (1.0 + g))
            if check_monotone:
                assert np.all(nxt <= g + 1e-15) and np.all(nxt >= 0)
            res = float(np.max(np.abs(nxt - g)))
            g = nxt
            if res <= tol:
                break
        else:
            converged = False
            warnings.warn(f"saturation iteration hit the cap on class {cls}",
                          ConvergenceWarning, stacklevel=2)
        total_iter += it
        b[idx] = c[idx] / (1.0 + g)
    gap = c - b
    resid = float(np.max(np.abs((kappa @ gap) * b - gap))) if c.size else 0.0
    s_c = sigma(kappa, c)
    return FixedPointResult(b, total_iter, resid, regime_of(s_c), s_c, converged,
                            {"sigma_b": sigma(kappa, b)})


def chi_objective(nu, kappa, theta) -> float:
    """``<nu, log(nu / ((kappa nu) theta))>`` for a probability vector ``nu``."""
    nu = np.asarray(nu, dtype=float)
    kn = np.asarray(kappa, dtype=float) @ nu
    pos = nu > 0
    den = kn[pos] * np.asarray(theta, dtype=float)[pos]
    if np.any(den <= 0):
        return math.inf
    return float(np.sum(nu[pos] * (np.log(nu[pos]) - np.log(den))))


def chi(kappa, theta, restarts: int = 16, seed: int = 0, tol: float = 1e-8) -> float:
    """Infimum of ``chi_objective`` over probability vectors on ``supp(theta)``.

    Softmax coordinates, L-BFGS from a deterministic set of starts (the
    uniform vector, each vertex of the simplex, then random points).
    """
    kappa = np.asarray(kappa, dtype=float)
    theta = np.asarray(theta, dtype=float)
    supp = support(theta)
    if supp.size == 0:
        return math.inf
    kap = kappa[np.ix_(supp, supp)]
    th = theta[supp]
    m = supp.size
    if m == 1:
        return chi_objective(np.ones(1), kap, th)

    def objective(z):
        logp = z - logsumexp(z)
        p = np.exp(logp)
        kn = kap @ p
        with np.errstate(divide="ignore"):
            val = np.sum(p * (logp - np.log(kn) - np.log(th)))
        return val if np.isfinite(val) else 1e300

    rng = np.random.default_rng(seed)
    starts = [np.zeros(m)]
    for i in range(m):
        z = np.full(m, -3.0)
        z[i] = 3.0
        starts.append(z)
    while len(starts) < restarts:
        starts.append(rng.normal(scale=2.0, size=m))
    best = math.inf
    for z0 in starts[:max(restarts, m + 1)]:
        out = minimize(objective, z0, method="L-BFGS-B", options={"ftol": tol * 1e-2, "gtol": 1e-10})
        best = min(best, float(out.fun), chi_objective(softmax(out.x), kap, th))
    # pure vertices are limits of the softmax chart
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        best = min(best, chi_objective(e, kap, th))
    return best


def chi_closed_form(kappa, nu) -> float:
    """``Sigma - log Sigma`` for ``theta = nu exp(-kappa nu)``."""
    s = sigma(kappa, nu)
    if s <= 0:
        return math.inf
    return s - math.log(s)


def theta_of(kappa, nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    return nu * np.exp(-(np.asarray(kappa, dtype=float) @ nu))
