"""Multi-type Borel law: total progeny of a Poisson branching process."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphsim import map_replicas
from .measures import ModelError, configs_up_to, support
from .rates import DEFAULT_KMAX, geometric_tail, lambda_c
from .solvers import chi, solve_survival, theta_of
from .trees import TauTable

EXPLOSION_CAP = 10_000
SAMPLE_CHUNK = 65_536


@dataclass(frozen=True)
class BorelParams:
    kappa: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        kappa = np.asarray(self.kappa, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if np.any(nu < 0):
            raise ModelError("nu must be nonnegative")
        if kappa.shape != (nu.size, nu.size):
            raise ModelError(f"kernel shape {kappa.shape} does not match {nu.size} types")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "nu", nu)

    @property
    def offspring_means(self) -> np.ndarray:
        """``M[r, s] = kappa(r, s) nu_s``: mean type-``s`` children of a type-``r`` parent."""
        return self.kappa * self.nu[None, :]


def log_borel_pmf(params: BorelParams, r: int, k, table: TauTable | None = None) -> float:
    k = tuple(int(v) for v in k)
    nu = params.nu
    if nu[r] <= 0:
        raise ModelError(f"nu_{r} = 0: the process cannot start in type {r}")
    if k[r] < 1 or any(v and nu[s] == 0 for s, v in enumerate(k)):
        return -math.inf
    table = table or TauTable(params.kappa)
    lt = table.log_tau(k)
    if lt == -math.inf:
        return -math.inf
    knu = params.kappa @ nu
    out = lt + math.log(k[r]) - math.log(nu[r])
    for s, v in enumerate(k):
        if v:
            out += v * (math.log(nu[s]) - knu[s]) - math.lgamma(v + 1)
    return out


def borel_pmf(params: BorelParams, r: int, k, table: TauTable | None = None) -> float:
    """``P_r(E = k) = tau(k) (k_r / nu_r) prod (nu_s e^{-(kappa nu)_s})^{k_s} / k_s!``."""
    lp = log_borel_pmf(params, r, k, table)
    return 0.0 if lp == -math.inf else math.exp(lp)


def borel_table(params: BorelParams, r: int, kmax: int = DEFAULT_KMAX):
    """Pmf for all ``|k| <= kmax`` plus the partial extinction sum and its tail envelope."""
    table = TauTable(params.kappa)
    active = support(params.nu)
    rows = [(k, borel_pmf(params, r, k, table)) for k in configs_up_to(params.nu.size, kmax, active)]
    shells = np.zeros(kmax + 1)
    for k, p in rows:
        shells[sum(k)] += p
    th = theta_of(params.kappa, params.nu)
    tail, flag = geometric_tail(shells[1:], chi(params.kappa, th))
    return rows, float(shells.sum()), tail, flag


class Explosion:
    """Marker for a progeny that exceeded the cap (read as survival)."""

    def __repr__(self):
        return "Explosion()"

    def __eq__(self, other):
        return isinstance(other, Explosion)

    def __hash__(self):
        return 0


EXPLODED = Explosion()


def _progeny_batch(rng, means: np.ndarray, r: int, size: int, cap: int):
    """Generation-by-generation simulation of ``size`` independent lines.

    Returns the progeny counts ``(size, ntypes)`` and an explosion mask.
    """
    ntypes = means.shape[0]
    total = np.zeros((size, ntypes), dtype=np.int64)
    total[:, r] = 1
    current = total.copy()
    alive = np.arange(size)
    exploded = np.zeros(size, dtype=bool)
    while alive.size:
        lam = current[alive] @ means
        children = rng.poisson(lam)
        total[alive] += children
        current[alive] = children
        sizes = total[alive].sum(axis=1)
        boom = sizes > cap
        exploded[alive[boom]] = True
        keep = (~boom) & (children.sum(axis=1) > 0)
        alive = alive[keep]
    return total, exploded


def sample_total_progeny(params: BorelParams, r: int, seed=None, cap: int = EXPLOSION_CAP,
                         rng=None):
    """One breadth-first draw of the total progeny; ``EXPLODED`` past ``cap``."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    total, boom = _progeny_batch(rng, params.offspring_means, r, 1, cap)
    if boom[0]:
        return EXPLODED
    return tuple(int(v) for v in total[0])


def sample_progeny_many(params: BorelParams, r: int, samples: int, seed: int,
                        cap: int = EXPLOSION_CAP, threads: int | None = 1,
                        chunk: int = SAMPLE_CHUNK):
    """Many independent progenies; chunk ``i`` uses stream ``(seed, i)``.

    Returns ``(counts, exploded)`` arrays in chunk order.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    means = params.offspring_means
    nchunks = -(-samples // chunk)

    def run(i, rng):
        return _progeny_batch(rng, means, r, min(chunk, samples - i * chunk), cap)

    parts = map_replicas(run, seed, nchunks, threads)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def empirical_pmf(counts: np.ndarray, exploded: np.ndarray) -> dict:
    finite = counts[~exploded]
    uniq, mult = np.unique(finite, axis=0, return_counts=True)
    n = counts.shape[0]
    return {tuple(int(v) for v in k): m / n for k, m in zip(uniq, mult)}


def tv_to_pmf(emp: dict, params: BorelParams, r: int, explosion_freq: float = 0.0) -> float:
    """Total variation between an empirical law and the Borel law (explosion as an atom).

    The exact law's mass on configurations not observed is added through its
    complement, so no truncation is needed.
    """
    table = TauTable(params.kappa)
    diff = 0.0
    seen_exact = 0.0
    for k, p in emp.items():
        q = borel_pmf(params, r, k, table)
        seen_exact += q
        diff += abs(p - q)
    # the exact law puts 1 - rho_r on finite progenies; whatever was not observed is unmatched
    rho = solve_survival(params.kappa, params.nu).solution[r]
    diff += max(1.0 - rho - seen_exact, 0.0)
    diff += abs(explosion_freq - rho)
    return 0.5 * diff


def check_micro_branching_relation(mu, kappa, kmax: int = 5) -> float:
    """Max relative gap of ``mu_r P_r(E = k)`` against ``lambda_k(mu) k_r``."""
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    params = BorelParams(kappa, mu)
    table = TauTable(kappa)
    lam = lambda_c(mu, kappa, kmax, table)
    worst = 0.0
    for k in configs_up_to(mu.size, kmax):
        for r in range(mu.size):
            rhs = lam.measure.weight(k) * k[r]
            lhs = mu[r] * borel_pmf(params, r, k, table) if mu[r] > 0 else 0.0
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300) if rhs else abs(lhs))
    return worst
