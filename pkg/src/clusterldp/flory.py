"""Explicit solution of the discrete multi-type Flory equation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .measures import MicroMeasure, configs_up_to, integrated_config, sub_configs, support
from .solvers import sigma, solve_characteristic
from .trees import TauTable


def flory_log_state(mu, kappa, t: float, k, table: TauTable | None = None) -> float:
    """``log lambda_k(t)``, ``lambda_k(t) = t^{|k|-1} tau(k) e^{-t<k, kappa mu>} prod mu^k / k!``."""
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n == 0 or any(v and mu[s] == 0 for s, v in enumerate(k)):
        return -math.inf
    if t == 0:
        return math.log(mu[k.index(1)]) if n == 1 else -math.inf
    table = table or TauTable(kappa)
    lt = table.log_tau(k)
    if lt == -math.inf:
        return -math.inf
    km = kappa @ mu
    out = (n - 1) * math.log(t) + lt
    for s, v in enumerate(k):
        if v:
            out += v * (math.log(mu[s]) - t * km[s]) - math.lgamma(v + 1)
    return out


def flory_value(mu, kappa, t: float, k, table: TauTable | None = None) -> float:
    lv = flory_log_state(mu, kappa, t, k, table)
    return 0.0 if lv == -math.inf else math.exp(lv)


def flory_state(mu, kappa, t: float, kmax: int, table: TauTable | None = None) -> MicroMeasure:
    """``lambda(t)`` on every ``|k| <= kmax``; at ``t = 0`` the singletons ``mu_r``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    mu = np.asarray(mu, dtype=float)
    table = table or TauTable(kappa)
    atoms = {k: flory_value(mu, kappa, t, k, table) for k in configs_up_to(mu.size, kmax, support(mu))}
    return MicroMeasure(atoms, mu.size)


def flory_derivative(mu, kappa, t: float, k, table: TauTable | None = None) -> float:
    """``d/dt lambda_k(t) = ((|k|-1)/t - <k, kappa mu>) lambda_k(t)``."""
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    lam = flory_value(mu, kappa, t, k, table)
    return ((sum(k) - 1) / t - float(np.asarray(k) @ kappa @ mu)) * lam


def flory_rhs(mu, kappa, t: float, k, table: TauTable | None = None) -> float:
    """Coagulation gain over splits ``m + m' = k`` minus the loss against the initial mass."""
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    table = table or TauTable(kappa)
    k = tuple(int(v) for v in k)
    karr = np.asarray(k, dtype=float)
    gain = 0.0
    for m in sub_configs(k):
        mt = tuple(a - b for a, b in zip(k, m))
        if sum(m) == 0 or sum(mt) == 0:
            continue
        lm = flory_value(mu, kappa, t, m, table)
        if lm == 0:
            continue
        gain += lm * flory_value(mu, kappa, t, mt, table) * float(np.asarray(m) @ kappa @ np.asarray(mt))
    # sum_m l_m(0) <k, kappa m> with l(0) the singletons mu_r
    loss = flory_value(mu, kappa, t, k, table) * float(karr @ kappa @ mu)
    return 0.5 * gain - loss


def flory_residual(mu, kappa, t: float, k, table: TauTable | None = None) -> float:
    """``|d/dt lambda_k - RHS|`` with the analytic derivative; exact up to rounding."""
    if t <= 0:
        raise ValueError("t must be positive")
    table = table or TauTable(kappa)
    return abs(flory_derivative(mu, kappa, t, k, table) - flory_rhs(mu, kappa, t, k, table))


def finite_difference_derivative(mu, kappa, t: float, k, h: float = 1e-5) -> float:
    return (flory_value(mu, kappa, t + h, k) - flory_value(mu, kappa, t - h, k)) / (2 * h)


def gelation_time(mu, kappa) -> float:
    s = sigma(kappa, mu)
    return math.inf if s == 0 else 1.0 / s


def gel_mass(mu, kappa, t: float) -> np.ndarray:
    """``mu - c*(t)``, with ``c*(t)`` the characteristic solution for ``t kappa``."""
    mu = np.asarray(mu, dtype=float)
    if t == 0:
        return np.zeros_like(mu)
    return mu - solve_characteristic(t * np.asarray(kappa, dtype=float), mu).solution


@dataclass(frozen=True)
class FloryTrajectory:
    times: np.ndarray
    states: tuple  # MicroMeasure per time
    gel: np.ndarray  # (len(times), ntypes)
    micro_mass: np.ndarray  # total |c(lambda(t))| over the window
    max_residual: np.ndarray


def gel_mass_curve(mu, kappa, times, kmax: int = 0) -> np.ndarray:
    return np.array([gel_mass(mu, kappa, float(t)) for t in times])


def flory_trajectory(mu, kappa, times, kmax: int) -> FloryTrajectory:
    mu = np.asarray(mu, dtype=float)
    table = TauTable(kappa)
    states, res = [], []
    for t in times:
        t = float(t)
        states.append(flory_state(mu, kappa, t, kmax, table))
        if t > 0:
            res.append(max(flory_residual(mu, kappa, t, k, table)
                           for k in configs_up_to(mu.size, kmax, support(mu))))
        else:
            res.append(0.0)
    micro = np.array([integrated_config(s).sum() for s in states])
    return FloryTrajectory(np.asarray(times, dtype=float), tuple(states),
                           gel_mass_curve(mu, kappa, times), micro, np.array(res))
