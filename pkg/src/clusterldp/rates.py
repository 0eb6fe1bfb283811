"""Rate functions of the cluster LDP, their minimizers and the tree series.

Infinite values are returned as ``RateValue`` objects with a ``reason``
naming the condition that failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import (MacroMeasure, MicroMeasure, configs_up_to, connectable,
                       entropy_terms, integrated_config, irreducible_classes, support)
from .solvers import chi, regime_of, sigma, solve_b_star, solve_characteristic
from .trees import TauTable

DEFAULT_KMAX = 40
MASS_TOL = 1e-12


class SeriesDivergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class RateValue:
    value: float
    breakdown: dict = field(default_factory=dict)
    reason: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return self.value

    @classmethod
    def infinite(cls, reason: str, sign: float = 1.0) -> "RateValue":
        return cls(math.copysign(math.inf, sign), {}, reason)


@dataclass(frozen=True)
class TruncatedSeries:
    partial: float
    kmax: int
    tail_bound: float
    flag: str = "ok"

    @property
    def bracket(self):
        return self.partial, self.partial + self.tail_bound


def _log_terms(log_theta: np.ndarray, kappa, active, kmax: int, table: TauTable | None = None):
    """``log(tau(k) prod theta^k / k!)`` for every ``k`` on ``active`` with ``|k| <= kmax``."""
    table = table or TauTable(kappa)
    ntypes = log_theta.shape[0]
    configs = configs_up_to(ntypes, kmax, active)
    out = np.empty(len(configs))
    for i, k in enumerate(configs):
        lt = table.log_tau(k)
        if lt == -math.inf:
            out[i] = -math.inf
            continue
        out[i] = lt + sum(v * log_theta[s] - math.lgamma(v + 1) for s, v in enumerate(k) if v)
    return configs, out


def _shell_sums(configs, values) -> np.ndarray:
    sizes = np.array([sum(k) for k in configs])
    return np.bincount(sizes, weights=values, minlength=sizes.max() + 1 if sizes.size else 1)


def geometric_tail(shells: np.ndarray, chi_value: float) -> tuple:
    """Envelope for the sum of shells beyond the last one.

    Uses ratio ``q = max(e^{-(chi-1)}, s_K / s_{K-1})``; shell ratios increase
    to ``e^{-(chi-1)}`` (exactly so for one type). Returns ``(bound, flag)``.
    """
    last = float(shells[-1]) if shells.size else 0.0
    if last == 0.0:
        # a zero final shell only happens when every shell vanishes from some size on
        return 0.0, "ok"
    if chi_value < 1:
        return math.inf, "divergent"
    q = math.exp(-(chi_value - 1.0))
    if shells.size >= 2 and shells[-2] > 0:
        q = max(q, float(shells[-1] / shells[-2]))
    if q >= 1:
        return math.inf, "critical, slow tail"
    flag = "critical, slow tail" if chi_value - 1.0 < 1e-3 else "ok"
    return last * q / (1 - q), flag


@dataclass(frozen=True)
class LambdaC:
    """Truncated ``lambda_c`` plus what is known analytically about its tail."""

    measure: MicroMeasure
    c: np.ndarray
    c_tilde: np.ndarray  # c(lambda_c); equals c when sigma(kappa, c) <= 1
    kmax: int
    total_mass: float  # |lambda_c|, exact
    tail_bound: float  # envelope on the mass beyond kmax
    sigma: float
    regime: str
    flag: str
    log_theta: np.ndarray

    @property
    def partial_mass(self) -> float:
        return self.measure.total_mass()

    @property
    def tail_mass(self) -> float:
        return max(self.total_mass - self.partial_mass, 0.0)

    @property
    def tail_config(self) -> np.ndarray:
        return np.maximum(self.c_tilde - integrated_config(self.measure), 0.0)


def lambda_c(c, kappa, kmax: int = DEFAULT_KMAX, table: TauTable | None = None) -> LambdaC:
    """``lambda_k(c) = tau(k) prod (c_s e^{-(kappa c)_s})^{k_s} / k_s!`` for ``|k| <= kmax``."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    c = np.asarray(c, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    active = support(c)
    with np.errstate(divide="ignore"):
        log_theta = np.log(c) - kappa @ c
    configs, logs = _log_terms(log_theta, kappa, active, kmax, table)
    vals = np.exp(logs)
    atoms = {k: v for k, v in zip(configs, vals) if v > 0}
    meas = MicroMeasure(atoms, c.shape[0])
    s = sigma(kappa, c)
    if active.size:
        shells = _shell_sums(configs, vals)
        th = np.exp(np.where(c > 0, log_theta, -np.inf))
        chi_value = chi(kappa, th)
        tail, flag = geometric_tail(shells, chi_value)
    else:
        tail, flag = 0.0, "ok"
    c_tilde = solve_characteristic(kappa, c).solution
    total = float(c_tilde.sum() - 0.5 * c_tilde @ kappa @ c_tilde)
    return LambdaC(meas, c, c_tilde, kmax, total, tail, s, regime_of(s), flag, log_theta)


def gamma_series(theta, kappa, r: int, kmax: int, table: TauTable | None = None) -> TruncatedSeries:
    """Partial sum of ``Gamma_r(theta) = sum_k tau(k) k_r prod theta^k / k!``."""
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    theta = np.asarray(theta, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    active = support(theta)
    if r not in active:
        return TruncatedSeries(0.0, kmax, 0.0)
    chi_value = chi(kappa, theta)
    if chi_value < 1 - 1e-9:
        raise SeriesDivergence(f"chi(kappa, theta) = {chi_value:.6g} < 1: the series diverges")
    with np.errstate(divide="ignore"):
        log_theta = np.log(theta)
    configs, logs = _log_terms(log_theta, kappa, active, kmax, table)
    vals = np.exp(logs) * np.array([k[r] for k in configs], dtype=float)
    shells = _shell_sums(configs, vals)
    tail, flag = geometric_tail(shells, chi_value)
    return TruncatedSeries(float(shells.sum()), kmax, tail, flag)


def rate_micro(lam: MicroMeasure, mu, kappa, tail: LambdaC | None = None,
               table: TauTable | None = None) -> RateValue:
    """``I_Mi(lambda)``.

    With ``tail`` (the ``LambdaC`` that ``lam`` truncates) the contribution of
    the omitted atoms ``|k| > kmax`` is added in closed form.
    """
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    table = table or TauTable(kappa)
    with np.errstate(divide="ignore"):
        log_mu = np.log(mu)
    ent = 0.0
    size_term = 0.0
    for k, w in lam.atoms.items():
        lt = table.log_tau(k)
        if lt == -math.inf:
            return RateValue.infinite(f"tau{k} = 0 but lambda charges it")
        if any(v and mu[s] == 0 for s, v in enumerate(k)):
            return RateValue.infinite(f"{k} uses a type outside supp(mu)")
        ref = lt + sum(v * log_mu[s] - math.lgamma(v + 1) for s, v in enumerate(k) if v)
        ent += w * (math.log(w) - ref)
        size_term += w * (sum(k) - 1)
    c = integrated_config(lam)
    tail_ent = tail_size = 0.0
    if tail is not None:
        tc = tail.tail_config
        ratio = np.where(tc > 0, tail.log_theta - np.where(mu > 0, log_mu, 0.0), 0.0)
        tail_ent = float(tc @ ratio)
        tail_size = float(tc.sum() - tail.tail_mass)
        c = c + tc
    iso = 0.5 * float(c @ kappa @ mu)
    value = ent + tail_ent + size_term + tail_size + iso
    return RateValue(value, {"entropy": ent + tail_ent, "size": size_term + tail_size,
                             "isolation": iso, "tail_entropy": tail_ent, "tail_size": tail_size})


def macro_atom_rate(y, mu, kappa) -> float:
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    ent = entropy_terms(y, -np.expm1(-(kappa @ y)) * mu)
    return float(ent.sum() + 0.5 * y @ kappa @ (mu - y))


def rate_macro(alpha: MacroMeasure, mu, kappa) -> RateValue:
    """``I_Ma(alpha)``, summed over the atoms of ``alpha``."""
    parts = [macro_atom_rate(y, mu, kappa) for y in alpha.atoms]
    for i, v in enumerate(parts):
        if v == math.inf:
            return RateValue.infinite(f"atom {i} charges a type where (1 - e^(-kappa y)) mu = 0")
    return RateValue(float(sum(parts)), {"atoms": parts})


def rate_meso(nu, mu, kappa) -> RateValue:
    """``I_Me(nu) = <nu, log(nu / ((kappa nu) mu))> + <nu, kappa mu> / 2``."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    ent = entropy_terms(nu, (kappa @ nu) * mu)
    if np.any(np.isinf(ent)):
        return RateValue.infinite("nu is not absolutely continuous w.r.t. (kappa nu) mu")
    iso = 0.5 * float(nu @ kappa @ mu)
    return RateValue(float(ent.sum()) + iso, {"entropy": float(ent.sum()), "isolation": iso})


def _leftover(mu, used):
    nu = mu - used
    scale = max(1.0, float(mu.max()) if mu.size else 1.0)
    if np.any(nu < -MASS_TOL * scale):
        return None
    return np.maximum(nu, 0.0)


def rate_total(lam: MicroMeasure, alpha: MacroMeasure, mu, kappa, tail: LambdaC | None = None,
               reducible: bool = False) -> RateValue:
    """``I(lambda, alpha) = I_Mi + I_Ma + I_Me(mu - c(lambda) - c(alpha))``.

    ``reducible=True`` also requires every macroscopic atom to be connectable.
    """
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    c = integrated_config(lam) + integrated_config(alpha, mu.shape[0])
    if tail is not None:
        c = c + tail.tail_config
    nu = _leftover(mu, c)
    if nu is None:
        return RateValue.infinite("c(lambda) + c(alpha) exceeds mu")
    if reducible and not connectable(alpha, irreducible_classes(kappa, mu)):
        return RateValue.infinite("alpha is not connectable")
    mi = rate_micro(lam, mu, kappa, tail)
    ma = rate_macro(alpha, mu, kappa)
    me = rate_meso(nu, mu, kappa)
    for part in (mi, ma, me):
        if not part.finite:
            return part
    return RateValue(mi.value + ma.value + me.value,
                     {"micro": mi.value, "macro": ma.value, "meso": me.value})


def g_functional(b, c, mu, kappa) -> float:
    b, c, mu = (np.asarray(v, dtype=float) for v in (b, c, mu))
    kappa = np.asarray(kappa, dtype=float)
    d = c - b
    return float(entropy_terms(b, mu).sum() - 0.5 * b @ kappa @ b
                 + entropy_terms(d, (kappa @ d) * mu).sum() + 0.5 * c @ kappa @ mu)


def f_functional(b, c, mu, kappa) -> float:
    b, c, mu = (np.asarray(v, dtype=float) for v in (b, c, mu))
    kappa = np.asarray(kappa, dtype=float)
    pos = c > 0
    if np.any(b[pos] <= 0) or np.any(mu[pos] <= 0):
        return -math.inf
    log_part = float(c[pos] @ (np.log(b[pos]) - np.log(mu[pos])))
    return (log_part + float((c - b).sum()) + 0.5 * float(b @ kappa @ b)
            - float(c @ kappa @ b) + 0.5 * float(c @ kappa @ mu))


def micro_infimum(c, mu, kappa) -> float:
    """``<c, log c/mu> + <c, kappa(mu - c)> / 2``, the least ``I_Mi`` at fixed ``c(lambda)``."""
    c, mu = np.asarray(c, dtype=float), np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    return float(entropy_terms(c, mu).sum() + 0.5 * c @ kappa @ (mu - c))


def j_rate(c, mu, kappa) -> RateValue:
    """Cost of total non-macroscopic mass ``c``.

    Subcritical ``c``: ``<c, log c/mu> + <c, kappa(mu-c)>/2``. Otherwise the
    micro part saturates at ``b*(c)`` and the rest is mesoscopic.
    """
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any((c > 0) & (mu == 0)):
        return RateValue.infinite("c charges a type outside supp(mu)")
    s = sigma(kappa, c)
    bres = solve_b_star(kappa, c)
    b = bres.solution
    mi = micro_infimum(b, mu, kappa)
    me = rate_meso(c - b, mu, kappa)
    if not me.finite:
        return me
    value = mi + me.value
    return RateValue(value, {"branch": "subcritical" if s <= 1 else "supercritical",
                             "sigma": s, "b_star": b.tolist(), "micro": mi, "meso": me.value,
                             "G": g_functional(b, c, mu, kappa), "F": f_functional(b, c, mu, kappa)})


def contracted_micro(lam: MicroMeasure, mu, kappa, tail: LambdaC | None = None) -> RateValue:
    mu = np.asarray(mu, dtype=float)
    c = integrated_config(lam) + (tail.tail_config if tail is not None else 0.0)
    rest = _leftover(mu, c)
    if rest is None:
        return RateValue.infinite("c(lambda) exceeds mu")
    alpha = MacroMeasure((rest,)) if np.any(rest > 0) else MacroMeasure()
    mi = rate_micro(lam, mu, kappa, tail)
    ma = rate_macro(alpha, mu, kappa)
    if not mi.finite:
        return mi
    if not ma.finite:
        return ma
    return RateValue(mi.value + ma.value, {"micro": mi.value, "macro": ma.value})


def contracted_macro(alpha: MacroMeasure, mu, kappa) -> RateValue:
    mu = np.asarray(mu, dtype=float)
    rest = _leftover(mu, integrated_config(alpha, mu.shape[0]))
    if rest is None:
        return RateValue.infinite("c(alpha) exceeds mu")
    ma = rate_macro(alpha, mu, kappa)
    if not ma.finite:
        return ma
    j = j_rate(rest, mu, kappa)
    if not j.finite:
        return j
    return RateValue(ma.value + j.value, {"macro": ma.value, "J": j.value, **{
        k: v for k, v in j.breakdown.items() if k in ("G", "F", "branch")}})


@dataclass(frozen=True)
class Minimizer:
    micro: LambdaC
    macro: MacroMeasure
    regime: str
    c_star: np.ndarray
    value: RateValue
    reducible: bool


def minimize_rate(mu, kappa, kmax: int = DEFAULT_KMAX) -> Minimizer:
    """The zero of ``I``: ``(lambda_mu, 0)`` or ``(lambda_{c*}, delta_{mu - c*})``.

    For a reducible kernel the giant mass is split into one atom per
    supercritical irreducible class.
    """
    mu = np.asarray(mu, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    classes = irreducible_classes(kappa, mu)
    res = solve_characteristic(kappa, mu)
    c_star = res.solution
    giant = np.where(mu > 0, mu - c_star, 0.0)
    atoms = []
    for cls in classes:
        y = np.zeros_like(mu)
        y[cls] = giant[cls]
        if np.any(y > 0):
            atoms.append(y)
    alpha = MacroMeasure(tuple(atoms))
    lam = lambda_c(c_star, kappa, kmax)
    value = rate_total(lam.measure, alpha, mu, kappa, tail=lam, reducible=len(classes) > 1)
    return Minimizer(lam, alpha, res.regime, c_star, value, len(classes) > 1)


def macro_rate(y, kappa) -> float:
    """``sum_r y_r log(1 - e^{-(kappa y)_r})``; ``-inf`` unless ``y << kappa y``."""
    y = np.asarray(y, dtype=float)
    ky = np.asarray(kappa, dtype=float) @ y
    pos = y > 0
    if np.any(ky[pos] <= 0):
        return -math.inf
    return float(y[pos] @ np.log(-np.expm1(-ky[pos])))


def meso_bound(k, kappa_N, N: int, r: int | None = None) -> float:
    """Upper bound on ``p_N(k)`` for mesoscopic clusters.

    The root ``r`` defaults to the least populated type in ``supp(k)``; with
    the most populated type as root the bound can fail (see tests).
    """
    k = np.asarray(k, dtype=np.int64)
    kappa_N = np.asarray(kappa_N, dtype=float)
    supp = np.flatnonzero(k > 0)
    if supp.size == 0:
        return 0.0
    if r is None:
        r = int(supp[np.argmin(k[supp])])
    if k[r] < 1:
        raise ValueError(f"root type {r} does not occur in {k.tolist()}")
    m = supp.size
    n = int(k.sum())
    kk = kappa_N @ k
    log_b = (m - 1) * math.log(kappa_N.max() * m) if m > 1 else 0.0
    log_b += -(n - 1) * math.log(N) - 2 * math.log(k[r])
    for s in supp:
        if k[s] > 1:
            if kk[s] <= 0:
                return 0.0
            log_b += (k[s] - 1) * math.log(kk[s])
        log_b += math.log(k[s])
    return math.exp(log_b)
