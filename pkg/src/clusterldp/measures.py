"""Finite-type measures, kernels and cluster-configuration measures.

Measures and kernels are plain numpy arrays; the small wrapper types below
only add validation and the sparse maps needed for cluster statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

AMBIGUOUS_MASS = 1e-15

Config = tuple  # tuple[int, ...], one count per type


class ModelError(ValueError):
    """Raised for malformed measures, kernels or model files."""


def as_measure(values, ntypes: int | None = None, name: str = "measure") -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ModelError(f"{name} must be a vector, got shape {arr.shape}")
    if ntypes is not None and arr.shape[0] != ntypes:
        raise ModelError(f"{name} has {arr.shape[0]} entries, expected {ntypes}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ModelError(f"{name} must be finite and nonnegative")
    return arr


def as_kernel(entries, ntypes: int | None = None, name: str = "kernel") -> np.ndarray:
    arr = np.atleast_2d(np.asarray(entries, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ModelError(f"{name} must be a square matrix, got shape {arr.shape}")
    if ntypes is not None and arr.shape[0] != ntypes:
        raise ModelError(f"{name} is {arr.shape[0]}x{arr.shape[0]}, expected {ntypes}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ModelError(f"{name} must be finite and nonnegative")
    if not np.array_equal(arr, arr.T):
        raise ModelError(f"{name} must be symmetric")
    return arr


def check_support_mass(mu: np.ndarray, name: str = "mu") -> None:
    """Reject positive entries so small that support membership is ambiguous."""
    bad = (mu > 0) & (mu < AMBIGUOUS_MASS)
    if np.any(bad):
        raise ModelError(
            f"{name} entries {np.flatnonzero(bad).tolist()} are below {AMBIGUOUS_MASS:g}; "
            "use exact zeros for types outside the support"
        )


def xlogy(x, y):
    """``x * log(y)`` with ``0 * log(anything) = 0`` and ``log 0 = -inf``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 0, 0.0, x * np.log(np.where(x == 0, 1.0, y)))
    return out


def entropy_terms(x, y) -> np.ndarray:
    """Entrywise ``x log(x/y)`` under the conventions above.

    Entries with ``x > 0`` and ``y == 0`` give ``+inf``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    pos = x > 0
    with np.errstate(divide="ignore"):
        out[pos] = x[pos] * (np.log(x[pos]) - np.log(np.broadcast_to(y, out.shape)[pos]))
    return out


def kappa_apply(kappa, nu) -> np.ndarray:
    """The kernel integrated against a measure, ``(kappa nu)_r = sum_s kappa(r,s) nu_s``."""
    kappa = np.asarray(kappa, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if kappa.shape[-1] != nu.shape[0]:
        raise ModelError(f"dimension mismatch: kernel {kappa.shape} vs measure {nu.shape}")
    return kappa @ nu


def relative_entropy(nu, nu_ref) -> float:
    """Relative entropy of two possibly unnormalised measures.

    ``|nu_ref| - |nu| + sum nu log(nu/nu_ref)``; ``+inf`` if ``nu`` charges a
    type that ``nu_ref`` does not.
    """
    nu = np.asarray(nu, dtype=float)
    nu_ref = np.asarray(nu_ref, dtype=float)
    terms = entropy_terms(nu, nu_ref)
    if np.any(np.isinf(terms)):
        return float("inf")
    return float(nu_ref.sum() - nu.sum() + terms.sum())


def support(values, tol: float = 0.0) -> np.ndarray:
    return np.flatnonzero(np.asarray(values) > tol)


@dataclass(frozen=True)
class TypeSpace:
    labels: tuple

    def __post_init__(self):
        if len(self.labels) < 1:
            raise ModelError("type space needs at least one type")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError(f"type labels must be unique: {list(self.labels)}")

    def __len__(self):
        return len(self.labels)

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)) and label not in self.labels:
            return int(label)
        return self.labels.index(label)


def config_size(k: Sequence[int]) -> int:
    return int(sum(k))


def unit_config(r: int, ntypes: int) -> Config:
    return tuple(1 if s == r else 0 for s in range(ntypes))


def configs_up_to(ntypes: int, kmax: int, active: Iterable[int] | None = None,
                  include_zero: bool = False):
    """All type configurations with ``1 <= |k| <= kmax`` (ordered by size).

    If ``active`` is given, counts on the other types are held at zero.
    """
    active = list(range(ntypes)) if active is None else sorted(active)
    out = []
    if include_zero:
        out.append(tuple([0] * ntypes))
    for n in range(1, kmax + 1):
        out.extend(configs_of_size(ntypes, n, active))
    return out


def configs_of_size(ntypes: int, n: int, active: Sequence[int] | None = None):
    active = list(range(ntypes)) if active is None else list(active)
    if not active:
        return []
    res = []

    def rec(i, remaining, cur):
        if i == len(active) - 1:
            cur[active[i]] = remaining
            res.append(tuple(cur))
            cur[active[i]] = 0
            return
        for v in range(remaining, -1, -1):
            cur[active[i]] = v
            rec(i + 1, remaining - v, cur)
        cur[active[i]] = 0

    rec(0, n, [0] * ntypes)
    return res


def sub_configs(k: Sequence[int]):
    """Every ``m`` with ``0 <= m <= k`` entrywise."""
    ranges = [range(v + 1) for v in k]
    grids = np.meshgrid(*ranges, indexing="ij")
    flat = np.stack([g.ravel() for g in grids], axis=1)
    return [tuple(int(x) for x in row) for row in flat]


@dataclass(frozen=True)
class MicroMeasure:
    """Finitely supported measure on cluster type configurations."""

    atoms: Mapping = field(default_factory=dict)
    ntypes: int = 1

    def __post_init__(self):
        clean = {}
        for k, w in dict(self.atoms).items():
            k = tuple(int(v) for v in k)
            if len(k) != self.ntypes:
                raise ModelError(f"configuration {k} does not have {self.ntypes} entries")
            if any(v < 0 for v in k):
                raise ModelError(f"configuration {k} has negative counts")
            if w < 0 or not np.isfinite(w):
                raise ModelError(f"weight {w} at {k} must be finite and nonnegative")
            if sum(k) == 0:
                if w > 0:
                    raise ModelError("the empty configuration carries no weight")
                continue
            if w > 0:
                clean[k] = clean.get(k, 0.0) + float(w)
        object.__setattr__(self, "atoms", clean)

    def __len__(self):
        return len(self.atoms)

    def __add__(self, other: "MicroMeasure") -> "MicroMeasure":
        merged = dict(self.atoms)
        for k, w in other.atoms.items():
            merged[k] = merged.get(k, 0.0) + w
        return MicroMeasure(merged, self.ntypes)

    def weight(self, k) -> float:
        return self.atoms.get(tuple(k), 0.0)

    def total_mass(self) -> float:
        return float(sum(self.atoms.values()))

    def restrict(self, max_size: int) -> "MicroMeasure":
        return MicroMeasure({k: w for k, w in self.atoms.items() if sum(k) <= max_size},
                            self.ntypes)


@dataclass(frozen=True)
class MacroMeasure:
    """Finite collection of nonzero macroscopic cluster profiles."""

    atoms: tuple = ()

    def __post_init__(self):
        ys = tuple(np.asarray(y, dtype=float) for y in self.atoms)
        for y in ys:
            if np.any(y < 0) or not np.all(np.isfinite(y)):
                raise ModelError("macroscopic atoms must be finite and nonnegative")
            if not np.any(y > 0):
                raise ModelError("macroscopic atoms must be nonzero")
        object.__setattr__(self, "atoms", ys)

    def __len__(self):
        return len(self.atoms)


def integrated_config(measure, ntypes: int | None = None) -> np.ndarray:
    """Total per-type vertex mass carried by a micro or macro measure."""
    if isinstance(measure, MacroMeasure):
        if not measure.atoms:
            if ntypes is None:
                raise ModelError("empty macroscopic measure needs ntypes")
            return np.zeros(ntypes)
        return np.sum(measure.atoms, axis=0)
    if isinstance(measure, MicroMeasure):
        c = np.zeros(measure.ntypes)
        for k, w in measure.atoms.items():
            c += w * np.asarray(k, dtype=float)
        return c
    raise TypeError(f"cannot integrate {type(measure).__name__}")


def irreducible_classes(kappa, mu) -> list:
    """Partition ``supp(mu)`` into classes linked by positive kernel entries.

    Returns a list of sorted index lists, ordered by their smallest type.
    """
    kappa = np.asarray(kappa, dtype=float)
    supp = [int(r) for r in support(mu)]
    seen = set()
    classes = []
    for r in supp:
        if r in seen:
            continue
        block = {r}
        stack = [r]
        while stack:
            a = stack.pop()
            for b in supp:
                if b not in block and kappa[a, b] > 0:
                    block.add(b)
                    stack.append(b)
        seen |= block
        classes.append(sorted(block))
    return classes


def connectable(alpha: MacroMeasure, classes) -> bool:
    """True iff every macroscopic atom lives inside one irreducible class."""
    class_sets = [set(c) for c in classes]
    for y in alpha.atoms:
        supp = set(int(r) for r in support(y))
        if not any(supp <= c for c in class_sets):
            return False
    return True
