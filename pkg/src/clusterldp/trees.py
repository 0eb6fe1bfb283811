"""Spanning-tree weights of typed vertex sets.

``tau(k)`` is the total weight of all labelled spanning trees on ``|k|``
vertices whose types are given by ``k``, an edge between types ``r`` and
``s`` weighing ``kappa[r, s]``. Three independent routes are provided:
Pruefer enumeration, the weighted matrix-tree theorem and the product
formula over directed trees on the type support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .measures import sub_configs

ENUMERATION_LIMIT = 9
MATRIX_TREE_LIMIT = 200
DIRECTED_LIMIT = 7


class BudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class TreeWeight:
    value: float
    method: str

    def __float__(self):
        return self.value


def _vertex_types(k) -> np.ndarray:
    return np.repeat(np.arange(len(k)), k)


@lru_cache(maxsize=None)
def labelled_trees(n: int) -> np.ndarray:
    """All ``n**(n-2)`` labelled trees on ``n`` vertices as an edge array.

    Shape ``(n**(n-2), n-1, 2)``. Decoding runs on every Pruefer sequence
    at once.
    """
    if n < 1:
        return np.zeros((0, 0, 2), dtype=np.int8)
    if n == 1:
        return np.zeros((1, 0, 2), dtype=np.int8)
    if n == 2:
        return np.array([[[0, 1]]], dtype=np.int8)
    seqs = np.array(list(itertools.product(range(n), repeat=n - 2)), dtype=np.int64)
    count = seqs.shape[0]
    rows = np.arange(count)
    degree = np.ones((count, n), dtype=np.int64)
    np.add.at(degree, (np.repeat(rows, n - 2), seqs.ravel()), 1)
    edges = np.empty((count, n - 1, 2), dtype=np.int8)
    for step in range(n - 2):
        leaf = np.argmax(degree == 1, axis=1)
        parent = seqs[:, step]
        edges[:, step, 0] = leaf
        edges[:, step, 1] = parent
        degree[rows, leaf] -= 1
        degree[rows, parent] -= 1
    # the two vertices left with degree one form the final edge
    remaining = np.argsort(degree != 1, axis=1, kind="stable")[:, :2]
    edges[:, n - 2, :] = remaining
    edges.flags.writeable = False
    return edges


def tau_enumerate(k, kappa) -> TreeWeight:
    """Sum over all labelled spanning trees (Pruefer enumeration)."""
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n > ENUMERATION_LIMIT:
        raise BudgetExceeded(f"|k| = {n} exceeds the enumeration budget {ENUMERATION_LIMIT}")
    if n == 0:
        return TreeWeight(0.0, "enumeration")
    if n == 1:
        return TreeWeight(1.0, "enumeration")
    kappa = np.asarray(kappa, dtype=float)
    x = _vertex_types(k)
    trees = labelled_trees(n)
    w = kappa[x[trees[..., 0]], x[trees[..., 1]]]
    return TreeWeight(float(np.prod(w, axis=1).sum()), "enumeration")


def weighted_laplacian(k, kappa) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    x = _vertex_types(k)
    w = kappa[np.ix_(x, x)].copy()
    np.fill_diagonal(w, 0.0)
    return np.diag(w.sum(axis=1)) - w


def log_tau_matrix_tree(k, kappa) -> float:
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n == 0:
        return -math.inf
    if n == 1:
        return 0.0
    minor = weighted_laplacian(k, kappa)[1:, 1:]
    sign, logdet = np.linalg.slogdet(minor)
    if sign <= 0:
        return -math.inf
    return float(logdet)


def tau_matrix_tree(k, kappa) -> TreeWeight:
    """Weighted matrix-tree theorem: any principal minor of the Laplacian.

    Small instances use a plain determinant; above 30 vertices the value is
    formed from a log-determinant (and may overflow to ``inf`` only if the
    true value does).
    """
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n > MATRIX_TREE_LIMIT:
        raise BudgetExceeded(f"|k| = {n} exceeds the matrix-tree budget {MATRIX_TREE_LIMIT}")
    if n == 0:
        return TreeWeight(0.0, "matrix-tree")
    if n == 1:
        return TreeWeight(1.0, "matrix-tree")
    if n <= 30:
        minor = weighted_laplacian(k, kappa)[1:, 1:]
        det = float(np.linalg.det(minor))
        # Hadamard's bound for the PSD minor; below it, round-off on a singular Laplacian
        if abs(det) <= 1e-12 * float(np.prod(np.diag(minor))):
            det = 0.0
        return TreeWeight(max(det, 0.0), "matrix-tree")
    lt = log_tau_matrix_tree(k, kappa)
    with np.errstate(over="ignore"):
        return TreeWeight(float(np.exp(lt)), "matrix-tree")


@lru_cache(maxsize=None)
def rooted_parent_maps(m: int, root: int) -> np.ndarray:
    """Parent arrays of every tree on ``range(m)`` rooted at ``root``.

    Row ``p`` has ``p[root] == root`` and following parents from any vertex
    reaches the root. There are ``m**(m-2)`` rows (one for ``m == 1``).
    """
    if m == 1:
        return np.zeros((1, 1), dtype=np.int64)
    others = [v for v in range(m) if v != root]
    choices = np.array(list(itertools.product(range(m), repeat=m - 1)), dtype=np.int64)
    parents = np.empty((choices.shape[0], m), dtype=np.int64)
    parents[:, others] = choices
    parents[:, root] = root
    ok = np.all(parents[:, others] != np.array(others), axis=1)
    parents = parents[ok]
    reach = parents.copy()
    rows = np.arange(reach.shape[0])[:, None]
    for _ in range(m):
        reach = parents[rows, reach]
    parents = parents[np.all(reach == root, axis=1)]
    parents.flags.writeable = False
    return parents


def delta_r(k, kappa, r: int) -> float:
    """Directed-tree sum over the type support of ``k``, rooted at ``r``.

    Each edge ``s -> s'`` (pointing away from the root) weighs
    ``kappa[s, s'] * k[s]``.
    """
    k = np.asarray(k, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    supp = [int(s) for s in np.flatnonzero(k > 0)]
    if r not in supp:
        return 0.0
    m = len(supp)
    if m == 1:
        return 1.0
    root = supp.index(r)
    parents = rooted_parent_maps(m, root)
    supp_arr = np.array(supp)
    child = np.array([v for v in range(m) if v != root])
    src = supp_arr[parents[:, child]]
    dst = supp_arr[child]
    w = kappa[src, dst] * k[src]
    return float(np.prod(w, axis=1).sum())


def log_tau_closed_form(k, kappa, r: int | None = None) -> float:
    """Log of the support-level product formula for ``tau(k)``."""
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n == 0:
        return -math.inf
    if n == 1:
        return 0.0
    kappa = np.asarray(kappa, dtype=float)
    karr = np.asarray(k, dtype=float)
    if r is None:
        r = int(np.flatnonzero(karr > 0)[0])
    if k[r] < 1:
        raise ValueError(f"root type {r} does not occur in {k}")
    kk = kappa @ karr
    total = 0.0
    for s in np.flatnonzero(karr > 0):
        if k[s] > 1:
            if kk[s] <= 0:
                return -math.inf
            total += (k[s] - 1) * math.log(kk[s])
    d = delta_r(karr, kappa, r)
    if d <= 0:
        return -math.inf
    return total + math.log(d) - math.log(k[r])


def tau_closed_form(k, kappa, r: int | None = None) -> TreeWeight:
    """``prod_s (kappa k)_s**(k_s-1) * delta_r(k) / k_r``, any ``r`` with ``k_r > 0``."""
    lt = log_tau_closed_form(k, kappa, r)
    if lt == -math.inf:
        return TreeWeight(0.0, "closed-form")
    k = tuple(int(v) for v in k)
    if sum(k) <= 60:
        # direct product keeps exact small-integer results exact
        kappa = np.asarray(kappa, dtype=float)
        karr = np.asarray(k, dtype=float)
        if r is None:
            r = int(np.flatnonzero(karr > 0)[0])
        kk = kappa @ karr
        prod = 1.0
        for s in np.flatnonzero(karr > 0):
            prod *= kk[s] ** (k[s] - 1)
        return TreeWeight(float(prod * delta_r(karr, kappa, r) / k[r]), "closed-form")
    with np.errstate(over="ignore"):
        return TreeWeight(float(np.exp(lt)), "closed-form")


class TauTable:
    """Memoised ``log tau`` for one kernel; safe for concurrent readers."""

    def __init__(self, kappa):
        self.kappa = np.array(kappa, dtype=float)
        self.kappa.flags.writeable = False
        self._cache: dict = {}

    def log_tau(self, k) -> float:
        key = tuple(int(v) for v in k)
        val = self._cache.get(key)
        if val is None:
            val = log_tau_closed_form(key, self.kappa)
            self._cache[key] = val
        return val

    def tau(self, k) -> float:
        lt = self.log_tau(k)
        return 0.0 if lt == -math.inf else math.exp(lt)


def _multinomial_split(k, m) -> float:
    out = 1.0
    for kv, mv in zip(k, m):
        out *= math.comb(kv, mv)
    return out


def check_recursion(k, kappa, tau=None) -> float:
    """Residual of the edge-deletion recursion for ``tau``.

    Compares ``sum_{r,s} kappa(r,s) sum_{m+m'=k} C(k;m) tau(m) m_r tau(m') m'_s``
    with ``2(|k|-1) tau(k)``. ``tau`` defaults to the matrix-tree route.
    """
    k = tuple(int(v) for v in k)
    if tau is None:
        def tau(c):
            return tau_matrix_tree(c, kappa).value
    kappa = np.asarray(kappa, dtype=float)
    lhs = 0.0
    for m in sub_configs(k):
        mt = tuple(a - b for a, b in zip(k, m))
        if sum(m) == 0 or sum(mt) == 0:
            continue
        tm, tmt = tau(m), tau(mt)
        if tm == 0 or tmt == 0:
            continue
        lhs += _multinomial_split(k, m) * tm * tmt * float(np.asarray(m) @ kappa @ np.asarray(mt))
    rhs = 2 * (sum(k) - 1) * tau(k)
    return abs(lhs - rhs)


def directed_tree_sum(k, kappa, r: int) -> float:
    """Brute-force sum over labelled trees directed away from a type-``r`` root.

    Enumerates parent maps directly rather than orienting undirected trees.
    """
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n > DIRECTED_LIMIT:
        raise BudgetExceeded(f"|k| = {n} exceeds the directed-tree budget {DIRECTED_LIMIT}")
    if n == 0 or k[r] == 0:
        return 0.0
    kappa = np.asarray(kappa, dtype=float)
    x = _vertex_types(k)
    total = 0.0
    for root in np.flatnonzero(x == r):
        parents = rooted_parent_maps(n, int(root))
        child = np.array([v for v in range(n) if v != root], dtype=np.int64)
        if child.size == 0:
            total += 1.0
            continue
        w = kappa[x[parents[:, child]], x[child]]
        total += float(np.prod(w, axis=1).sum())
    return total


def check_directed_identity(k, kappa, r: int) -> float:
    """Relative residual of ``tau(k) k_r`` against the directed-tree sum."""
    k = tuple(int(v) for v in k)
    lhs = tau_matrix_tree(k, kappa).value * k[r]
    rhs = directed_tree_sum(k, kappa, r)
    return abs(lhs - rhs) / max(1.0, abs(rhs))
