"""Sampling G(N, x, kappa_N / N), cluster statistics and exact small-N oracles."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .measures import MacroMeasure, MicroMeasure, ModelError, integrated_config, sub_configs
from .trees import tau_matrix_tree

EXACT_LIMIT = 10
BRUTE_FORCE_LIMIT = 5
BRUTE_DIST_LIMIT = 6
DENSE_LIMIT = 20_000
MC_CHUNK = 4096


def replica_rng(seed: int, i: int) -> np.random.Generator:
    """Independent stream for replica ``i``; depends only on ``(seed, i)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


def map_replicas(fn, seed: int, replicas: int, threads: int | None = 1):
    """``[fn(i, rng_i) for i in range(replicas)]``, optionally on a thread pool.

    Output order and content do not depend on ``threads``.
    """
    if threads is None or threads <= 1 or replicas <= 1:
        return [fn(i, replica_rng(seed, i)) for i in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(i, replica_rng(seed, i)), range(replicas)))


@dataclass(frozen=True)
class GraphSample:
    N: int
    types: np.ndarray
    edges: np.ndarray  # (E, 2), i < j

    @property
    def ntypes(self) -> int:
        return int(self.types.max()) + 1 if self.types.size else 0


def edge_probabilities(kappa_N, N: int) -> np.ndarray:
    return np.minimum(1.0, np.asarray(kappa_N, dtype=float) / N)


def _bernoulli_positions(rng, length: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(length)`` kept independently with probability ``p``."""
    if length <= 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(length, dtype=np.int64)
    if p > 0.25 or length <= 64:
        return np.flatnonzero(rng.random(length) < p).astype(np.int64)
    out = []
    pos = -1
    mean = length * p
    while True:
        batch = int(mean + 6 * math.sqrt(mean) + 16)
        gaps = rng.geometric(p, size=batch)
        steps = pos + np.cumsum(gaps)
        inside = steps[steps < length]
        out.append(inside)
        if inside.size < steps.size:
            break
        pos = int(steps[-1])
        mean = (length - pos) * p
    return np.concatenate(out)


def _triangle_pairs(t: np.ndarray):
    """Linear index over pairs ``j < i`` (row-major in ``i``) to ``(i, j)``."""
    i = ((1 + np.sqrt(1 + 8 * t.astype(float))) / 2).astype(np.int64)
    # float rounding can be off by one either way
    i -= (i * (i - 1) // 2 > t)
    i += ((i + 1) * i // 2 <= t)
    j = t - i * (i - 1) // 2
    return i, j


def _check_graph_args(N, type_counts, kappa_N):
    if N < 1:
        raise ModelError("N must be at least 1")
    counts = np.asarray(type_counts, dtype=np.int64)
    if counts.sum() != N or np.any(counts < 0):
        raise ModelError(f"type counts {counts.tolist()} must be nonnegative and sum to N={N}")
    kappa_N = np.asarray(kappa_N, dtype=float)
    if kappa_N.shape != (counts.size, counts.size):
        raise ModelError(f"kernel shape {kappa_N.shape} does not match {counts.size} types")
    return counts, kappa_N


def sample_graph(N: int, type_counts, kappa_N, seed=None, rng=None, method: str = "skip") -> GraphSample:
    """One draw of the inhomogeneous random graph.

    Vertices are grouped by type (the first ``type_counts[0]`` vertices have
    type 0, and so on). ``method="skip"`` samples each type block by
    geometric jumps in O(N + E); ``method="dense"`` flips all N(N-1)/2 coins.
    """
    counts, kappa_N = _check_graph_args(N, type_counts, kappa_N)
    if rng is None:
        rng = np.random.default_rng(seed)
    types = np.repeat(np.arange(counts.size), counts)
    p = edge_probabilities(kappa_N, N)
    if method == "dense":
        if N > DENSE_LIMIT:
            raise ModelError(f"dense sampler is limited to N <= {DENSE_LIMIT}")
        i, j = np.triu_indices(N, 1)
        keep = rng.random(i.size) < p[types[i], types[j]]
        edges = np.stack([i[keep], j[keep]], axis=1)
        return GraphSample(N, types, edges.astype(np.int64))
    if method != "skip":
        raise ValueError(f"unknown sampling method {method!r}")
    offsets = np.concatenate([[0], np.cumsum(counts)])
    parts = []
    for r in range(counts.size):
        for s in range(r, counts.size):
            nr, ns = int(counts[r]), int(counts[s])
            if r == s:
                pos = _bernoulli_positions(rng, nr * (nr - 1) // 2, p[r, r])
                a, b = _triangle_pairs(pos)
                parts.append(np.stack([b + offsets[r], a + offsets[r]], axis=1))
            else:
                pos = _bernoulli_positions(rng, nr * ns, p[r, s])
                parts.append(np.stack([pos // ns + offsets[r], pos % ns + offsets[s]], axis=1))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return GraphSample(N, types, edges.astype(np.int64))


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        root = a
        parent = self.parent
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def labels(self) -> np.ndarray:
        roots = np.array([self.find(a) for a in range(len(self.parent))], dtype=np.int64)
        _, lab = np.unique(roots, return_inverse=True)
        return lab


def component_labels(g: GraphSample) -> np.ndarray:
    uf = UnionFind(g.N)
    for a, b in g.edges.tolist():
        uf.union(a, b)
    return uf.labels()


@dataclass(frozen=True)
class ComponentStats:
    N: int
    labels: np.ndarray
    configs: np.ndarray  # one row per component
    micro: MicroMeasure
    macro: MacroMeasure
    epsilon: float

    @property
    def components(self) -> list:
        order = np.argsort(self.labels, kind="stable")
        cuts = np.cumsum(np.bincount(self.labels))[:-1]
        return np.split(order, cuts)

    def largest(self) -> np.ndarray:
        """Per-type vertex counts of the largest component (ties: lowest label)."""
        sizes = self.configs.sum(axis=1)
        return self.configs[int(np.argmax(sizes))]

    def micro_window(self, kmax: int) -> dict:
        return {k: w for k, w in self.micro.atoms.items() if sum(k) <= kmax}

    def meso_residual(self, R: int) -> np.ndarray:
        """``mu_N - c(Mi_N restricted to |k| <= R) - c(Ma_N)``."""
        mu_n = self.configs.sum(axis=0) / self.N
        small = MicroMeasure(self.micro_window(R), self.configs.shape[1])
        return mu_n - integrated_config(small) - integrated_config(self.macro, self.configs.shape[1])


def component_stats(g: GraphSample, epsilon: float = 0.05, ntypes: int | None = None,
                    labels: np.ndarray | None = None) -> ComponentStats:
    """Microscopic and macroscopic empirical measures of a sampled graph.

    ``Mi_N`` charges every component; ``Ma_N`` lists ``k / N`` for the
    components with more than ``epsilon * N`` vertices.
    """
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    ntypes = ntypes or g.ntypes
    if labels is None:
        labels = component_labels(g)
    ncomp = int(labels.max()) + 1 if labels.size else 0
    configs = np.zeros((ncomp, ntypes), dtype=np.int64)
    np.add.at(configs, (labels, g.types), 1)
    uniq, mult = np.unique(configs, axis=0, return_counts=True)
    micro = MicroMeasure({tuple(int(v) for v in k): m / g.N for k, m in zip(uniq, mult)}, ntypes)
    big = configs[configs.sum(axis=1) > epsilon * g.N]
    macro = MacroMeasure(tuple(row / g.N for row in big))
    return ComponentStats(g.N, labels, configs, micro, macro, epsilon)


def _vertex_probs(k, kappa_N, N):
    x = np.repeat(np.arange(len(k)), k)
    return edge_probabilities(kappa_N, N)[np.ix_(x, x)]


def _check_exact(k, kappa_N, limit):
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n > limit:
        raise ModelError(f"|k| = {n} exceeds the exact budget {limit}")
    if len(k) != np.asarray(kappa_N).shape[0]:
        raise ModelError(f"configuration {k} does not match kernel shape {np.asarray(kappa_N).shape}")
    return k, n


@lru_cache(maxsize=4096)
def _connection_exact_cached(k: tuple, kappa_key: bytes, S: int, N: int) -> float:
    kappa_N = np.frombuffer(kappa_key).reshape(S, S)
    n = sum(k)
    p = _vertex_probs(k, kappa_N, N)
    with np.errstate(divide="ignore"):
        logq = np.log1p(-p)
    np.fill_diagonal(logq, 0.0)
    full = 1 << n
    # W[i, U] = sum_{j in U} log(1 - p_ij)
    W = np.zeros((n, full))
    for j in range(n):
        bit = 1 << j
        W[:, bit:2 * bit] = W[:, :bit] + logq[:, j:j + 1]
        for start in range(2 * bit, full, 2 * bit):
            W[:, start:start + 2 * bit] = W[:, :2 * bit]
    conn = np.zeros(full)
    for S_mask in range(1, full):
        low = S_mask & -S_mask
        if S_mask == low:
            conn[S_mask] = 1.0
            continue
        rest = S_mask ^ low
        total = 0.0
        # proper subsets T of S containing the lowest vertex
        sub = (rest - 1) & rest
        while True:
            T = sub | low
            if T != S_mask:
                U = S_mask ^ T
                cut = 0.0
                t = T
                while t:
                    b = t & -t
                    cut += W[b.bit_length() - 1, U]
                    t ^= b
                total += conn[T] * math.exp(cut)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        conn[S_mask] = 1.0 - total
    return float(min(max(conn[full - 1], 0.0), 1.0))


def connection_probability_exact(k, kappa_N, N: int) -> float:
    """``p_N(k)``: probability that ``G(|k|, x, kappa_N/N)`` is connected.

    Subset recursion ``P(V) = 1 - sum_{v in T < V} P(T) P(no T-(V\\T) edge)``.
    """
    k, n = _check_exact(k, kappa_N, EXACT_LIMIT)
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0
    kappa_N = np.ascontiguousarray(kappa_N, dtype=float)
    return _connection_exact_cached(k, kappa_N.tobytes(), kappa_N.shape[0], int(N))


def connection_probability_bruteforce(k, kappa_N, N: int) -> float:
    """Sum of the probabilities of all connected edge subsets."""
    k, n = _check_exact(k, kappa_N, BRUTE_FORCE_LIMIT)
    if n == 0:
        return 0.0
    if n == 1:
        return 1.0
    p = _vertex_probs(k, kappa_N, N)
    pairs = list(itertools.combinations(range(n), 2))
    pp = np.array([p[i, j] for i, j in pairs])
    total = 0.0
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        bits = np.array(bits, dtype=bool)
        prob = float(np.prod(np.where(bits, pp, 1 - pp)))
        if prob == 0:
            continue
        uf = UnionFind(n)
        for (i, j), on in zip(pairs, bits):
            if on:
                uf.union(i, j)
        if len({uf.find(v) for v in range(n)}) == 1:
            total += prob
    return total


def _connected_batch(rng, n: int, pairs_i, pairs_j, pvec, batch: int) -> np.ndarray:
    """Connectivity indicator for ``batch`` independent graphs on ``n`` vertices."""
    npairs = pvec.size
    pmax = float(pvec.max()) if npairs else 0.0
    pos = _bernoulli_positions(rng, batch * npairs, pmax)
    pair = pos % npairs
    if pmax > 0 and np.any(pvec < pmax):
        pos = pos[rng.random(pos.size) * pmax < pvec[pair]]
        pair = pos % npairs
    graph = pos // npairs
    a = graph * n + pairs_i[pair]
    b = graph * n + pairs_j[pair]
    total = batch * n
    adj = coo_matrix((np.ones(a.size, dtype=np.int8), (a, b)), shape=(total, total)).tocsr()
    _, lab = connected_components(adj, directed=False)
    lab = lab.reshape(batch, n)
    return np.all(lab == lab[:, :1], axis=1)


def connection_probability_mc(k, kappa_N, N: int, samples: int, seed: int,
                              threads: int | None = 1, chunk: int = MC_CHUNK):
    """Monte-Carlo estimate of ``p_N(k)`` and its binomial standard error.

    Graphs are simulated in chunks; chunk ``i`` uses stream ``(seed, i)`` so
    the estimate does not depend on ``threads``.
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n <= 1:
        return (float(n == 1), 0.0)
    p = _vertex_probs(k, kappa_N, N)
    pi, pj = np.triu_indices(n, 1)
    pvec = p[pi, pj]
    nchunks = -(-samples // chunk)

    def run(i, rng):
        size = min(chunk, samples - i * chunk)
        return int(_connected_batch(rng, n, pi, pj, pvec, size).sum())

    hits = sum(map_replicas(run, seed, nchunks, threads))
    est = hits / samples
    se = math.sqrt(max(est * (1 - est), 0.0) / samples)
    return est, se


def connection_bounds(k, kappa_N, N: int):
    """Lower and upper bounds on ``p_N(k)`` in terms of ``tau(k; kappa_N)``."""
    k = tuple(int(v) for v in k)
    n = sum(k)
    if n == 0:
        return 0.0, 0.0
    kappa_N = np.asarray(kappa_N, dtype=float)
    upper = N ** (1 - n) * tau_matrix_tree(k, kappa_N).value
    norm = float(kappa_N.max())
    lower = upper * max(1 - norm / N, 0.0) ** (n * n / 2)
    return lower, upper


def check_gilbert_identity(m, kappa_N, N: int, r: int) -> float:
    """Residual of the marked-vertex component expansion, ``|sum_h ... - 1|``."""
    m = tuple(int(v) for v in m)
    if m[r] < 1:
        raise ValueError("the marked type must occur in m")
    q = 1 - edge_probabilities(kappa_N, N)
    total = 0.0
    for h in sub_configs(m):
        if h[r] < 1:
            continue
        coef = 1.0
        for s, (ms, hs) in enumerate(zip(m, h)):
            d = 1 if s == r else 0
            coef *= math.comb(ms - d, hs - d)
        rest = np.subtract(m, h)
        iso = float(np.prod(q ** np.outer(h, rest)))
        total += coef * connection_probability_exact(h, kappa_N, N) * iso
    return abs(total - 1.0)


def monotone_comparison(h, h_small, kappa_N, N: int):
    """Both sides of ``p_N(h') <= p_N(h) prod_r (1 - e^{-(kappa_N h')_r / N})^{-(h_r - h'_r)}``."""
    h = np.asarray(h, dtype=np.int64)
    hs = np.asarray(h_small, dtype=np.int64)
    if np.any(hs > h):
        raise ValueError("h' must be dominated by h")
    kh = np.asarray(kappa_N, dtype=float) @ hs / N
    with np.errstate(divide="ignore"):
        factor = float(np.prod(np.where(h - hs > 0, (-np.expm1(-kh)) ** (-(h - hs).astype(float)), 1.0)))
    return (connection_probability_exact(tuple(hs), kappa_N, N),
            connection_probability_exact(tuple(h), kappa_N, N) * factor)


def _multiset_partitions(total: tuple, configs: list, start: int = 0):
    """All multisets of nonzero configs (from ``configs[start:]``) summing to ``total``."""
    if not any(total):
        yield []
        return
    for idx in range(start, len(configs)):
        k = configs[idx]
        if all(a <= b for a, b in zip(k, total)):
            rest = tuple(b - a for a, b in zip(k, total))
            for tail in _multiset_partitions(rest, configs, idx):
                yield [k] + tail


def profile_key(profile: dict) -> str:
    """Canonical string of a cluster profile ``{k: count}``."""
    parts = [f"{'.'.join(str(v) for v in k)}x{c}" for k, c in sorted(profile.items(), reverse=True)]
    return ";".join(parts)


def exact_micro_distribution(N: int, type_counts, kappa_N) -> dict:
    """Law of ``N Mi_N`` as ``{profile: probability}``.

    A profile is a tuple of ``(k, count)`` pairs sorted by ``k`` descending.
    """
    counts, kappa_N = _check_graph_args(N, type_counts, kappa_N)
    if np.any(kappa_N > N):
        raise ModelError("kappa_N entries must not exceed N")
    if N > EXACT_LIMIT:
        raise ModelError(f"N = {N} exceeds the exact budget {EXACT_LIMIT}")
    total = tuple(int(v) for v in counts)
    configs = [k for k in sub_configs(total) if sum(k)]
    configs.sort(key=lambda k: (sum(k), k), reverse=True)
    q = 1 - kappa_N / N
    log_pref = sum(math.lgamma(c + 1) for c in total)
    out = {}
    for part in _multiset_partitions(total, configs):
        prof = {}
        for k in part:
            prof[k] = prof.get(k, 0) + 1
        logp = log_pref
        prob_zero = False
        for k, l in prof.items():
            pk = connection_probability_exact(k, kappa_N, N)
            karr = np.asarray(k)
            iso = float(np.prod(q ** (0.5 * np.outer(karr, counts - karr))))
            if pk == 0 or iso == 0:
                prob_zero = True
                break
            logp += l * (math.log(pk) + math.log(iso)) - math.lgamma(l + 1)
            logp -= l * sum(math.lgamma(v + 1) for v in k)
        if not prob_zero:
            out[tuple(sorted(prof.items(), reverse=True))] = math.exp(logp)
    return out


def exact_micro_distribution_bruteforce(N: int, type_counts, kappa_N) -> dict:
    """Same law by enumerating every graph on ``N`` labelled vertices."""
    counts, kappa_N = _check_graph_args(N, type_counts, kappa_N)
    if N > BRUTE_DIST_LIMIT:
        raise ModelError(f"N = {N} exceeds the brute-force budget {BRUTE_DIST_LIMIT}")
    types = np.repeat(np.arange(counts.size), counts)
    p = edge_probabilities(kappa_N, N)
    pairs = list(itertools.combinations(range(N), 2))
    pp = np.array([p[types[i], types[j]] for i, j in pairs])
    out = {}
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        bits = np.array(bits, dtype=bool)
        prob = float(np.prod(np.where(bits, pp, 1 - pp)))
        if prob == 0:
            continue
        uf = UnionFind(N)
        for (i, j), on in zip(pairs, bits):
            if on:
                uf.union(i, j)
        lab = uf.labels()
        configs = np.zeros((lab.max() + 1, counts.size), dtype=np.int64)
        np.add.at(configs, (lab, types), 1)
        prof = {}
        for row in configs:
            key = tuple(int(v) for v in row)
            prof[key] = prof.get(key, 0) + 1
        key = tuple(sorted(prof.items(), reverse=True))
        out[key] = out.get(key, 0.0) + prob
    return out


def total_variation(d1: dict, d2: dict) -> float:
    keys = set(d1) | set(d2)
    return 0.5 * sum(abs(d1.get(k, 0.0) - d2.get(k, 0.0)) for k in keys)


def type_counts_for(mu, N: int) -> np.ndarray:
    """Integer type counts summing to ``N`` that track ``N mu`` (largest remainder)."""
    mu = np.asarray(mu, dtype=float)
    raw = N * mu / mu.sum()
    counts = np.floor(raw).astype(np.int64)
    short = N - int(counts.sum())
    if short:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts
