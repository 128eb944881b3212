"""Coalescing and branching symmetric exclusion (CBSEP) and its generalised version.

Each vertex carries a local state in a finite space S split into particle
states S_1 and empty states S_0.  Every edge holding at least one particle
is resampled at rate one from the product law conditioned on the edge
holding a particle.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numba
import numpy as np

from .errors import GeometryError, SiteCapError
from .lattice import as_generator, replica_seeds
from .spectral import FiniteChainSpec, relaxation_time
from .stats import integrated_time

STATE_CAP = 2**17


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple  # tuple of (u, v) with u < v, no duplicates

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        es = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
        for u, v in es:
            if not (0 <= u < n and 0 <= v < n):
                raise GeometryError(f"edge {(u, v)} outside {n} vertices")
        return cls(n, tuple(es))

    @classmethod
    def torus(cls, L: int, d: int = 2) -> "Graph":
        """Discrete torus Z_L^d (L^d vertices, row-major); parallel edges merged."""
        shape = (L,) * d
        edges = []
        for idx in itertools.product(range(L), repeat=d):
            u = int(np.ravel_multi_index(idx, shape))
            for a in range(d):
                nb = list(idx)
                nb[a] = (nb[a] + 1) % L
                edges.append((u, int(np.ravel_multi_index(nb, shape))))
        return cls.from_edges(L**d, edges)

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def is_connected(self) -> bool:
        if self.n_vertices <= 1:
            return True
        parent = list(range(self.n_vertices))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in self.edges:
            parent[find(u)] = find(v)
        return len({find(a) for a in range(self.n_vertices)}) == 1

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style (offsets, targets)."""
        nbrs = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        off = np.zeros(self.n_vertices + 1, dtype=np.int64)
        off[1:] = np.cumsum([len(b) for b in nbrs])
        tgt = np.array([w for b in nbrs for w in b], dtype=np.int64)
        return off, tgt


@dataclass(frozen=True)
class GCBSEPParams:
    graph: Graph
    weights: tuple  # pi on S = {0, ..., |S|-1}; floats or Fractions
    particle: tuple  # booleans: S_1 membership

    def __post_init__(self):
        if len(self.weights) != len(self.particle):
            raise ValueError("weights and particle mask differ in length")
        if not any(self.particle) or self.p == 0:
            raise ValueError("pi(S_1) must be positive")
        if not self.graph.is_connected():
            raise GeometryError("graph must be connected")

    @classmethod
    def binary(cls, graph: Graph, p) -> "GCBSEPParams":
        """Plain CBSEP: S = {0, 1}, S_1 = {1}, Bernoulli(p)."""
        return cls(graph, (1 - p, p), (False, True))

    @property
    def exact(self) -> bool:
        return any(isinstance(w, Fraction) for w in self.weights)

    @property
    def pi(self) -> np.ndarray:
        w = np.array(self.weights, dtype=object if self.exact else float)
        return w / sum(w) if self.exact else w / w.sum()

    @property
    def p(self):
        """pi(S_1)."""
        pi = self.pi
        return sum(pi[k] for k, b in enumerate(self.particle) if b)

    @property
    def n_local(self) -> int:
        return len(self.weights)


def _edge_law(params: GCBSEPParams):
    """Pairs (a, b) with a or b a particle, and their conditional probabilities."""
    pi = params.pi
    part = params.particle
    pairs = [(a, b) for a in range(params.n_local) for b in range(params.n_local) if part[a] or part[b]]
    probs = [pi[a] * pi[b] for a, b in pairs]
    Z = sum(probs)
    return pairs, [w / Z for w in probs]


def _digits(N: int, base: int, n: int) -> np.ndarray:
    idx = np.arange(N, dtype=np.int64)
    return (idx[:, None] // base ** np.arange(n, dtype=np.int64)) % base


def gcbsep_build(params: GCBSEPParams, cap: int = STATE_CAP) -> FiniteChainSpec:
    """Exact generator on configurations with at least one particle.

    States are tuples of local states (vertex order), ordered by the base-|S|
    index with vertex 0 least significant.
    """
    s, n = params.n_local, params.graph.n_vertices
    N = s**n
    if N > cap:
        raise SiteCapError(f"|S|^|V| = {N} exceeds the cap {cap}")
    dig = _digits(N, s, n)
    part = np.array(params.particle, dtype=bool)
    alive = part[dig].any(axis=1)
    new = -np.ones(N, dtype=np.int64)
    new[alive] = np.arange(alive.sum())
    pi = params.pi
    exact = params.exact
    if exact:
        mu_all = np.array([math.prod((pi[d] for d in row), start=Fraction(1)) for row in dig], dtype=object)
    else:
        mu_all = np.prod(pi[dig], axis=1)
    pairs, probs = _edge_law(params)
    pw = s ** np.arange(n, dtype=np.int64)
    rows, cols, vals = [], [], []
    base_idx = np.arange(N, dtype=np.int64)
    for u, v in params.graph.edges:
        on = alive & (part[dig[:, u]] | part[dig[:, v]])
        src = base_idx[on]
        stripped = src - dig[on, u] * pw[u] - dig[on, v] * pw[v]
        for (a, b), pr in zip(pairs, probs):
            tgt = stripped + a * pw[u] + b * pw[v]
            keep = tgt != src
            rows.append(new[src[keep]])
            cols.append(new[tgt[keep]])
            vals.append(np.full(int(keep.sum()), pr, dtype=object if exact else float))
    rows = np.concatenate(rows) if rows else np.zeros(0, np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    # merge duplicate (i, j) entries
    key = rows * alive.sum() + cols
    order = np.argsort(key, kind="stable")
    key, rows, cols, vals = key[order], rows[order], cols[order], vals[order]
    uniq, start = np.unique(key, return_index=True)
    summed = np.add.reduceat(vals, start) if len(vals) else vals
    mu = mu_all[alive]
    mu = mu / sum(mu) if exact else mu / mu.sum()
    states = [tuple(int(x) for x in row) for row in dig[alive]]
    return FiniteChainSpec(states, mu, rows[start], cols[start], summed, {"model": "g-CBSEP"})


def particle_projection(params: GCBSEPParams):
    part = params.particle
    return lambda state: tuple(int(part[x]) for x in state)


# --------------------------------------------------------------------------
# Simulation
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _simulate(edges, part, cum, pa, pb, state, t_max, dt, seed):
    """Global clock of rate |E|; returns particle-count samples every dt and event stats."""
    np.random.seed(seed)
    E = edges.shape[0]
    count = 0
    for x in range(state.shape[0]):
        count += part[state[x]]
    m = int(t_max / dt) + 1
    series = np.empty(m, np.int64)
    t = 0.0
    nxt = 0.0
    s = 0
    events = 0
    min_count = count
    max_drop = 0
    while True:
        step = np.random.exponential(1.0 / E)
        while s < m and t + step >= nxt:
            series[s] = count
            s += 1
            nxt += dt
        t += step
        if t > t_max:
            break
        e = np.random.randint(E)
        u = edges[e, 0]
        v = edges[e, 1]
        if part[state[u]] == 0 and part[state[v]] == 0:
            continue
        r = np.random.random()
        k = np.searchsorted(cum, r, side="right")
        if k >= cum.shape[0]:
            k = cum.shape[0] - 1
        before = count
        count -= part[state[u]] + part[state[v]]
        state[u] = pa[k]
        state[v] = pb[k]
        count += part[state[u]] + part[state[v]]
        events += 1
        if before - count > max_drop:
            max_drop = before - count
        if count < min_count:
            min_count = count
    return series[:s], events, min_count, max_drop


@dataclass(frozen=True)
class GCBSEPTrajectory:
    final: np.ndarray
    counts: np.ndarray  # particle count sampled every dt
    dt: float
    events: int
    min_count: int
    max_drop: int

    @property
    def mean_count(self) -> float:
        return float(self.counts.mean())


def _kernel_inputs(params: GCBSEPParams):
    pairs, probs = _edge_law(params)
    cum = np.cumsum(np.array([float(p) for p in probs]))
    pa = np.array([a for a, _ in pairs], dtype=np.int64)
    pb = np.array([b for _, b in pairs], dtype=np.int64)
    part = np.array(params.particle, dtype=np.int64)
    return params.graph.edge_array, part, cum, pa, pb


def gcbsep_simulate(params: GCBSEPParams, init: Sequence[int], t_max: float, rng, dt: float = 1.0) -> GCBSEPTrajectory:
    """Event-driven run from ``init`` (local state per vertex)."""
    init = np.array(init, dtype=np.int64)
    if len(init) != params.graph.n_vertices:
        raise ValueError("one local state per vertex")
    if not any(params.particle[s] for s in init):
        raise ValueError("initial configuration has no particle")
    edges, part, cum, pa, pb = _kernel_inputs(params)
    seed = int(replica_seeds(rng, 1)[0])
    state = init.copy()
    series, events, mn, drop = _simulate(edges, part, cum, pa, pb, state, float(t_max), float(dt), seed)
    return GCBSEPTrajectory(state, series, dt, int(events), int(mn), int(drop))


@numba.njit(cache=True)
def _final_batch(edges, part, cum, pa, pb, init, t_end, base, seeds):
    E = edges.shape[0]
    n = init.shape[0]
    out = np.empty(seeds.shape[0], np.int64)
    state = init.copy()
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        state[:] = init
        t = 0.0
        while True:
            t += np.random.exponential(1.0 / E)
            if t > t_end:
                break
            e = np.random.randint(E)
            u = edges[e, 0]
            v = edges[e, 1]
            if part[state[u]] == 0 and part[state[v]] == 0:
                continue
            k = np.searchsorted(cum, np.random.random(), side="right")
            if k >= cum.shape[0]:
                k = cum.shape[0] - 1
            state[u] = pa[k]
            state[v] = pb[k]
        idx = 0
        w = 1
        for x in range(n):
            idx += state[x] * w
            w *= base
        out[r] = idx
    return out


def gcbsep_final_law(params: GCBSEPParams, init: Sequence[int], t: float, replicas: int, rng) -> dict:
    """Empirical law at time t keyed by state tuple."""
    edges, part, cum, pa, pb = _kernel_inputs(params)
    seeds = replica_seeds(rng, replicas)
    idx = _final_batch(edges, part, cum, pa, pb, np.array(init, dtype=np.int64), float(t), params.n_local, seeds)
    vals, counts = np.unique(idx, return_counts=True)
    n, s = params.graph.n_vertices, params.n_local
    return {tuple(int((v // s**k) % s) for k in range(n)): c / replicas for v, c in zip(vals, counts)}


def stationary_start(params: GCBSEPParams, rng) -> np.ndarray:
    """Draw from the product law conditioned on at least one particle (rejection)."""
    gen = as_generator(rng)
    pi = np.array([float(w) for w in params.pi])
    part = np.array(params.particle, dtype=bool)
    while True:
        x = gen.choice(len(pi), size=params.graph.n_vertices, p=pi)
        if part[x].any():
            return x


def mc_relaxation_estimate(params: GCBSEPParams, t_max: float, rng, dt: float = 0.25, burn: float | None = None) -> float:
    """T_rel proxy: half the integrated autocorrelation time (time units) of the particle count."""
    gen = as_generator(rng)
    init = stationary_start(params, gen)
    traj = gcbsep_simulate(params, init, t_max, gen, dt)
    counts = traj.counts.astype(float)
    skip = int((burn if burn is not None else 0.0) / dt)
    counts = counts[skip:]
    if counts.std() == 0:
        return 0.0
    return 0.5 * integrated_time(counts) * dt


# --------------------------------------------------------------------------
# Renormalisation and scaling
# --------------------------------------------------------------------------


def default_block(p: float, d: int) -> int:
    return math.ceil(float(p) ** (-1.0 / d) - 1e-12)


def renormalize(params: GCBSEPParams, ell: int | None = None, L: int | None = None, d: int = 2, collapse: bool = False) -> GCBSEPParams:
    """Block variables on ell^d boxes of a torus of side L.

    The block space is S^(ell^d) with the product law and block particles
    'some site of the box is a particle'.  ``collapse=True`` keeps only the
    block particle indicator (exact for the projected dynamics).
    """
    if L is None:
        L = round(params.graph.n_vertices ** (1.0 / d))
    if L**d != params.graph.n_vertices:
        raise GeometryError("renormalisation needs a torus graph with L^d vertices")
    if ell is None:
        ell = default_block(params.p, d)
    if ell < 1 or L % ell:
        raise GeometryError(f"block side {ell} does not divide the torus side {L}")
    graph = Graph.torus(L // ell, d)
    k = ell**d
    if ell == 1:
        return GCBSEPParams(graph, tuple(params.weights), tuple(params.particle))
    pS0 = 1 - params.p
    if collapse:
        hat = 1 - pS0**k
        return GCBSEPParams(graph, (1 - hat, hat), (False, True))
    s = params.n_local
    if s**k > STATE_CAP:
        raise SiteCapError(f"block space of size {s}^{k} exceeds the cap; use collapse=True")
    pi = params.pi
    weights, part = [], []
    for combo in itertools.product(range(s), repeat=k):
        weights.append(math.prod((pi[c] for c in combo), start=Fraction(1) if params.exact else 1.0))
        part.append(any(params.particle[c] for c in combo))
    return GCBSEPParams(graph, tuple(weights), tuple(part))


def trel_log_bound(p: float) -> float:
    return (1.0 / p) * max(1.0, math.log(1.0 / p))


@dataclass(frozen=True)
class ScalingRow:
    d: int
    n: int
    p: float
    method: str
    t_rel: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.t_rel / self.bound


def scaling_study(d: int = 2, ns=(4, 9, 16), ps=None, exact_cap: int = STATE_CAP, mc_time: float = 2e4, rng=0) -> list[ScalingRow]:
    """Binary CBSEP T_rel on tori with n vertices against p^-1 max(1, log 1/p)."""
    if ps is None:
        ps = [2.0**-k for k in range(1, 7)]
    rows = []
    gen = as_generator(rng)
    for n in ns:
        L = round(n ** (1.0 / d))
        if L**d != n:
            raise GeometryError(f"n={n} is not a {d}-th power")
        graph = Graph.torus(L, d)
        for p in ps:
            params = GCBSEPParams.binary(graph, p)
            if 2**n <= exact_cap:
                t, method = relaxation_time(gcbsep_build(params, exact_cap)), "exact"
            else:
                t, method = mc_relaxation_estimate(params, mc_time, gen), "mc"
            rows.append(ScalingRow(d, n, float(p), method, t, trel_log_bound(p)))
    return rows


def write_scaling_csv(path, rows: Sequence[ScalingRow]) -> None:
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "n", "p", "method", "t_rel", "bound", "ratio"])
        for r in rows:
            w.writerow([r.d, r.n, repr(r.p), r.method, repr(r.t_rel), repr(r.bound), repr(r.ratio)])


# --------------------------------------------------------------------------
# Cover time
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _cover(off, tgt, start, seeds):
    n = off.shape[0] - 1
    out = np.empty(seeds.shape[0], np.float64)
    seen = np.zeros(n, np.uint8)
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        seen[:] = 0
        x = start
        seen[x] = 1
        left = n - 1
        t = 0.0
        while left > 0:
            deg = off[x + 1] - off[x]
            t += np.random.exponential(1.0 / deg)
            x = tgt[off[x] + np.random.randint(deg)]
            if seen[x] == 0:
                seen[x] = 1
                left -= 1
        out[r] = t
    return out


def cover_time_samples(graph: Graph, replicas: int, rng, start: int = 0) -> np.ndarray:
    if not graph.is_connected():
        raise GeometryError("cover time of a disconnected graph is infinite")
    if graph.n_vertices == 1:
        return np.zeros(replicas)
    off, tgt = graph.adjacency()
    return _cover(off, tgt, start, replica_seeds(rng, replicas))


def cover_time_estimate(graph: Graph, replicas: int, rng, start: int = 0) -> float:
    """Mean cover time of the walk jumping along each incident edge at rate one."""
    return float(cover_time_samples(graph, replicas, rng, start).mean())
