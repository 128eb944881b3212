"""j-neighbour bootstrap percolation: closure, infection times, spanning and crossing events."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy import ndimage

from .errors import EngineError, GeometryError
from .lattice import (
    ALL_HEALTHY,
    BoundaryCondition,
    Config,
    Region,
    as_density,
    extended_infected,
    neighbour_table,
    replica_seeds,
    sample_config,
)

INFINITY = math.inf
"""Sentinel for an origin that is never infected."""


class _Absent:
    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


ABSENT = _Absent()
"""Marker for threshold constants the toolkit does not provide."""

LAMBDA_22 = math.pi**2 / 18
PI2_OVER_9 = math.pi**2 / 9


def constants() -> dict:
    """Sharp-threshold constants.  Only ``(d, j) = (2, 2)`` is known here."""
    return {
        "lambda(2,2)": float(f"{LAMBDA_22:.15g}"),
        "pi^2/9": float(f"{PI2_OVER_9:.15g}"),
    }


def lambda_dj(d: int, j: int):
    """``lambda(d, j)``, or :data:`ABSENT` outside ``(2, 2)``."""
    return constants()["lambda(2,2)"] if (d, j) == (2, 2) else ABSENT


@dataclass(frozen=True)
class ClosureResult:
    closed: Config
    rounds: int
    times: np.ndarray  # synchronous infection time per site, -1 if never


@dataclass(frozen=True)
class BPTrajectoryStats:
    tau0_bp: np.ndarray  # float array, INFINITY where never infected
    q: float
    region: Region
    seed: object

    @property
    def median(self) -> float:
        return float(np.median(self.tau0_bp))


def _table(region: Region, bc):
    if region.is_torus:
        return neighbour_table(region, None)
    return neighbour_table(region, bc or ALL_HEALTHY)


def _check_j(j: int, region: Region):
    if not 1 <= j <= 2 * region.ndim:
        raise ValueError(f"threshold j={j} outside [1, {2 * region.ndim}]")


@numba.njit(cache=True)
def _closure_times(table, ext, j):
    """Synchronous infection times by a FIFO work queue.

    Sites leave the queue in nondecreasing time order, so a site reached by
    its j-th infected neighbour at time t gets time t+1, which is exactly
    the round in which the synchronous rule infects it.
    """
    n = table.shape[0]
    deg = table.shape[1]
    times = np.full(n, -1, np.int64)
    count = np.zeros(n, np.int64)
    queue = np.empty(n, np.int64)
    head = 0
    tail = 0
    for x in range(n):
        if ext[x]:
            times[x] = 0
            queue[tail] = x
            tail += 1
        else:
            # only boundary ghosts here; real infected neighbours are counted when popped
            c = 0
            for k in range(deg):
                y = table[x, k]
                if y >= n:
                    c += ext[y]
            count[x] = c
    # sites that fire in round 1 from boundary ghosts alone
    for x in range(n):
        if times[x] < 0 and count[x] >= j:
            times[x] = 1
            queue[tail] = x
            tail += 1
    # the queue holds round-0 sites before round-1 ghost-fired sites
    while head < tail:
        y = queue[head]
        head += 1
        ty = times[y]
        for k in range(deg):
            x = table[y, k]
            if x >= n or times[x] >= 0:
                continue
            count[x] += 1
            if count[x] >= j:
                times[x] = ty + 1
                queue[tail] = x
                tail += 1
    return times


def closure_times(j: int, region: Region, bc, config: Config) -> np.ndarray:
    _check_j(j, region)
    table = _table(region, bc)
    return _closure_times(table, extended_infected(config), j).reshape(region.dims)


def bp_step(j: int, region: Region, bc: BoundaryCondition | None, config: Config) -> Config:
    """One synchronous update: add every site with at least ``j`` infected neighbours."""
    _check_j(j, region)
    table = _table(region, bc)
    ext = extended_infected(config)
    counts = ext[table].sum(axis=1)
    infected = ext[: region.size].astype(bool) | (counts >= j)
    return Config(region, (~infected).astype(np.uint8).reshape(region.dims))


def bp_closure(j: int, region: Region, bc: BoundaryCondition | None, config: Config) -> ClosureResult:
    """Least fixpoint of :func:`bp_step` containing the initial infections."""
    times = closure_times(j, region, bc, config)
    closed = Config(region, (times < 0).astype(np.uint8))
    rounds = int(times.max()) if times.size else 0
    return ClosureResult(closed, max(rounds, 0), times)


def internally_spanned(region: Region, config: Config) -> bool:
    """2-BP closure with healthy boundary fills the region."""
    if region.size == 0:
        return True
    return bool((closure_times(2, region, ALL_HEALTHY, config) >= 0).all())


def closure_components(infected: np.ndarray, check_cuboid: bool = True):
    """Label 4-connected (face-connected) components; check each is a cuboid."""
    structure = ndimage.generate_binary_structure(infected.ndim, 1)
    labels, count = ndimage.label(infected, structure=structure)
    if check_cuboid and count:
        sizes = np.bincount(labels.ravel(), minlength=count + 1)
        for k, sl in enumerate(ndimage.find_objects(labels), start=1):
            box = int(np.prod([s.stop - s.start for s in sl]))
            if box != sizes[k]:
                raise EngineError(f"closure component {k} is not a cuboid (bounding box {sl})")
    return labels, count


def _origin_local(V: Region) -> tuple[int, ...]:
    origin = (0,) * V.ndim
    if not V.contains(origin):
        raise GeometryError(f"origin not in {V}")
    return V.local(origin)


def crossing_event(V: Region, x: Sequence[int], config: Config) -> bool:
    """Event that the 2-BP closure in ``V`` has a cuboid containing ``x`` and the origin."""
    if config.region != V:
        raise GeometryError("config does not live on V")
    o = _origin_local(V)
    xl = V.local(x)
    infected = closure_times(2, V, ALL_HEALTHY, config) >= 0
    labels, _ = closure_components(infected)
    return bool(labels[o] != 0 and labels[o] == labels[xl])


def estimate_rho(V: Region, q, samples: int, rng) -> tuple[float, float]:
    """Monte Carlo estimate of the crossing probability sup over boundary-adjacent x.

    All x are evaluated on each sampled configuration; the estimate is the
    maximum over x of the per-x frequencies (a conservative proxy of the sup),
    with the binomial standard error of the maximising cell.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    q = as_density(q)
    o = _origin_local(V)
    bsites = [V.local(s) for s in V.boundary_adjacent()]
    bidx = tuple(np.array(c) for c in zip(*bsites))
    hits = np.zeros(len(bsites), dtype=np.int64)
    gens = replica_seeds(rng, 1)
    gen = np.random.default_rng(gens[0])
    table = neighbour_table(V, ALL_HEALTHY)
    n = V.size
    ext = np.empty(n + 2, dtype=np.uint8)
    ext[n], ext[n + 1] = 0, 1
    chunk = 4096
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        draws = gen.random((m, n)) < q
        for row in draws:
            ext[:n] = row
            infected = (_closure_times(table, ext, 2) >= 0).reshape(V.dims)
            if not infected[o]:
                continue
            labels, _ = closure_components(infected)
            hits += labels[bidx] == labels[o]
        done += m
    freq = hits / samples
    k = int(np.argmax(freq))
    p = float(freq[k])
    return p, math.sqrt(p * (1 - p) / samples)


def tau0_lower_bound(rho: float, V: Region, q) -> float:
    """The w.h.p. lower bound ``q / (rho |V|^2)`` on the FA infection time of the origin."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return as_density(q) / (rho * V.size**2)


@numba.njit(cache=True)
def _tau0_bp_batch(table, n, origin, j, q, seeds):
    out = np.empty(seeds.shape[0], np.float64)
    ext = np.zeros(n + 2, np.uint8)
    ext[n + 1] = 1
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        for x in range(n):
            ext[x] = 1 if np.random.random() < q else 0
        t = _closure_times(table, ext, j)[origin]
        out[r] = np.inf if t < 0 else t
    return out


def bp_tau0_samples(torus: Region, q, replicas: int, rng, j: int = 2) -> BPTrajectoryStats:
    """Synchronous j-BP from the product measure; first round infecting the origin per replica."""
    q = as_density(q)
    _check_j(j, torus)
    table = _table(torus, None)
    origin = torus.flat_index((0,) * torus.ndim)
    seeds = replica_seeds(rng, replicas)
    taus = _tau0_bp_batch(table, torus.size, origin, j, q, seeds)
    return BPTrajectoryStats(taus, q, torus, rng)


def write_tau0_csv(path, stats: BPTrajectoryStats, seed: int, column: str = "tau0_bp"):
    """CSV with columns ``seed, replica, q, L, <column>``; infinity is spelled ``inf``."""
    L = stats.region.dims[0]
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "replica", "q", "L", column])
        for i, t in enumerate(stats.tau0_bp):
            w.writerow([seed, i, repr(stats.q), L, "inf" if math.isinf(t) else repr(float(t))])


def sample_closure(region: Region, q, rng, j: int = 2, bc=None) -> ClosureResult:
    return bp_closure(j, region, bc, sample_config(region, q, rng))


@numba.njit(cache=True)
def _spanned_batch(table, flat_infected, j):
    B, n = flat_infected.shape
    out = np.empty(B, np.bool_)
    ext = np.zeros(n + 2, np.uint8)
    ext[n + 1] = 1
    for b in range(B):
        ext[:n] = flat_infected[b]
        t = _closure_times(table, ext, j)
        ok = True
        for x in range(n):
            if t[x] < 0:
                ok = False
                break
        out[b] = ok
    return out


def spanned_batch(states: np.ndarray, bc: BoundaryCondition | None = None, j: int = 2) -> np.ndarray:
    """Closure fills the rectangle, for a batch of state arrays (B, *dims) with 0 = infected."""
    states = np.asarray(states)
    region = Region.rectangle(*states.shape[1:])
    table = _table(region, bc)
    flat = (states.reshape(states.shape[0], -1) == 0).astype(np.uint8)
    return _spanned_batch(table, flat, j)
