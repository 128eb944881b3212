"""Continuous-time FA-jf simulation with a global Poisson clock.

The ring process has rate |Lambda|; each ring picks a uniform site and, if
the site has at least j infected neighbours, resamples it (infected with
probability q).  Illegal rings are counted and otherwise ignored.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import GeometryError, SiteCapError
from .lattice import (
    ALL_HEALTHY,
    SITE_CAP,
    BoundaryCondition,
    Config,
    Region,
    SeededRng,
    as_density,
    as_generator,
    extended_infected,
    neighbour_table,
    replica_seeds,
    sample_config,
)
from .stats import CensoredSummary, summarise_series


class _NotHit:
    """The origin was not infected before ``t_max``."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NOT_HIT"

    def __float__(self):
        return math.inf

    def __bool__(self):
        return False


NOT_HIT = _NotHit()


@dataclass
class SimParams:
    j: int
    q: float
    region: Region
    bc: BoundaryCondition | None = None
    init: object = "stationary"  # "stationary" or a Config
    t_max: float = 1.0
    rng: object = 0
    origin: tuple | None = None
    log_events: bool = False

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        self.q = as_density(self.q)
        if not 1 <= self.j <= 2 * self.region.ndim:
            raise ValueError(f"threshold j={self.j} outside [1, {2 * self.region.ndim}]")
        if self.region.size > SITE_CAP:
            raise SiteCapError(f"{self.region.size} sites exceed the cap {SITE_CAP}")
        if self.origin is None:
            self.origin = (0,) * self.region.ndim
        if not self.region.contains(self.origin):
            raise GeometryError(f"origin {self.origin} not in {self.region}")

    def table(self) -> np.ndarray:
        if self.region.is_torus:
            return neighbour_table(self.region, None)
        return neighbour_table(self.region, self.bc or ALL_HEALTHY)

    def origin_index(self) -> int:
        return self.region.flat_index(self.origin)


@dataclass
class SimOutcome:
    tau0: object  # float or NOT_HIT
    final_config: Config
    rings: int
    legal_rings: int
    t_end: float
    events: np.ndarray | None = field(default=None, repr=False)

    @property
    def hit(self) -> bool:
        return self.tau0 is not NOT_HIT


EVENT_DTYPE = np.dtype([("time", "<f8"), ("site", "<i8"), ("old", "u1"), ("new", "u1")])


@numba.njit(cache=True)
def _run(table, ext, j, q, origin, t_max, seed, stop_on_hit, log_cap):
    """Single trajectory.  ``ext`` (1 = infected) is updated in place."""
    np.random.seed(seed)
    n = table.shape[0]
    deg = table.shape[1]
    ev_t = np.empty(log_cap, np.float64)
    ev_x = np.empty(log_cap, np.int64)
    ev_old = np.empty(log_cap, np.uint8)
    n_ev = 0
    rings = 0
    legal = 0
    t = 0.0
    if stop_on_hit and ext[origin] == 1:
        return 0.0, rings, legal, t, ev_t[:0], ev_x[:0], ev_old[:0]
    while True:
        t += np.random.exponential(1.0 / n)
        if t > t_max:
            t = t_max
            break
        x = np.random.randint(n)
        rings += 1
        c = 0
        for k in range(deg):
            c += ext[table[x, k]]
        if c < j:
            continue
        legal += 1
        new = 1 if np.random.random() < q else 0
        if new != ext[x]:
            if n_ev < log_cap:
                ev_t[n_ev] = t
                ev_x[n_ev] = x
                ev_old[n_ev] = ext[x]
                n_ev += 1
            ext[x] = new
            if stop_on_hit and x == origin and new == 1:
                return t, rings, legal, t, ev_t[:n_ev], ev_x[:n_ev], ev_old[:n_ev]
    return -1.0, rings, legal, t, ev_t[:n_ev], ev_x[:n_ev], ev_old[:n_ev]


def _initial(params: SimParams) -> Config:
    if isinstance(params.init, Config):
        if params.init.region != params.region:
            raise GeometryError("initial config lives on another region")
        return params.init
    if params.init == "stationary":
        rng = params.rng if isinstance(params.rng, SeededRng) else SeededRng(int(params.rng), 0)
        return sample_config(params.region, params.q, rng.substream(0))
    raise ValueError(f"unknown init {params.init!r}")


def _seed_of(rng) -> int:
    if isinstance(rng, SeededRng):
        return int(replica_seeds(SeededRng(rng.seed, rng.stream + 1), 1)[0])
    return int(as_generator(rng).integers(0, 2**32))


def fa_run(params: SimParams, log_cap: int = 10**6) -> SimOutcome:
    """One FA-jf trajectory until the origin is infected or ``t_max``."""
    init = _initial(params)
    ext = extended_infected(init)
    seed = _seed_of(params.rng if isinstance(params.rng, SeededRng) else SeededRng(int(params.rng)))
    cap = log_cap if params.log_events else 0
    tau, rings, legal, t_end, et, ex, eo = _run(
        params.table(), ext, params.j, params.q, params.origin_index(), float(params.t_max), seed, True, cap
    )
    final = Config(params.region, (1 - ext[: params.region.size]).reshape(params.region.dims))
    events = None
    if params.log_events:
        events = np.empty(len(et), dtype=EVENT_DTYPE)
        events["time"], events["site"] = et, ex
        # stored values follow the config encoding (0 infected)
        events["old"] = 1 - eo
        events["new"] = eo
    return SimOutcome(NOT_HIT if tau < 0 else float(tau), final, int(rings), int(legal), float(t_end), events)


def write_event_log(path, outcome: SimOutcome) -> None:
    """Binary log: b'FAEV', uint32 count, then records (f8 time, i8 site, u1 old, u1 new)."""
    if outcome.events is None:
        raise ValueError("run was not logged")
    with open(path, "xb") as fh:
        fh.write(b"FAEV" + struct.pack("<I", len(outcome.events)))
        fh.write(outcome.events.tobytes())


def read_event_log(path) -> np.ndarray:
    data = open(path, "rb").read()
    if data[:4] != b"FAEV":
        raise ValueError("not an event log")
    (n,) = struct.unpack("<I", data[4:8])
    return np.frombuffer(data[8:], dtype=EVENT_DTYPE, count=n)


def replay(init: Config, events: np.ndarray, until: float = math.inf) -> Config:
    """Apply logged flips up to time ``until``."""
    states = init.states.ravel().copy()
    for ev in events:
        if ev["time"] > until:
            break
        if states[ev["site"]] != ev["old"]:
            raise ValueError("event log does not match the initial configuration")
        states[ev["site"]] = ev["new"]
    return Config(init.region, states.reshape(init.region.dims))


# --------------------------------------------------------------------------
# Replica batches
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _tau0_batch(table, n, origin, j, q, t_max, seeds):
    out = np.empty(seeds.shape[0], np.float64)
    ext = np.zeros(n + 2, np.uint8)
    ext[n + 1] = 1
    deg = table.shape[1]
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        for x in range(n):
            ext[x] = 1 if np.random.random() < q else 0
        out[r] = np.inf
        if ext[origin] == 1:
            out[r] = 0.0
            continue
        t = 0.0
        while True:
            t += np.random.exponential(1.0 / n)
            if t > t_max:
                break
            x = np.random.randint(n)
            c = 0
            for k in range(deg):
                c += ext[table[x, k]]
            if c < j:
                continue
            new = 1 if np.random.random() < q else 0
            ext[x] = new
            if x == origin and new == 1:
                out[r] = t
                break
    return out


@dataclass(frozen=True)
class Tau0Samples:
    tau0: np.ndarray  # inf where not hit
    params: SimParams
    summary: CensoredSummary


def fa_tau0_samples(params: SimParams, replicas: int) -> Tau0Samples:
    """Independent stationary-start replicas; ``inf`` marks NOT_HIT."""
    seeds = replica_seeds(params.rng, replicas)
    return fa_tau0_from_seeds(params, seeds)


def fa_tau0_from_seeds(params: SimParams, seeds) -> Tau0Samples:
    seeds = np.asarray(seeds, dtype=np.uint32)
    taus = _tau0_batch(params.table(), params.region.size, params.origin_index(), params.j, params.q, float(params.t_max), seeds)
    return Tau0Samples(taus, params, CensoredSummary.of(taus, params.t_max))


@numba.njit(cache=True)
def _final_batch(table, ext0, j, q, t_end, seeds):
    n = table.shape[0]
    deg = table.shape[1]
    out = np.empty(seeds.shape[0], np.int64)
    ext = ext0.copy()
    for r in range(seeds.shape[0]):
        np.random.seed(seeds[r])
        ext[:] = ext0
        t = 0.0
        while True:
            t += np.random.exponential(1.0 / n)
            if t > t_end:
                break
            x = np.random.randint(n)
            c = 0
            for k in range(deg):
                c += ext[table[x, k]]
            if c >= j:
                ext[x] = 1 if np.random.random() < q else 0
        idx = 0
        for x in range(n):
            if ext[x] == 0:  # healthy -> bit set
                idx |= 1 << x
        out[r] = idx
    return out


def final_state_law(params: SimParams, init: Config, t: float, replicas: int) -> np.ndarray:
    """Empirical law at time t over state indices (bit k = state of flat site k)."""
    n = params.region.size
    if n > 20:
        raise SiteCapError("state-index laws are limited to 20 sites")
    seeds = replica_seeds(params.rng, replicas)
    idx = _final_batch(params.table(), extended_infected(init), params.j, params.q, float(t), seeds)
    return np.bincount(idx, minlength=2**n) / replicas


# --------------------------------------------------------------------------
# Stationarity
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _observe(table, ext, j, q, t_burn, t_obs, dt, seed):
    np.random.seed(seed)
    n = table.shape[0]
    deg = table.shape[1]
    n_inf = 0
    pairs = 0
    for x in range(n):
        n_inf += ext[x]
        for k in range(deg):
            y = table[x, k]
            if y < n and ext[x] == 1 and ext[y] == 1:
                pairs += 1
    pairs //= 2
    m = int(t_obs / dt)
    frac = np.empty(m, np.float64)
    pair = np.empty(m, np.float64)
    t = 0.0
    nxt = t_burn
    s = 0
    while s < m:
        step = np.random.exponential(1.0 / n)
        while s < m and t + step > nxt:
            frac[s] = n_inf
            pair[s] = pairs
            s += 1
            nxt += dt
        t += step
        x = np.random.randint(n)
        c = 0
        for k in range(deg):
            c += ext[table[x, k]]
        if c < j:
            continue
        new = 1 if np.random.random() < q else 0
        if new != ext[x]:
            nb = 0
            for k in range(deg):
                y = table[x, k]
                if y < n:
                    nb += ext[y]
            if new == 1:
                n_inf += 1
                pairs += nb
            else:
                n_inf -= 1
                pairs -= nb
            ext[x] = new
    return frac, pair


@dataclass(frozen=True)
class StationarityReport:
    occupancy: float
    occupancy_err: float
    pairs: float
    pairs_err: float
    q: float
    n_sigma: float
    tau_occupancy: float
    tau_pairs: float

    @property
    def z_occupancy(self) -> float:
        return (self.occupancy - self.q) / self.occupancy_err

    @property
    def z_pairs(self) -> float:
        return (self.pairs - self.q**2) / self.pairs_err

    @property
    def passed(self) -> bool:
        return abs(self.z_occupancy) <= self.n_sigma and abs(self.z_pairs) <= self.n_sigma


def stationarity_check(params: SimParams, t_burn: float, t_obs: float, dt: float = 1.0, n_sigma: float = 4.0) -> StationarityReport:
    """Time averages of the infected fraction and the infected-pair fraction from a stationary start."""
    region = params.region
    table = params.table()
    init = _initial(params)
    ext = extended_infected(init)
    n_edges = int((table < region.size).sum()) // 2
    if n_edges == 0:
        raise ValueError("no nearest-neighbour pairs")
    seed = _seed_of(params.rng if isinstance(params.rng, SeededRng) else SeededRng(int(params.rng)))
    frac, pair = _observe(table, ext, params.j, params.q, float(t_burn), float(t_obs), float(dt), seed)
    if len(frac) < 2:
        raise ValueError("zero effective samples")
    a = summarise_series(frac / region.size)
    b = summarise_series(pair / n_edges)
    if a.stderr == 0 or b.stderr == 0:
        raise ValueError("zero effective samples (frozen observable)")
    return StationarityReport(a.mean, a.stderr, b.mean, b.stderr, params.q, n_sigma, a.tau_int, b.tau_int)


def write_tau0_csv(path, samples: Tau0Samples, seed: int) -> None:
    """CSV with columns ``seed, replica, q, L, tau0``; NOT_HIT is ``inf``."""
    import csv

    L = samples.params.region.dims[0]
    with open(path, "x", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "replica", "q", "L", "tau0"])
        for i, t in enumerate(samples.tau0):
            w.writerow([seed, i, repr(samples.params.q), L, "inf" if math.isinf(t) else repr(float(t))])
