"""Lattice geometry, configurations, boundary conditions and product-measure sampling.

Conventions
-----------
* A site state is ``0`` for infected (empty) and ``1`` for healthy (filled).
* Sites are integer tuples in absolute coordinates.  A rectangle of ``dims``
  with ``offset`` o covers ``o + [0, dims)``; axis 0 is the horizontal
  (column) direction, axis 1 the vertical (row) direction.
* A torus covers ``[0, L)`` on every axis with periodic wrap and has no
  boundary.  Neighbourhoods on small tori are those of the simple graph
  (duplicate and self neighbours are dropped), so a side-2 torus gives each
  site one neighbour per axis.
"""

from __future__ import annotations

import functools
import io
import itertools
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError, SiteCapError

SITE_CAP = 2**27
"""Maximal number of sites in a :class:`Region`."""

INFECTED = 0
HEALTHY = 1


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """A rectangle (with integer offset) or a torus."""

    dims: tuple[int, ...]
    kind: str = "rectangle"
    offset: tuple[int, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise GeometryError("dims must be nonempty")
        if self.kind not in ("rectangle", "torus"):
            raise GeometryError(f"unknown region kind {self.kind!r}")
        if any(d < 0 for d in dims) or (self.kind == "torus" and any(d < 1 for d in dims)):
            raise GeometryError(f"invalid dims {dims}")
        offset = tuple(int(o) for o in self.offset) if self.offset else (0,) * len(dims)
        if len(offset) != len(dims):
            raise GeometryError("offset and dims differ in dimension")
        if self.kind == "torus" and any(offset):
            raise GeometryError("a torus carries no offset")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "offset", offset)
        if self.size > SITE_CAP:
            raise SiteCapError(f"region has {self.size} sites, cap is {SITE_CAP}")

    @classmethod
    def rectangle(cls, *dims: int, offset: Sequence[int] | None = None) -> "Region":
        return cls(tuple(dims), "rectangle", tuple(offset) if offset is not None else ())

    @classmethod
    def torus(cls, *dims: int) -> "Region":
        return cls(tuple(dims), "torus")

    @classmethod
    def box(cls, lo: Sequence[int], hi: Sequence[int]) -> "Region":
        """Rectangle covering ``[lo, hi]`` inclusive on every axis."""
        return cls.rectangle(*(h - l + 1 for l, h in zip(lo, hi)), offset=lo)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims, dtype=object))

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def is_empty(self) -> bool:
        return self.size == 0

    def translate(self, shift: Sequence[int]) -> "Region":
        if self.is_torus:
            raise GeometryError("cannot translate a torus")
        return Region.rectangle(*self.dims, offset=[o + s for o, s in zip(self.offset, shift)])

    def contains(self, site: Sequence[int]) -> bool:
        if len(site) != self.ndim:
            return False
        if self.is_torus:
            return all(0 <= s < d for s, d in zip(site, self.dims))
        return all(o <= s < o + d for s, o, d in zip(site, self.offset, self.dims))

    def contains_region(self, other: "Region") -> bool:
        return all(
            o1 <= o2 and o2 + d2 <= o1 + d1
            for o1, d1, o2, d2 in zip(self.offset, self.dims, other.offset, other.dims)
        )

    def local(self, site: Sequence[int]) -> tuple[int, ...]:
        if not self.contains(site):
            raise GeometryError(f"site {tuple(site)} outside {self}")
        return tuple(s - o for s, o in zip(site, self.offset))

    def flat_index(self, site: Sequence[int]) -> int:
        return int(np.ravel_multi_index(self.local(site), self.dims))

    def site_of(self, flat: int) -> tuple[int, ...]:
        loc = np.unravel_index(flat, self.dims)
        return tuple(int(l) + o for l, o in zip(loc, self.offset))

    def sites(self) -> Iterable[tuple[int, ...]]:
        ranges = [range(o, o + d) for o, d in zip(self.offset, self.dims)]
        return itertools.product(*ranges)

    def boundary_adjacent(self) -> list[tuple[int, ...]]:
        """Sites of the region at distance one from its complement."""
        if self.is_torus:
            return []
        out = []
        for site in self.sites():
            loc = self.local(site)
            if any(l == 0 or l == d - 1 for l, d in zip(loc, self.dims)):
                out.append(site)
        return out

    def intersects(self, other: "Region") -> bool:
        return all(
            max(o1, o2) < min(o1 + d1, o2 + d2)
            for o1, d1, o2, d2 in zip(self.offset, self.dims, other.offset, other.dims)
        )


# --------------------------------------------------------------------------
# Configurations
# --------------------------------------------------------------------------


class Config:
    """Immutable assignment of a state to every site of a region.

    Storage is bit-packed (``np.packbits``), so 10**8 sites take 12.5 MB.
    """

    __slots__ = ("region", "_packed", "_hash")

    def __init__(self, region: Region, states):
        arr = np.asarray(states)
        if arr.shape != region.dims:
            raise GeometryError(f"state array shape {arr.shape} does not match {region.dims}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("states must be 0 (infected) or 1 (healthy)")
        self.region = region
        self._packed = np.packbits(arr.astype(np.uint8, copy=False).ravel())
        self._packed.flags.writeable = False
        self._hash = None

    @classmethod
    def _from_packed(cls, region: Region, packed: np.ndarray) -> "Config":
        obj = cls.__new__(cls)
        obj.region = region
        obj._packed = packed
        obj._packed.flags.writeable = False
        obj._hash = None
        return obj

    @classmethod
    def all_healthy(cls, region: Region) -> "Config":
        return cls(region, np.ones(region.dims, dtype=np.uint8))

    @classmethod
    def all_infected(cls, region: Region) -> "Config":
        return cls(region, np.zeros(region.dims, dtype=np.uint8))

    @classmethod
    def from_infected(cls, region: Region, sites: Iterable[Sequence[int]]) -> "Config":
        arr = np.ones(region.dims, dtype=np.uint8)
        for s in sites:
            arr[region.local(s)] = INFECTED
        return cls(region, arr)

    @classmethod
    def from_index(cls, region: Region, index: int) -> "Config":
        """Config whose flat site ``k`` holds bit ``k`` of ``index``."""
        n = region.size
        bits = (index >> np.arange(n, dtype=np.uint64)) & 1 if n <= 64 else None
        if bits is None:
            bits = np.array([(index >> k) & 1 for k in range(n)], dtype=np.uint8)
        return cls(region, np.asarray(bits, dtype=np.uint8).reshape(region.dims))

    def to_index(self) -> int:
        flat = self.states.ravel()
        return int(sum(int(b) << k for k, b in enumerate(flat)))

    @property
    def states(self) -> np.ndarray:
        n = self.region.size
        arr = np.unpackbits(self._packed, count=n).reshape(self.region.dims)
        arr.flags.writeable = False
        return arr

    @property
    def infected(self) -> np.ndarray:
        """Boolean array, True where the site is infected."""
        return self.states == INFECTED

    @property
    def nbytes(self) -> int:
        return self._packed.nbytes

    def state(self, site: Sequence[int]) -> int:
        return int(self.states[self.region.local(site)])

    def infected_sites(self) -> list[tuple[int, ...]]:
        idx = np.argwhere(self.infected)
        return [tuple(int(i) + o for i, o in zip(row, self.region.offset)) for row in idx]

    def n_infected(self) -> int:
        return int(self.infected.sum())

    def restrict(self, sub: Region) -> "Config":
        if self.region.is_torus or not self.region.contains_region(sub):
            raise GeometryError(f"{sub} is not a sub-rectangle of {self.region}")
        sl = tuple(slice(o2 - o1, o2 - o1 + d2) for o1, o2, d2 in zip(self.region.offset, sub.offset, sub.dims))
        return Config(sub, self.states[sl])

    def with_states(self, sites: Iterable[Sequence[int]], value: int) -> "Config":
        arr = self.states.copy()
        for s in sites:
            arr[self.region.local(s)] = value
        return Config(self.region, arr)

    def __eq__(self, other):
        if not isinstance(other, Config):
            return NotImplemented
        return self.region == other.region and np.array_equal(self._packed, other._packed)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.region, self._packed.tobytes()))
        return self._hash

    def __repr__(self):
        return f"Config({self.region}, infected={self.n_infected()})"

    # -- text form -------------------------------------------------------

    def to_text(self) -> str:
        """Matrix form: ``.`` infected, ``#`` healthy; top line is the highest row.

        1-d regions give one line; 3-d regions give one block per axis-2 slice
        separated by blank lines.
        """
        arr = self.states
        if arr.ndim == 1:
            return "".join("#" if v else "." for v in arr) + "\n"
        if arr.ndim == 2:
            lines = ["".join("#" if arr[x, y] else "." for x in range(arr.shape[0])) for y in reversed(range(arr.shape[1]))]
            return "\n".join(lines) + "\n"
        if arr.ndim == 3:
            blocks = [Config(Region.rectangle(*arr.shape[:2]), arr[:, :, z]).to_text() for z in range(arr.shape[2])]
            return "\n".join(blocks)
        raise GeometryError("text form supports 1 to 3 dimensions")

    @classmethod
    def from_text(cls, text: str, offset: Sequence[int] | None = None, torus: bool = False) -> "Config":
        blocks = [b for b in text.strip("\n").split("\n\n") if b.strip()]
        grids = []
        for b in blocks:
            lines = [ln.strip() for ln in b.strip("\n").splitlines() if ln.strip()]
            if any(set(ln) - {".", "#"} for ln in lines):
                raise ValueError("text configs use only '.' and '#'")
            if len({len(ln) for ln in lines}) != 1:
                raise ValueError("ragged text config")
            grid = np.array([[1 if ch == "#" else 0 for ch in ln] for ln in reversed(lines)], dtype=np.uint8).T
            grids.append(grid)
        if len(grids) == 1:
            arr = grids[0]
            if arr.shape[1] == 1 and len(text.strip().splitlines()) == 1 and offset is not None and len(offset) == 1:
                arr = arr[:, 0]
        else:
            arr = np.stack(grids, axis=2)
        dims = arr.shape
        region = Region.torus(*dims) if torus else Region.rectangle(*dims, offset=offset)
        return cls(region, arr)

    # -- binary form -----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Run-length-encoded binary form with a 16-byte header.

        Header: magic ``b"FA"``, version (u8), flags (u8: low 2 bits ndim-1,
        bit 2 torus), then three little-endian u32 dims (unused ones 0).
        Then ``ndim`` int32 offsets, the first state (u8) and the run lengths
        as LEB128 varints.
        """
        r = self.region
        if r.ndim > 3:
            raise GeometryError("binary form supports 1 to 3 dimensions")
        dims = list(r.dims) + [0] * (3 - r.ndim)
        flags = (r.ndim - 1) | (4 if r.is_torus else 0)
        buf = io.BytesIO()
        buf.write(struct.pack("<2sBB3I", _MAGIC, _VERSION, flags, *dims))
        buf.write(struct.pack(f"<{r.ndim}i", *r.offset))
        flat = self.states.ravel()
        if flat.size == 0:
            buf.write(b"\x01")
            return buf.getvalue()
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        buf.write(bytes([int(flat[0])]))
        for run in np.diff(bounds):
            buf.write(_varint(int(run)))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Config":
        magic, version, flags, d0, d1, d2 = struct.unpack_from("<2sBB3I", data, 0)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not a config blob (bad magic/version)")
        ndim = (flags & 3) + 1
        dims = (d0, d1, d2)[:ndim]
        pos = 16
        offset = struct.unpack_from(f"<{ndim}i", data, pos)
        pos += 4 * ndim
        region = Region.torus(*dims) if flags & 4 else Region.rectangle(*dims, offset=offset)
        first = data[pos]
        pos += 1
        runs = []
        while pos < len(data):
            val, pos = _read_varint(data, pos)
            runs.append(val)
        if sum(runs) != region.size:
            raise ValueError("run lengths do not cover the region")
        states = np.repeat((np.arange(len(runs)) + first) % 2, runs).astype(np.uint8)
        return cls(region, states.reshape(dims))


_MAGIC = b"FA"
_VERSION = 1


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_varint(data: bytes, pos: int) -> tuple[int, int]:
    shift = value = 0
    while True:
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7


# --------------------------------------------------------------------------
# Boundary conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryCondition:
    """Frozen states on the outer boundary of a rectangle.

    ``kind`` is ``"healthy"`` (all healthy), ``"infected"`` (all infected) or
    ``"explicit"``.  Explicit boundaries store a padded state array of shape
    ``dims + 2``; only the sites at distance one from the region are read.
    """

    kind: str
    _padded: bytes | None = field(default=None, repr=False)
    _shape: tuple[int, ...] | None = None

    @classmethod
    def healthy(cls) -> "BoundaryCondition":
        return ALL_HEALTHY

    @classmethod
    def infected(cls) -> "BoundaryCondition":
        return ALL_INFECTED

    @classmethod
    def from_padded(cls, padded) -> "BoundaryCondition":
        arr = np.asarray(padded, dtype=np.uint8)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("boundary states must be 0 or 1")
        return cls("explicit", arr.tobytes(), arr.shape)

    @classmethod
    def from_function(cls, region: Region, fn) -> "BoundaryCondition":
        """Explicit boundary with ``fn(site) -> state`` on every boundary site."""
        padded = np.ones(tuple(d + 2 for d in region.dims), dtype=np.uint8)
        for site in boundary_sites(region):
            padded[tuple(s - o + 1 for s, o in zip(site, region.offset))] = fn(site)
        return cls.from_padded(padded)

    @classmethod
    def from_sides(cls, region: Region, left=None, right=None, down=None, up=None) -> "BoundaryCondition":
        """2-d explicit boundary from its four sides (missing sides healthy)."""
        if region.ndim != 2:
            raise GeometryError("from_sides needs a 2-d rectangle")
        a, b = region.dims
        padded = np.ones((a + 2, b + 2), dtype=np.uint8)
        if left is not None:
            padded[0, 1:-1] = left
        if right is not None:
            padded[-1, 1:-1] = right
        if down is not None:
            padded[1:-1, 0] = down
        if up is not None:
            padded[1:-1, -1] = up
        return cls.from_padded(padded)

    @classmethod
    def random(cls, region: Region, q: float, rng) -> "BoundaryCondition":
        gen = as_generator(rng)
        padded = (gen.random(tuple(d + 2 for d in region.dims)) >= q).astype(np.uint8)
        return cls.from_padded(padded)

    @property
    def is_symbolic(self) -> bool:
        return self.kind != "explicit"

    def padded(self, region: Region, states=None) -> np.ndarray:
        """State array of shape ``dims + 2`` with the boundary filled in.

        The interior holds ``states`` (or healthy if omitted).
        """
        shape = tuple(d + 2 for d in region.dims)
        if self.kind == "healthy":
            out = np.ones(shape, dtype=np.uint8)
        elif self.kind == "infected":
            out = np.zeros(shape, dtype=np.uint8)
        else:
            if self._shape != shape:
                raise GeometryError(f"explicit boundary of shape {self._shape} does not fit {region.dims}")
            out = np.frombuffer(self._padded, dtype=np.uint8).reshape(shape).copy()
        inner = tuple(slice(1, -1) for _ in shape)
        out[inner] = 1 if states is None else states
        return out

    def value(self, region: Region, site: Sequence[int]) -> int:
        if self.kind == "healthy":
            return HEALTHY
        if self.kind == "infected":
            return INFECTED
        return int(self.padded(region)[tuple(s - o + 1 for s, o in zip(site, region.offset))])


ALL_HEALTHY = BoundaryCondition("healthy")
ALL_INFECTED = BoundaryCondition("infected")


def boundary_sites(region: Region) -> list[tuple[int, ...]]:
    """Sites at distance exactly one from a rectangle (no corners)."""
    if region.is_torus:
        return []
    out = []
    for site in region.sites():
        for axis in range(region.ndim):
            for step in (-1, 1):
                nb = list(site)
                nb[axis] += step
                if not region.contains(nb):
                    out.append(tuple(nb))
    return sorted(set(out))


# --------------------------------------------------------------------------
# Density and randomness
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Density:
    """Infection density ``q`` in (0, 1) with ``qprime = -log(1 - q)``."""

    q: float

    def __post_init__(self):
        if not 0.0 < float(self.q) < 1.0:
            raise ValueError(f"density must lie in (0, 1), got {self.q}")

    @property
    def qprime(self) -> float:
        return -np.log1p(-float(self.q))


def as_density(q) -> float:
    return float(q.q) if isinstance(q, Density) else float(Density(q).q)


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random stream identified by ``(seed, stream)``.

    Streams are derived with ``numpy.random.SeedSequence`` spawn keys, so any
    number of replica streams can be created independently.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream,))))

    def substream(self, index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, index))
        return np.random.Generator(np.random.PCG64(ss))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot make a generator from {rng!r}")


# --------------------------------------------------------------------------
# Neighbourhoods and constraints
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=64)
def neighbour_table(region: Region, bc: BoundaryCondition | None = None) -> np.ndarray:
    """Neighbour indices into an extended state vector of length ``n + 2``.

    Entry ``n`` is a healthy ghost and ``n + 1`` an infected ghost: boundary
    neighbours of a rectangle point to the ghost matching their boundary
    state.  On a torus, missing slots (small sides) point to the healthy
    ghost.  The returned array is read-only with shape ``(n, 2 * ndim)``.
    """
    dims = region.dims
    n = region.size
    d = region.ndim
    coords = np.indices(dims).reshape(d, -1)
    table = np.full((n, 2 * d), n, dtype=np.int64)
    if region.is_torus:
        seen = np.full((n, 2 * d), -1, dtype=np.int64)
        col = 0
        own = np.arange(n)
        for axis in range(d):
            for step in (-1, 1):
                nb = coords.copy()
                nb[axis] = (nb[axis] + step) % dims[axis]
                idx = np.ravel_multi_index(nb, dims)
                dup = (idx == own) | (seen[:, :col] == idx[:, None]).any(axis=1)
                table[:, col] = np.where(dup, n, idx)
                seen[:, col] = idx
                col += 1
    else:
        bc = bc or ALL_HEALTHY
        padded = bc.padded(region) if region.size else None
        col = 0
        for axis in range(d):
            for step in (-1, 1):
                nb = coords.copy()
                nb[axis] += step
                inside = (nb[axis] >= 0) & (nb[axis] < dims[axis])
                idx = np.full(n, n, dtype=np.int64)
                if inside.any():
                    idx[inside] = np.ravel_multi_index(nb[:, inside], dims)
                if (~inside).any():
                    bvals = padded[tuple(nb[:, ~inside] + 1)]
                    idx[~inside] = np.where(bvals == INFECTED, n + 1, n)
                table[:, col] = idx
                col += 1
    table.flags.writeable = False
    return table


def extended_infected(config: Config) -> np.ndarray:
    """Infected flags (uint8) of ``config`` followed by the two ghost entries."""
    n = config.region.size
    ext = np.empty(n + 2, dtype=np.uint8)
    ext[:n] = config.infected.ravel()
    ext[n] = 0
    ext[n + 1] = 1
    return ext


def infected_neighbour_counts(region: Region, bc: BoundaryCondition | None, config: Config) -> np.ndarray:
    table = neighbour_table(region, None if region.is_torus else (bc or ALL_HEALTHY))
    ext = extended_infected(config)
    return ext[table].sum(axis=1).reshape(region.dims)


def constraint(j: int, region: Region, bc: BoundaryCondition | None, config: Config, x: Sequence[int]) -> bool:
    """True iff site ``x`` has at least ``j`` infected neighbours in ``config`` joined with ``bc``."""
    if not region.contains(x):
        raise GeometryError(f"site {tuple(x)} outside {region}")
    if j < 1 or j > 2 * region.ndim:
        raise ValueError(f"threshold j={j} outside [1, {2 * region.ndim}]")
    table = neighbour_table(region, None if region.is_torus else (bc or ALL_HEALTHY))
    ext = extended_infected(config)
    return int(ext[table[region.flat_index(x)]].sum()) >= j


def sample_config(region: Region, q, rng) -> Config:
    """Product Bernoulli sample: each site infected independently with probability ``q``."""
    q = as_density(q)
    if region.size > SITE_CAP:
        raise SiteCapError(f"region has {region.size} sites, cap is {SITE_CAP}")
    gen = as_generator(rng)
    healthy = gen.random(region.dims) >= q
    return Config(region, healthy.astype(np.uint8))


def compose(parts: Sequence[tuple[Region, Config]]) -> Config:
    """Glue configurations on pairwise disjoint rectangles tiling their bounding box."""
    if not parts:
        raise GeometryError("nothing to compose")
    regions = [r for r, _ in parts]
    for r, c in parts:
        if r.is_torus or c.region != r:
            raise GeometryError("compose takes rectangles with matching configs")
    ndim = regions[0].ndim
    for a, b in itertools.combinations(regions, 2):
        if a.size and b.size and a.intersects(b):
            raise GeometryError(f"overlapping regions {a} and {b}")
    nonempty = [r for r in regions if r.size]
    lo = [min(r.offset[k] for r in nonempty) for k in range(ndim)]
    hi = [max(r.offset[k] + r.dims[k] for r in nonempty) for k in range(ndim)]
    whole = Region.rectangle(*(h - l for l, h in zip(lo, hi)), offset=lo)
    if sum(r.size for r in nonempty) != whole.size:
        raise GeometryError("parts do not tile a rectangle")
    arr = np.ones(whole.dims, dtype=np.uint8)
    for r, c in parts:
        if not r.size:
            continue
        sl = tuple(slice(o - l, o - l + d) for o, l, d in zip(r.offset, lo, r.dims))
        arr[sl] = c.states
    return Config(whole, arr)


def replica_generators(rng, replicas: int) -> list[np.random.Generator]:
    """Independent generators, one per replica.

    A :class:`SeededRng` (or an int seed) gives the spawn-key streams
    ``(stream, i)``, so replica ``i`` sees the same draws whatever the total
    number of replicas.
    """
    if isinstance(rng, (int, np.integer)):
        rng = SeededRng(int(rng))
    if isinstance(rng, SeededRng):
        return [rng.substream(i) for i in range(replicas)]
    return as_generator(rng).spawn(replicas)


def replica_seeds(rng, replicas: int) -> np.ndarray:
    """32-bit seeds for compiled kernels, derived like :func:`replica_generators`."""
    if isinstance(rng, (int, np.integer)):
        rng = SeededRng(int(rng))
    if isinstance(rng, SeededRng):
        return np.array(
            [np.random.SeedSequence(rng.seed, spawn_key=(rng.stream, i)).generate_state(1)[0] for i in range(replicas)],
            dtype=np.uint32,
        )
    return as_generator(rng).integers(0, 2**32, size=replicas, dtype=np.uint32)
