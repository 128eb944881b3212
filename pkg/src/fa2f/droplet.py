"""Multiscale droplet machinery for FA-2f in two dimensions.

Length scales, traversability (events and exact probabilities), the
recursive super-good event with witnesses, the shrunken super-good event,
the special functions ``beta`` and ``g``, the product lower bound on the
super-good probability, and the good-box environment events.

Coordinates inside a rectangle are local: column ``x`` (axis 0) and row
``y`` (axis 1), ``y = 0`` being the bottom row.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import mpmath
import numba
import numpy as np
from scipy import integrate

from .errors import GeometryError, NumericGuardError
from .lattice import (
    ALL_HEALTHY,
    ALL_INFECTED,
    BoundaryCondition,
    Config,
    Region,
    as_density,
)

DIRECTIONS = ("right", "left", "up", "down")
_ARROWS = {"→": "right", "←": "left", "↑": "up", "↓": "down"}

LOG_CAP = 10**6  # ell_m beyond e**LOG_CAP is refused


# --------------------------------------------------------------------------
# Scales
# --------------------------------------------------------------------------


def _floor_exact(m: int, q: float) -> int:
    """floor(exp(m sqrt q) / sqrt q), exact even when the float is ambiguous."""
    sq = math.sqrt(q)
    if m * sq > LOG_CAP:
        raise NumericGuardError(f"scale ell_{m} overflows the supported range")
    if m * sq < 700:
        val = math.exp(m * sq) / sq
        fl = math.floor(val)
        if val < 2**50 and min(val - fl, fl + 1 - val) > 1e-6 * max(1.0, val) * 1e-3:
            return int(fl)
    digits = int(m * sq / math.log(10)) + 30
    with mpmath.workdps(digits):
        sqm = mpmath.sqrt(mpmath.mpf(q))
        return int(mpmath.floor(mpmath.exp(m * sqm) / sqm))


def scale_ell(m: int, q) -> int:
    """Length scale ell_m (natural log throughout); ``ell_0 = 1``."""
    if m < 0:
        raise ValueError("m must be >= 0")
    if m == 0:
        return 1
    return _floor_exact(int(m), as_density(q))


def n_final(q) -> int:
    """Final scale index ``N = ceil(8 log(1/q) / sqrt q)``."""
    q = as_density(q)
    val = 8 * math.log(1 / q) / math.sqrt(q)
    c = math.ceil(val)
    if abs(val - round(val)) < 1e-9:
        with mpmath.workdps(40):
            qm = mpmath.mpf(q)
            c = int(mpmath.ceil(8 * mpmath.log(1 / qm) / mpmath.sqrt(qm)))
    return int(c)


class ScaleSequence:
    """Increasing lengths ``ell_0 = 1 < ell_1 < ...``.

    ``ScaleSequence.natural(q)`` follows the closed form lazily (values are
    Python ints, unbounded); ``ScaleSequence.custom([1, 2, 4])`` is a finite
    toy sequence for exhaustive checks.
    """

    def __init__(self, values: Sequence[int] | None = None, q: float | None = None):
        self.q = None if q is None else as_density(q)
        self._values: list[int] = [int(v) for v in values] if values is not None else [1]
        self.finite = values is not None
        if self._values[0] != 1:
            raise ValueError("ell_0 must be 1")
        if any(b <= a for a, b in zip(self._values, self._values[1:])):
            raise ValueError("scales must be strictly increasing")

    @classmethod
    def natural(cls, q) -> "ScaleSequence":
        return cls(None, q)

    @classmethod
    def custom(cls, values: Sequence[int]) -> "ScaleSequence":
        return cls(values)

    @property
    def source(self) -> str:
        return "custom" if self.finite else f"natural(q={self.q!r})"

    def __getitem__(self, m: int) -> int:
        if m < 0:
            raise IndexError(m)
        while m >= len(self._values):
            if self.finite:
                raise IndexError(f"toy scale sequence has no ell_{m}")
            nxt = scale_ell(len(self._values), self.q)
            if nxt <= self._values[-1]:
                raise NumericGuardError(f"natural scales stop increasing at m={len(self._values)} for q={self.q}")
            self._values.append(nxt)
        return self._values[m]

    def values(self, upto: int) -> list[int]:
        self[upto]
        return self._values[: upto + 1]

    @property
    def max_level(self) -> int | None:
        """Largest level n whose rectangle the sequence defines (toy only)."""
        return 2 * (len(self._values) - 1) if self.finite else None

    def __repr__(self):
        return f"ScaleSequence({self.source}, known={self._values[:6]}{'...' if len(self._values) > 6 else ''})"


@functools.lru_cache(maxsize=16)
def natural_scales(q: float) -> ScaleSequence:
    return ScaleSequence.natural(q)


@dataclass(frozen=True)
class LevelGeometry:
    """Dimensions of the level-n rectangle and its one-line extension."""

    n: int
    dims: tuple[int, int]
    plus_dims: tuple[int, int]

    @classmethod
    def of(cls, n: int, scales: ScaleSequence) -> "LevelGeometry":
        return cls(n, level_dims(n, scales), plus_dims(n, scales))

    def region(self, offset=(0, 0)) -> Region:
        return Region.rectangle(*self.dims, offset=offset)


def level_dims(n: int, scales: ScaleSequence) -> tuple[int, int]:
    if n < 0:
        raise ValueError("level must be >= 0")
    m = n // 2
    if n % 2 == 0:
        return (scales[m], scales[m])
    return (scales[m + 1], scales[m])


def plus_dims(n: int, scales: ScaleSequence) -> tuple[int, int]:
    m = n // 2
    if n % 2 == 0:
        return (scales[m] + 1, scales[m])
    return (scales[m + 1], scales[m] + 1)


def is_class(dims: Sequence[int], n: int, scales: ScaleSequence) -> bool:
    """Some translate of level n-1 is strictly inside, and dims fit in level n."""
    a1, a2 = (int(d) for d in dims)
    if n == 0:
        return (a1, a2) == (1, 1)
    lo = level_dims(n - 1, scales)
    hi = level_dims(n, scales)
    return lo[0] <= a1 <= hi[0] and lo[1] <= a2 <= hi[1] and (a1, a2) != lo


def class_of(dims: Sequence[int], scales: ScaleSequence, max_level: int = 64) -> int | None:
    for n in range(max_level + 1):
        try:
            if is_class(dims, n, scales):
                return n
        except IndexError:
            return None
    return None


# --------------------------------------------------------------------------
# Traversability events
# --------------------------------------------------------------------------


def _direction(direction: str) -> str:
    d = _ARROWS.get(direction, direction)
    if d not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    return d


def _oriented_lines(infected: np.ndarray, boundary_line_infected: bool, direction: str) -> np.ndarray:
    """Nonempty flags of the lines crossed in order, boundary line last."""
    if direction in ("right", "left"):
        lines = infected.any(axis=1) if infected.size else np.zeros(infected.shape[0], bool)
    else:
        lines = infected.any(axis=0) if infected.size else np.zeros(infected.shape[1], bool)
    if direction in ("left", "down"):
        lines = lines[::-1]
    return np.concatenate((lines, [boundary_line_infected]))


def _boundary_line(region: Region, bc: BoundaryCondition | None, direction: str) -> bool:
    bc = bc or ALL_HEALTHY
    if bc.kind == "healthy":
        return False
    if bc.kind == "infected":
        return True
    padded = bc.padded(region)
    if direction == "right":
        line = padded[-1, 1:-1]
    elif direction == "left":
        line = padded[0, 1:-1]
    elif direction == "up":
        line = padded[1:-1, -1]
    else:
        line = padded[1:-1, 0]
    return bool((line == 0).any())


def is_traversable(R: Region, config: Config, bc: BoundaryCondition | None, direction: str) -> bool:
    """Every pair of consecutive lines of R plus the boundary line ahead holds an infection.

    Empty rectangles are traversable.
    """
    direction = _direction(direction)
    if R.ndim != 2 or R.is_torus:
        raise GeometryError("traversability is defined for 2-d rectangles")
    if config.region.dims != R.dims:
        raise GeometryError("config does not match the rectangle")
    if R.size == 0:
        return True
    flags = _oriented_lines(config.infected, _boundary_line(R, bc, direction), direction)
    return bool((flags[:-1] | flags[1:]).all())


# --------------------------------------------------------------------------
# Traversability probabilities
# --------------------------------------------------------------------------


def _column_probs(b, q):
    """(u, 1-u) for a line of b sites: u = P(line nonempty)."""
    lg = b * math.log1p(-q)
    return -math.expm1(lg), math.exp(lg)


@numba.njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@numba.njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(cache=True, inline="always")
def _dd_scale(x, lo, c):
    """(x + lo) * c in double-double for a plain double c."""
    p, e = _two_prod(x, c)
    e += lo * c
    return _two_sum(p, e)


@numba.njit(cache=True)
def _recursion_log(a, u, w):
    """Linear recursion in double-double, rescaled by exact powers of two.

    Plain doubles drift by ~1e-9 in the log after 1e6 steps; the
    double-double recurrence keeps the error near one ulp of the result.
    Returns (log p_a, log(p_a + r_a)).
    """
    ph, pl = u, 0.0
    rh, rl = w, 0.0
    e2 = 0  # total power-of-two rescaling
    for _ in range(a - 1):
        sh, sl = _two_sum(ph, rh)
        sl += pl + rl
        sh, sl = _two_sum(sh, sl)
        nph, npl = _dd_scale(sh, sl, u)
        rh, rl = _dd_scale(ph, pl, w)
        ph, pl = nph, npl
        if ph + rh < 1e-200:
            m, k = math.frexp(ph + rh)
            f = math.ldexp(1.0, -k)
            ph, pl, rh, rl = ph * f, pl * f, rh * f, rl * f
            e2 += k
    ln2 = math.log(2.0)
    lp = (math.log(ph) + math.log1p(pl / ph) + e2 * ln2) if ph > 0 else -math.inf
    th, tl = _two_sum(ph, rh)
    tl += pl + rl
    return lp, math.log(th) + math.log1p(tl / th) + e2 * ln2


@numba.njit(cache=True)
def _matpow_log(bits, u, w):
    """M**a (1, 0) for M = [[u, u], [w, 0]] by binary powering, kept normalised.

    ``bits`` is the little-endian binary expansion of a.  Returns
    (log p_a, log(p_a + r_a)).
    """
    m00, m01, m10, m11 = u, u, w, 0.0
    lm = 0.0
    v0, v1 = 1.0, 0.0
    lv = 0.0
    for i in range(bits.shape[0]):
        if bits[i]:
            n0 = m00 * v0 + m01 * v1
            n1 = m10 * v0 + m11 * v1
            s = max(abs(n0), abs(n1))
            v0, v1 = n0 / s, n1 / s
            lv += lm + math.log(s)
        # square
        a00 = m00 * m00 + m01 * m10
        a01 = m00 * m01 + m01 * m11
        a10 = m10 * m00 + m11 * m10
        a11 = m10 * m01 + m11 * m11
        s = max(abs(a00), abs(a01), abs(a10), abs(a11))
        m00, m01, m10, m11 = a00 / s, a01 / s, a10 / s, a11 / s
        lm = 2.0 * lm + math.log(s)
    lp = math.log(v0) + lv if v0 > 0 else -math.inf
    return lp, math.log(v0 + v1) + lv


@numba.njit(cache=True)
def _matpow_log_batch(bits, u, w, out1, out0):
    for k in range(bits.shape[0]):
        if w[k] == 0.0:
            out1[k] = 0.0
            out0[k] = 0.0
        else:
            out1[k], out0[k] = _matpow_log(bits[k], u[k], w[k])


def _bits(a: int, nbits: int | None = None) -> np.ndarray:
    nbytes = max(1, (a.bit_length() + 7) // 8) if nbits is None else nbits // 8
    raw = np.frombuffer(int(a).to_bytes(nbytes, "little"), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")


def traversable_prob(a: int, b: int, q, bc="1", method: str = "transfer_matrix", direction: str = "right") -> float:
    """Exact log-probability that R(a, b) is traversable with boundary all-healthy or all-infected.

    ``bc`` is ``"1"``/ALL_HEALTHY or ``"0"``/ALL_INFECTED.  Up/down
    directions swap the roles of a and b.
    """
    q = as_density(q)
    direction = _direction(direction)
    if direction in ("up", "down"):
        a, b = b, a
    a, b = int(a), int(b)
    if a < 0 or b < 0:
        raise ValueError("a and b must be nonnegative")
    if a == 0:
        return 0.0
    if b == 0:
        # lines are empty: only the boundary can help, and only for a = 1
        return 0.0 if (a == 1 and _bc_infected(bc)) else -math.inf
    u, w = _column_probs(b, q)
    healthy = not _bc_infected(bc)
    if w == 0.0:
        return 0.0
    if method == "recursion":
        lp, l0 = _recursion_log(a, u, w)
    elif method == "transfer_matrix":
        lp, l0 = _matpow_log(_bits(a), u, w)
    else:
        raise ValueError(f"unknown method {method!r}")
    return lp if healthy else l0


def _bc_infected(bc) -> bool:
    if isinstance(bc, BoundaryCondition):
        if bc.kind == "explicit":
            raise ValueError("exact probabilities need a symbolic boundary")
        return bc.kind == "infected"
    if str(bc) in ("1", "healthy", "𝟙"):
        return False
    if str(bc) in ("0", "infected", "𝟘"):
        return True
    raise ValueError(f"unknown boundary {bc!r}")


def transfer_matrix(b: int, q) -> np.ndarray:
    """The 2x2 matrix propagating (ends nonempty, ends empty) by one line."""
    u, w = _column_probs(int(b), as_density(q))
    return np.array([[u, u], [w, 0.0]])


# --------------------------------------------------------------------------
# beta and g
# --------------------------------------------------------------------------


def beta_fn(u):
    """beta(u) = (u + sqrt(u (4 - 3u))) / 2, the Perron root of the transfer matrix."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("beta is defined on [0, 1]")
    out = (u + np.sqrt(u * (4 - 3 * u))) / 2
    return float(out) if out.ndim == 0 else out


def g_fn(z):
    """g(z) = -log beta(1 - e^{-z}) for z > 0."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise ValueError("g is defined for z > 0")
    small = z < 1
    out = np.empty_like(z)
    zs = z[small]
    u = -np.expm1(-zs)
    out[small] = -np.log((u + np.sqrt(u * (4 - 3 * u))) / 2)
    v = np.exp(-z[~small])
    # 1 - beta(1 - v) = 2 v^2 / (sqrt(1 + 2v - 3v^2) + 1 + v)
    out[~small] = -np.log1p(-2 * v * v / (np.sqrt(1 + 2 * v - 3 * v * v) + 1 + v))
    return float(out) if out.ndim == 0 else out


def g_integral(z_max: float = 20.0) -> float:
    """Integral of g over (0, inf): quadrature on (0, z_max] plus the tail e^{-2 z_max}/2."""
    pieces = [(0.0, 1e-8), (1e-8, 1e-4), (1e-4, 0.1), (0.1, 1.0), (1.0, 5.0), (5.0, z_max)]
    total = 0.0
    for lo, hi in pieces:
        val, _ = integrate.quad(lambda z: g_fn(z) if z > 0 else 0.0, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-13)
        total += val
    return total + math.exp(-2 * z_max) / 2


def _g_tail(z: float) -> float:
    """Integral of g over [z, inf)."""
    if z >= 20:
        return math.exp(-2 * z) / 2
    val, _ = integrate.quad(g_fn, z, 20.0, limit=200, epsabs=1e-14, epsrel=1e-13)
    return val + math.exp(-40.0) / 2


def qprime(q) -> float:
    return -math.log1p(-as_density(q))


# --------------------------------------------------------------------------
# Super-good recognition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SGWitness:
    """Offsets of the nested cores, top level first.

    ``levels[i]`` is the level of the rectangle whose core offset is
    ``offsets[i]``; ``positions[i]`` is that rectangle's lower-left corner
    (local coordinates of the root rectangle).
    """

    offsets: tuple[int, ...]
    levels: tuple[int, ...] = ()
    positions: tuple[tuple[int, int], ...] = ()

    def verify(self, R: Region, class_n: int, config: Config, bc, scales: ScaleSequence) -> bool:
        return verify_witness(self, R, class_n, config, bc, scales)


def _padded_infected(config: Config, bc: BoundaryCondition | None) -> np.ndarray:
    bc = bc or ALL_HEALTHY
    return (bc.padded(config.region, config.states) == 0).astype(np.int32)


def _prefix(padded: np.ndarray) -> np.ndarray:
    S = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int32)
    S[1:, 1:] = padded.cumsum(0).cumsum(1)
    return S


@numba.njit(cache=True, inline="always")
def _count(S, x0, y0, w, h):
    # rectangle [x0, x0+w) x [y0, y0+h) of the padded array
    return S[x0 + w, y0 + h] - S[x0, y0 + h] - S[x0 + w, y0] + S[x0, y0]


@numba.njit(cache=True)
def _trav(S, x0, y0, w, h, direction, use_bnd):
    """Traversability of the strip at local (x0, y0), size (w, h).

    direction 0 right, 1 left, 2 up, 3 down.  With use_bnd the boundary
    line is read from the padded array, else it is healthy.  Local (x, y)
    is padded (x+1, y+1).
    """
    if w == 0 or h == 0:
        return True
    px = x0 + 1
    py = y0 + 1
    if direction <= 1:
        nlines = w
    else:
        nlines = h
    prev = False
    for k in range(nlines + 1):
        if k < nlines:
            if direction == 0:
                cur = _count(S, px + k, py, 1, h) > 0
            elif direction == 1:
                cur = _count(S, px + w - 1 - k, py, 1, h) > 0
            elif direction == 2:
                cur = _count(S, px, py + k, w, 1) > 0
            else:
                cur = _count(S, px, py + h - 1 - k, w, 1) > 0
        else:
            if not use_bnd:
                cur = False
            elif direction == 0:
                cur = _count(S, px + w, py, 1, h) > 0
            elif direction == 1:
                cur = _count(S, px - 1, py, 1, h) > 0
            elif direction == 2:
                cur = _count(S, px, py + h, w, 1) > 0
            else:
                cur = _count(S, px, py - 1, w, 1) > 0
        if k > 0 and not (prev or cur):
            return False
        prev = cur
    return True


@numba.njit(cache=True)
def _sg_fill(S, W, H, dw, dh, top, table):
    """Fill table[k, x, y] = smallest valid core offset of the 1-SG event on
    level-k rectangle at (x, y), or -1, for every level k < top."""
    for k in range(top):
        w = dw[k]
        h = dh[k]
        for x in range(W - w + 1):
            for y in range(H - h + 1):
                res = -1
                if k == 0:
                    if _count(S, x + 1, y + 1, 1, 1) > 0:
                        res = 0
                elif k % 2 == 0:
                    ch = dh[k - 1]
                    for s in range(h - ch + 1):
                        if table[k - 1, x, y + s] < 0:
                            continue
                        if not _trav(S, x, y, w, s, 3, False):
                            continue
                        if not _trav(S, x, y + s + ch, w, h - ch - s, 2, False):
                            continue
                        res = s
                        break
                else:
                    cw = dw[k - 1]
                    for s in range(w - cw + 1):
                        if table[k - 1, x + s, y] < 0:
                            continue
                        if not _trav(S, x, y, s, h, 1, False):
                            continue
                        if not _trav(S, x + s + cw, y, w - cw - s, h, 0, False):
                            continue
                        res = s
                        break
                table[k, x, y] = res


@numba.njit(cache=True)
def _sg_top(S, W, H, dw, dh, n, table):
    """Smallest offset of the omega-SG event on the whole W x H rectangle of class n."""
    if n == 0:
        return 0 if _count(S, 1, 1, 1, 1) > 0 else -1
    _sg_fill(S, W, H, dw, dh, n, table)
    if n % 2 == 0:
        ch = dh[n - 1]
        for s in range(H - ch + 1):
            if table[n - 1, 0, s] < 0:
                continue
            if _trav(S, 0, 0, W, s, 3, True) and _trav(S, 0, s + ch, W, H - ch - s, 2, True):
                return s
    else:
        cw = dw[n - 1]
        for s in range(W - cw + 1):
            if table[n - 1, s, 0] < 0:
                continue
            if _trav(S, 0, 0, s, H, 1, True) and _trav(S, s + cw, 0, W - cw - s, H, 0, True):
                return s
    return -1


@numba.njit(cache=True)
def _sg_batch(states, W, H, dw, dh, n, pad_template):
    """Top offsets for a batch of configs sharing one padded boundary template."""
    B = states.shape[0]
    out = np.empty(B, np.int64)
    P = pad_template.copy()
    S = np.zeros((W + 3, H + 3), np.int32)
    table = np.empty((max(n, 1), W + 1, H + 1), np.int64)
    for b in range(B):
        for x in range(W):
            for y in range(H):
                P[x + 1, y + 1] = states[b, x, y]
        for x in range(W + 2):
            for y in range(H + 2):
                S[x + 1, y + 1] = S[x, y + 1] + S[x + 1, y] - S[x, y] + P[x, y]
        out[b] = _sg_top(S, W, H, dw, dh, n, table)
    return out


def _level_arrays(n: int, scales: ScaleSequence):
    dims = [level_dims(k, scales) for k in range(max(n, 1))]
    dw = np.array([d[0] for d in dims], dtype=np.int64)
    dh = np.array([d[1] for d in dims], dtype=np.int64)
    return dw, dh


def _check_class(R: Region, class_n: int, scales: ScaleSequence):
    if R.ndim != 2 or R.is_torus:
        raise GeometryError("super-good events live on 2-d rectangles")
    if not is_class(R.dims, class_n, scales):
        raise GeometryError(f"rectangle {R.dims} is not of class {class_n} for {scales}")


def is_supergood(R: Region, class_n: int, config: Config, bc: BoundaryCondition | None, scales: ScaleSequence) -> SGWitness | None:
    """Recognise the omega-super-good event on a class-n rectangle.

    Cores are always checked with healthy boundary; only the strips of the
    top level see ``bc``.  Returns the lexicographically smallest witness or
    ``None``.
    """
    _check_class(R, class_n, scales)
    if config.region.dims != R.dims:
        raise GeometryError("config does not match the rectangle")
    W, H = R.dims
    S = _prefix(_padded_infected(config, bc))
    dw, dh = _level_arrays(class_n, scales)
    table = np.empty((max(class_n, 1), W + 1, H + 1), np.int64)
    s = _sg_top(S, W, H, dw, dh, class_n, table)
    if s < 0:
        return None
    offsets, levels, positions = [s], [class_n], [(0, 0)]
    pos = (0, s) if class_n % 2 == 0 else (s, 0)
    for k in range(class_n - 1, 0, -1):
        sk = int(table[k, pos[0], pos[1]])
        offsets.append(sk)
        levels.append(k)
        positions.append(pos)
        pos = (pos[0], pos[1] + sk) if k % 2 == 0 else (pos[0] + sk, pos[1])
    if class_n == 0:
        return SGWitness((0,), (0,), ((0, 0),))
    return SGWitness(tuple(offsets), tuple(levels), tuple(positions))


def supergood_batch(states: np.ndarray, class_n: int, bc: BoundaryCondition | None, scales: ScaleSequence) -> np.ndarray:
    """Vector of SG indicators for a stack of state arrays ``(B, W, H)`` (1 = healthy)."""
    states = np.asarray(states)
    B, W, H = states.shape
    R = Region.rectangle(W, H)
    _check_class(R, class_n, scales)
    template = _padded_infected(Config.all_healthy(R), bc)
    dw, dh = _level_arrays(class_n, scales)
    infected = (states == 0).astype(np.int32)
    return _sg_batch(infected, W, H, dw, dh, class_n, template) >= 0


def verify_witness(w: SGWitness, R: Region, class_n: int, config: Config, bc, scales: ScaleSequence) -> bool:
    """Replay a witness: every strip along the path is traversable and the final site infected."""
    _check_class(R, class_n, scales)
    if len(w.offsets) != max(class_n, 1):
        return False
    W, H = R.dims
    S = _prefix(_padded_infected(config, bc))
    x, y = 0, 0
    w_cur, h_cur = W, H
    for i, s in enumerate(w.offsets):
        k = class_n - i
        if k == 0:
            break
        use_bnd = i == 0
        cw, ch = level_dims(k - 1, scales)
        if k % 2 == 0:
            if not 0 <= s <= h_cur - ch:
                return False
            if not (_trav(S, x, y, w_cur, s, 3, use_bnd) and _trav(S, x, y + s + ch, w_cur, h_cur - ch - s, 2, use_bnd)):
                return False
            y += s
        else:
            if not 0 <= s <= w_cur - cw:
                return False
            if not (_trav(S, x, y, s, h_cur, 1, use_bnd) and _trav(S, x + s + cw, y, w_cur - cw - s, h_cur, 0, use_bnd)):
                return False
            x += s
        w_cur, h_cur = cw, ch
    return bool(config.infected[x, y])


def is_mobile_droplet(config: Config, q=None, scales: ScaleSequence | None = None) -> bool:
    """Super-good (healthy boundary) on the final-scale square.

    With ``scales`` a toy sequence, the final level is its largest square.
    """
    if scales is None:
        scales = natural_scales(as_density(q))
        n = 2 * n_final(q)
    else:
        n = scales.max_level if scales.finite else 2 * n_final(scales.q)
    dims = level_dims(n, scales)
    if config.region.dims != dims:
        raise GeometryError(f"mobile droplets live on {dims}, got {config.region.dims}")
    R = Region.rectangle(*dims, offset=config.region.offset)
    return is_supergood(R, n, config, ALL_HEALTHY, scales) is not None


# --------------------------------------------------------------------------
# Shrunken super-good
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShrunkenSGWitness:
    s1: int
    s2: int
    m: int
    ell_prev: int

    def segment_I1(self, offset=(0, 0)) -> Region:
        """Column left of R at the core rows."""
        return Region.rectangle(1, self.ell_prev, offset=(offset[0] - 1, offset[1] + self.s2))

    def segment_I3(self, width: int, offset=(0, 0)) -> Region:
        """Column right of R at the core rows."""
        return Region.rectangle(1, self.ell_prev, offset=(offset[0] + width, offset[1] + self.s2))


def _shrunken_m(R: Region, scales: ScaleSequence) -> int:
    a1, a2 = R.dims
    m = 1
    while True:
        try:
            ell = scales[m]
        except IndexError:
            break
        if (a1, a2) == (ell - 1, ell):
            return m
        if ell > a2:
            break
        m += 1
    raise GeometryError(f"{R.dims} is not of the form (ell_m - 1, ell_m)")


def shrunken_candidates(config: Config, scales: ScaleSequence):
    """All (s1, s2) for which the shrunken event holds, in lexicographic order."""
    R = config.region
    m = _shrunken_m(R, scales)
    lm, lp = scales[m], scales[m - 1]
    S = _prefix(_padded_infected(config, ALL_HEALTHY))
    n_core = 2 * m - 2
    dw, dh = _level_arrays(n_core + 1, scales)
    W, H = R.dims
    table = np.empty((n_core + 1, W + 1, H + 1), np.int64)
    _sg_fill(S, W, H, dw, dh, n_core + 1, table)
    out = []
    for s1 in range(lm - lp):
        for s2 in range(lm - lp + 1):
            if table[n_core, s1, s2] < 0:
                continue
            if not _trav(S, 0, s2, s1, lp, 1, False):
                continue
            if not _trav(S, s1 + lp, s2, lm - lp - 1 - s1, lp, 0, False):
                continue
            if not _trav(S, 0, 0, lm - 1, s2, 3, False):
                continue
            if not _trav(S, 0, s2 + lp, lm - 1, lm - lp - s2, 2, False):
                continue
            out.append(ShrunkenSGWitness(s1, s2, m, lp))
    return out


def is_shrunken_supergood(R: Region, config: Config, scales: ScaleSequence) -> ShrunkenSGWitness | None:
    """Shrunken super-good event on R = R(ell_m - 1, ell_m) + x; first witness or None."""
    if config.region.dims != R.dims:
        raise GeometryError("config does not match the rectangle")
    _shrunken_m(R, scales)
    found = shrunken_candidates(config, scales)
    return found[0] if found else None


# --------------------------------------------------------------------------
# Product lower bound on the super-good probability
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SGBound:
    """Pieces of the product lower bound at density q."""

    q: float
    N: int
    log_prob: float
    ell: list = field(repr=False)
    log_factors: np.ndarray = field(repr=False)  # shape (N, 2): T(a, ell_m), T(a, ell_{m-1})

    @property
    def r(self) -> float:
        return -qprime(self.q) * self.log_prob


def _bound_factors(q: float, ell: list[int]):
    N = len(ell) - 1
    a = [ell[m] - ell[m - 1] for m in range(1, N + 1)]
    nbits = max(8, ((max(a).bit_length() + 7) // 8) * 8)
    bits = np.stack([_bits(x, nbits) for x in a]) if N else np.zeros((0, nbits), np.uint8)
    lq = math.log1p(-q)
    out = np.empty((N, 2))
    for col, bs in enumerate((ell[1:], ell[:-1])):
        bf = np.array([float(b) for b in bs])
        w = np.exp(bf * lq)
        u = -np.expm1(bf * lq)
        o1 = np.empty(N)
        o0 = np.empty(N)
        _matpow_log_batch(bits, u, w, o1, o0)
        out[:, col] = o1
    return a, out


def sg_prob_lower_bound(q, detail: bool = False):
    """log of q * prod_m T1(ell_m - ell_{m-1}, ell_m) T1(ell_m - ell_{m-1}, ell_{m-1})."""
    q = as_density(q)
    N = n_final(q)
    scales = natural_scales(q)
    ell = scales.values(N)
    _, factors = _bound_factors(q, ell)
    logp = math.log(q) + float(factors.sum())
    if detail:
        return SGBound(q, N, logp, ell, factors)
    return logp


def riemann_sums(q) -> tuple[float, float, float]:
    """(lower sum, integral of g over [q' ell_0, q' ell_N], upper sum)."""
    q = as_density(q)
    qp = qprime(q)
    N = n_final(q)
    ell = natural_scales(q).values(N)
    lf = np.array([float(x) for x in ell])
    da = np.array([float(ell[m] - ell[m - 1]) for m in range(1, N + 1)])
    lower = qp * float(np.sum(da * g_fn(qp * lf[1:])))
    upper = qp * float(np.sum(da * g_fn(qp * lf[:-1])))
    integral = _g_tail(qp * lf[0]) - _g_tail(qp * lf[-1])
    return lower, integral, upper


# --------------------------------------------------------------------------
# Environment events
# --------------------------------------------------------------------------


def env_good_box(Q: Region, config: Config) -> bool:
    """Every row and every column of Q contains an infected site."""
    if config.region.dims != Q.dims:
        raise GeometryError("config does not match the box")
    inf = config.infected
    return bool(inf.any(axis=1).all() and inf.any(axis=0).all())


def env_event(boxes: Sequence[Region], config: Config, scales: ScaleSequence, level: int | None = None) -> bool:
    """Some box is super-good (healthy boundary) and every box is good.

    ``boxes`` must tile the torus carrying ``config``; boxes are level-n
    squares (``level`` defaults to the class of the first box).
    """
    torus = config.region
    if not torus.is_torus:
        raise GeometryError("environment events live on a torus")
    cover = np.zeros(torus.dims, dtype=np.int64)
    for B in boxes:
        if B.is_torus or not all(0 <= o and o + d <= L for o, d, L in zip(B.offset, B.dims, torus.dims)):
            raise GeometryError(f"box {B} does not fit the torus")
        cover[tuple(slice(o, o + d) for o, d in zip(B.offset, B.dims))] += 1
    if not (cover == 1).all():
        raise GeometryError("boxes do not tile the torus")
    states = config.states
    any_sg = False
    for B in boxes:
        sub = Config(Region.rectangle(*B.dims), states[tuple(slice(o, o + d) for o, d in zip(B.offset, B.dims))])
        if not env_good_box(sub.region, sub):
            return False
        if not any_sg:
            n = level if level is not None else class_of(B.dims, scales)
            if n is not None and is_supergood(sub.region, n, sub, ALL_HEALTHY, scales) is not None:
                any_sg = True
    return any_sg


# --------------------------------------------------------------------------
# Fixtures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Fixture:
    config: Config
    scales: ScaleSequence
    level: int
    bc: BoundaryCondition
    expected: tuple | None
    meta: dict


def _bc_from_meta(spec, region: Region) -> BoundaryCondition:
    if spec in ("1", "healthy"):
        return ALL_HEALTHY
    if spec in ("0", "infected"):
        return ALL_INFECTED
    if isinstance(spec, dict):
        return BoundaryCondition.from_sides(region, **{k: np.array(v, dtype=np.uint8) for k, v in spec.items()})
    raise ValueError(f"bad boundary spec {spec!r}")


def load_fixture(path) -> Fixture:
    """Matrix text config plus a JSON sidecar (``scales``, ``level``, ``bc``, ``expected_witness``)."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    config = Config.from_text(path.read_text())
    exp = meta.get("expected_witness")
    return Fixture(
        config,
        ScaleSequence.custom(meta["scales"]),
        int(meta["level"]),
        _bc_from_meta(meta.get("bc", "1"), config.region),
        None if exp is None else tuple(exp),
        meta,
    )
