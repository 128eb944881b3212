"""Brute-force reference implementations.

These are written independently of the fast paths (plain enumeration and
numpy truth tables, no shared helpers beyond scale lookup) and serve as
oracles in the test and acceptance suites.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def all_configs(w: int, h: int) -> np.ndarray:
    """Infected indicators of every configuration of a w x h box, shape (2**(w*h), w, h).

    Row k of the flattened box is bit k of the enumeration index (x-major,
    matching numpy ravel order); a set bit means healthy.
    """
    n = w * h
    if n == 0:
        return np.zeros((1, w, h), dtype=bool)
    idx = np.arange(2**n, dtype=np.int64)
    healthy = (idx[:, None] >> np.arange(n)) & 1
    return (healthy == 0).reshape(-1, w, h)


def _pairs_ok(lines: list, ahead) -> np.ndarray:
    """All consecutive pairs of (lines..., ahead) contain an infection."""
    seq = list(lines) + [ahead]
    ok = True
    for a, b in zip(seq[:-1], seq[1:]):
        ok = ok & (a | b)
    return ok


def traversable_truth(X: np.ndarray, direction: str, ahead_infected: bool) -> np.ndarray:
    """Traversability of the whole box for every configuration in X (K, w, h)."""
    K, w, h = X.shape
    if direction in ("right", "left"):
        lines = [X[:, i, :].any(axis=1) for i in range(w)]
    else:
        lines = [X[:, :, j].any(axis=1) for j in range(h)]
    if direction in ("left", "down"):
        lines = lines[::-1]
    ahead = np.full(K, bool(ahead_infected))
    if not lines:
        return np.ones(K, bool)
    return _pairs_ok(lines, ahead)


def traversable_prob_enum(a: int, b: int, q, bc_infected: bool, direction: str = "right"):
    """P(traversable) of R(a, b) by summing the product measure over all 2**(ab) configs.

    With a Fraction q the result is exact.
    """
    X = all_configs(a, b)
    ok = traversable_truth(X, direction, bc_infected)
    k = X.reshape(len(X), -1).sum(axis=1)
    if isinstance(q, Fraction):
        return sum((q ** int(i) * (1 - q) ** (a * b - int(i)) for i, good in zip(k, ok) if good), Fraction(0))
    q = float(q)
    return float(np.sum(np.where(ok, q**k * (1 - q) ** (a * b - k), 0.0)))


# --------------------------------------------------------------------------
# Super-good reference (truth tables)
# --------------------------------------------------------------------------


def _level_shape(n: int, ell) -> tuple[int, int]:
    if n % 2 == 0:
        return ell[n // 2], ell[n // 2]
    return ell[(n + 1) // 2], ell[(n - 1) // 2]


class SupergoodTruthTable:
    """Every configuration of a box at once; events are boolean vectors over configs."""

    def __init__(self, X: np.ndarray, ell):
        self.X = X
        self.ell = list(ell)
        self._memo = {}

    def line_col(self, x, y0, y1):
        return self.X[:, x, y0:y1].any(axis=1)

    def line_row(self, y, x0, x1):
        return self.X[:, x0:x1, y].any(axis=1)

    def sg(self, x0: int, y0: int, n: int, omega=None) -> np.ndarray:
        """SG of the level-n box at (x0, y0); omega maps side -> infected flag of the outer line.

        omega=None means all-healthy and is memoised.
        """
        key = (x0, y0, n)
        if omega is None and key in self._memo:
            return self._memo[key]
        K = self.X.shape[0]
        if n == 0:
            out = self.X[:, x0, y0].copy()
        else:
            w, h = _level_shape(n, self.ell)
            cw, ch = _level_shape(n - 1, self.ell)
            om = omega or {}
            out = np.zeros(K, bool)
            if n % 2 == 0:
                for s in range(h - ch + 1):
                    core = self.sg(x0, y0 + s, n - 1)
                    below = [self.line_row(y, x0, x0 + w) for y in range(y0 + s - 1, y0 - 1, -1)]
                    above = [self.line_row(y, x0, x0 + w) for y in range(y0 + s + ch, y0 + h)]
                    down = _pairs_ok(below, np.full(K, om.get("down", False))) if below else np.ones(K, bool)
                    up = _pairs_ok(above, np.full(K, om.get("up", False))) if above else np.ones(K, bool)
                    out |= core & down & up
            else:
                for s in range(w - cw + 1):
                    core = self.sg(x0 + s, y0, n - 1)
                    left = [self.line_col(x, y0, y0 + h) for x in range(x0 + s - 1, x0 - 1, -1)]
                    right = [self.line_col(x, y0, y0 + h) for x in range(x0 + s + cw, x0 + w)]
                    lt = _pairs_ok(left, np.full(K, om.get("left", False))) if left else np.ones(K, bool)
                    rt = _pairs_ok(right, np.full(K, om.get("right", False))) if right else np.ones(K, bool)
                    out |= core & lt & rt
        if omega is None:
            self._memo[key] = out
        return out


def supergood_reference(n: int, ell, padded=None) -> np.ndarray:
    """SG indicator over all configs of Lambda^(n) (enumeration order of :func:`all_configs`).

    ``padded`` is the (w+2, h+2) state array whose outer ring is the
    boundary condition (0 infected); None means all-healthy.
    """
    w, h = _level_shape(n, ell)
    table = SupergoodTruthTable(all_configs(w, h), ell)
    omega = None
    if padded is not None:
        P = np.asarray(padded)
        omega = {
            "left": bool((P[0, 1:-1] == 0).any()),
            "right": bool((P[-1, 1:-1] == 0).any()),
            "down": bool((P[1:-1, 0] == 0).any()),
            "up": bool((P[1:-1, -1] == 0).any()),
        }
    return table.sg(0, 0, n, omega)


# --------------------------------------------------------------------------
# Small chains built by explicit loops
# --------------------------------------------------------------------------


def fa_generator_loops(j: int, dims, torus: bool, q: float, boundary_infected: bool = False) -> np.ndarray:
    """Dense generator of FA-jf by explicit neighbour loops (states indexed by healthy bits)."""
    w, h = dims
    n = w * h
    Q = np.zeros((2**n, 2**n))

    def site(x, y):
        return x * h + y

    for s in range(2**n):
        healthy = [(s >> k) & 1 for k in range(n)]
        for x in range(w):
            for y in range(h):
                nbs = set()
                cnt = 0
                for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    u, v = x + dx, y + dy
                    if torus:
                        u, v = u % w, v % h
                        if (u, v) == (x, y) or (u, v) in nbs:
                            continue
                        nbs.add((u, v))
                        cnt += 1 - healthy[site(u, v)]
                    elif 0 <= u < w and 0 <= v < h:
                        cnt += 1 - healthy[site(u, v)]
                    else:
                        cnt += int(boundary_infected)
                if cnt >= j:
                    k = site(x, y)
                    t = s ^ (1 << k)
                    Q[s, t] += q if healthy[k] else 1 - q
    Q -= np.diag(Q.sum(axis=1))
    return Q


def reversible_gap_dense(Q: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of -Q for a reversible generator (dense)."""
    s = np.sqrt(mu)
    A = -(s[:, None] * Q / s[None, :])
    return np.linalg.eigvalsh((A + A.T) / 2)


def product_measure_bits(n: int, q: float) -> np.ndarray:
    idx = np.arange(2**n)
    h = np.array([bin(i).count("1") for i in idx])
    return q ** (n - h) * (1 - q) ** h


def cbsep_generator_loops(n_vertices: int, edges, p: float):
    """Binary CBSEP by loops: returns (states, Q, mu) over nonempty configurations."""
    states = [s for s in itertools.product((0, 1), repeat=n_vertices) if any(s)]
    index = {s: i for i, s in enumerate(states)}
    Z = 1 - (1 - p) ** 2
    law = {(a, b): (p if a else 1 - p) * (p if b else 1 - p) / Z for a in (0, 1) for b in (0, 1) if a or b}
    Q = np.zeros((len(states), len(states)))
    for s in states:
        for u, v in edges:
            if not (s[u] or s[v]):
                continue
            for (a, b), pr in law.items():
                t = list(s)
                t[u], t[v] = a, b
                t = tuple(t)
                if t != s:
                    Q[index[s], index[t]] += pr
    Q -= np.diag(Q.sum(axis=1))
    mu = np.array([math.prod(p if x else 1 - p for x in s) for s in states])
    return states, Q, mu / mu.sum()
