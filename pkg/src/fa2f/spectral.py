"""Exact finite-state machinery for constrained reversible chains.

Chains are stored as sparse triplets over an enumerated state space with a
reversible measure.  Weights may be floats or :class:`fractions.Fraction`
(exact detailed balance and lumpability checks).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .errors import GeometryError, HypothesisViolation, NumericGuardError, ReducibleChainError, SiteCapError
from .lattice import ALL_HEALTHY, BoundaryCondition, Config, Region, neighbour_table

EXHAUSTIVE_CAP = 20
"""Default maximal number of sites for exhaustive state spaces."""

DENSE_LIMIT = 4096


# --------------------------------------------------------------------------
# Chains
# --------------------------------------------------------------------------


@dataclass
class FiniteChainSpec:
    """Continuous-time chain: ``rates[k]`` is the rate from ``rows[k]`` to ``cols[k]``."""

    states: list
    measure: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        keep = self.rows != self.cols
        self.rows, self.cols = self.rows[keep], self.cols[keep]
        self.rates = np.asarray(self.rates)[keep]
        if len(self.states) != len(self.measure):
            raise ValueError("one measure weight per state")

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def exact(self) -> bool:
        return self.measure.dtype == object

    @classmethod
    def from_dict(cls, states, measure, rates: dict, meta=None) -> "FiniteChainSpec":
        """Build from ``{(i, j): rate}`` with integer state indices."""
        items = [(i, j, r) for (i, j), r in rates.items() if r != 0 and i != j]
        exact = any(isinstance(r, Fraction) for *_, r in items) or any(isinstance(m, Fraction) for m in measure)
        dtype = object if exact else float
        rows = np.array([i for i, _, _ in items], dtype=np.int64)
        cols = np.array([j for _, j, _ in items], dtype=np.int64)
        vals = np.array([r for *_, r in items], dtype=dtype)
        return cls(list(states), np.array(list(measure), dtype=dtype), rows, cols, vals, dict(meta or {}))

    def float_measure(self) -> np.ndarray:
        return np.array([float(m) for m in self.measure]) if self.exact else np.asarray(self.measure, float)

    def float_rates(self) -> np.ndarray:
        return np.array([float(r) for r in self.rates]) if self.exact else np.asarray(self.rates, float)

    def rate_matrix(self) -> sp.csr_matrix:
        n = self.size
        return sp.csr_matrix((self.float_rates(), (self.rows, self.cols)), shape=(n, n))

    def generator(self, dense: bool = False):
        """Q with off-diagonal rates and rows summing to zero."""
        R = self.rate_matrix()
        L = R - sp.diags(np.asarray(R.sum(axis=1)).ravel())
        return L.toarray() if dense else L.tocsr()

    def rate_dict(self) -> dict:
        out: dict = {}
        for i, j, r in zip(self.rows.tolist(), self.cols.tolist(), self.rates.tolist()):
            out[(i, j)] = out.get((i, j), 0) + r
        return out

    def detailed_balance_residual(self):
        """max |mu_i r_ij - mu_j r_ji|; an exact ``Fraction`` for exact chains."""
        if self.exact:
            d = self.rate_dict()
            worst = Fraction(0)
            for (i, j), r in d.items():
                diff = abs(self.measure[i] * r - self.measure[j] * d.get((j, i), 0))
                worst = max(worst, diff)
            return worst
        mu = self.float_measure()
        F = sp.diags(mu) @ self.rate_matrix()
        D = (F - F.T).tocoo()
        return float(np.abs(D.data).max()) if D.nnz else 0.0

    def check_detailed_balance(self, tol: float = 1e-12) -> bool:
        res = self.detailed_balance_residual()
        return res == 0 if self.exact else res <= tol * max(1.0, float(self.float_rates().max(initial=0.0)))

    def components(self) -> list[list[int]]:
        n = self.size
        adj = sp.csr_matrix((np.ones(len(self.rows)), (self.rows, self.cols)), shape=(n, n))
        k, labels = csgraph.connected_components(adj, directed=True, connection="strong")
        return [np.flatnonzero(labels == c).tolist() for c in range(k)]

    def relabel(self, perm: Sequence[int]) -> "FiniteChainSpec":
        """State ``i`` becomes state ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        states = [self.states[i] for i in inv]
        return FiniteChainSpec(states, self.measure[inv], perm[self.rows], perm[self.cols], self.rates.copy(), dict(self.meta))

    def scaled(self, factor) -> "FiniteChainSpec":
        return FiniteChainSpec(list(self.states), self.measure.copy(), self.rows.copy(), self.cols.copy(), self.rates * factor, dict(self.meta))

    def restricted(self, mask: np.ndarray) -> "FiniteChainSpec":
        """Reflected chain on the states in ``mask`` (moves leaving it are dropped)."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("empty restricted state space")
        new = -np.ones(self.size, dtype=np.int64)
        new[mask] = np.arange(mask.sum())
        keep = mask[self.rows] & mask[self.cols]
        mu = self.measure[mask]
        mu = mu / sum(mu) if self.exact else mu / mu.sum()
        states = [s for s, m in zip(self.states, mask) if m]
        return FiniteChainSpec(states, mu, new[self.rows[keep]], new[self.cols[keep]], self.rates[keep], dict(self.meta))


def _symmetrised(chain: FiniteChainSpec):
    mu = chain.float_measure()
    s = np.sqrt(mu)
    R = chain.rate_matrix()
    out = np.asarray(R.sum(axis=1)).ravel()
    # -L conjugated by mu^{1/2}: D - S R S^{-1}
    A = sp.diags(out) - sp.diags(s) @ R @ sp.diags(1 / s)
    A = (A + A.T) * 0.5
    return A.tocsr()


def spectrum(chain: FiniteChainSpec) -> np.ndarray:
    """Eigenvalues of -L (ascending), dense; the chain may be reducible."""
    if chain.size > DENSE_LIMIT:
        raise SiteCapError("full spectrum is dense-only")
    return np.linalg.eigvalsh(_symmetrised(chain).toarray())


def spectral_gap(chain: FiniteChainSpec) -> float:
    """Second-smallest eigenvalue of -L; the chain must be irreducible."""
    comps = chain.components()
    if len(comps) > 1:
        raise ReducibleChainError(f"chain has {len(comps)} communicating classes", [[chain.states[i] for i in c] for c in comps])
    n = chain.size
    if n == 1:
        return math.inf
    A = _symmetrised(chain)
    if n <= DENSE_LIMIT:
        ev = np.linalg.eigvalsh(A.toarray())
        return float(ev[1])
    # Lanczos on c*I - A with the constant mode (mu^{1/2}) deflated; c bounds the spectrum
    v = np.sqrt(chain.float_measure())
    v /= np.linalg.norm(v)
    c = 2.0 * float(A.diagonal().max())

    def matvec(x):
        x = x - v * (v @ x)
        y = c * x - A @ x
        return y - v * (v @ y)

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = np.ones(n) - v * v.sum()
    top = spla.eigsh(op, k=1, which="LA", return_eigenvectors=False, tol=1e-12, maxiter=100 * n, v0=v0)
    return float(c - top[0])


def relaxation_time(chain: FiniteChainSpec) -> float:
    """Inverse spectral gap of a reversible irreducible chain (0 for a single state)."""
    gap = spectral_gap(chain)
    return 0.0 if math.isinf(gap) else 1.0 / gap


def transient_distribution(chain: FiniteChainSpec, init, t: float) -> np.ndarray:
    """Law at time t from an initial law (or state index), via the matrix exponential."""
    p0 = np.zeros(chain.size)
    if np.ndim(init) == 0:
        p0[int(init)] = 1.0
    else:
        p0[:] = init
    return sla.expm(t * chain.generator(dense=True)).T @ p0


def dump_chain(chain: FiniteChainSpec, path) -> None:
    """Sparse triplet text: header, measure block, then ``i j rate`` lines."""
    with open(path, "w") as fh:
        fh.write(f"# states {chain.size} transitions {len(chain.rows)}\n")
        for m in chain.measure:
            fh.write(f"{m}\n" if chain.exact else f"{float(m)!r}\n")
        for i, j, r in zip(chain.rows.tolist(), chain.cols.tolist(), chain.rates.tolist()):
            fh.write(f"{i} {j} {r if chain.exact else repr(float(r))}\n")


def load_chain(path) -> FiniteChainSpec:
    lines = open(path).read().splitlines()
    head = lines[0].split()
    n, t = int(head[2]), int(head[4])
    conv = Fraction if any("/" in ln for ln in lines[1 : 1 + n + t]) else float
    measure = [conv(x) for x in lines[1 : 1 + n]]
    trip = [ln.split() for ln in lines[1 + n : 1 + n + t]]
    dtype = object if conv is Fraction else float
    return FiniteChainSpec(
        list(range(n)),
        np.array(measure, dtype=dtype),
        np.array([int(a) for a, _, _ in trip], dtype=np.int64),
        np.array([int(b) for _, b, _ in trip], dtype=np.int64),
        np.array([conv(c) for *_, c in trip], dtype=dtype),
    )


# --------------------------------------------------------------------------
# FA chains
# --------------------------------------------------------------------------


def _site_bits(n: int) -> np.ndarray:
    """(2**n, n) array: bit k of state index i is the state of flat site k (1 healthy)."""
    idx = np.arange(2**n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _weights(q, healthy_counts: np.ndarray, n: int):
    if isinstance(q, Fraction):
        return np.array([q ** (n - int(h)) * (1 - q) ** int(h) for h in healthy_counts], dtype=object)
    return q ** (n - healthy_counts.astype(float)) * (1 - q) ** healthy_counts.astype(float)


def constraint_matrix(j: int, R: Region, bc, n_sites_cap: int = EXHAUSTIVE_CAP) -> np.ndarray:
    """(2**n, n) boolean: constraint at site k satisfied in state i."""
    n = R.size
    if n > n_sites_cap:
        raise SiteCapError(f"{n} sites exceed the exhaustive cap {n_sites_cap}")
    bits = _site_bits(n)
    table = neighbour_table(R, None if R.is_torus else (bc or ALL_HEALTHY))
    ext = np.concatenate([1 - bits, np.zeros((2**n, 1), np.uint8), np.ones((2**n, 1), np.uint8)], axis=1)
    return ext[:, table].sum(axis=2) >= j


def _fa_from_constraints(cons: np.ndarray, q, n: int, restriction=None, meta=None) -> FiniteChainSpec:
    N = 2**n
    bits = _site_bits(n)
    exact = isinstance(q, Fraction)
    measure = _weights(q, bits.sum(axis=1), n)
    si, sk = np.nonzero(cons)
    targets = si ^ (1 << sk)
    healthy_now = bits[si, sk] == 1
    if exact:
        rates = np.array([q if h else 1 - q for h in healthy_now], dtype=object)
    else:
        rates = np.where(healthy_now, q, 1 - q).astype(float)
    chain = FiniteChainSpec(list(range(N)), measure, si, targets, rates, dict(meta or {}))
    if restriction is not None:
        mask = _event_mask(restriction, N, (meta or {}).get("region"))
        chain = chain.restricted(mask)
    return chain


def _event_mask(restriction, N: int, region: Region | None) -> np.ndarray:
    if callable(restriction):
        return np.array([bool(restriction(Config.from_index(region, i))) for i in range(N)])
    arr = np.asarray(restriction)
    if arr.dtype == bool and arr.shape == (N,):
        return arr
    mask = np.zeros(N, bool)
    mask[arr.astype(np.int64)] = True
    return mask


def build_fa_chain(j: int, R: Region, bc: BoundaryCondition | None, q, restriction=None, cap: int = EXHAUSTIVE_CAP) -> FiniteChainSpec:
    """Heat-bath FA-jf chain on all configurations of R.

    States are indexed by bit patterns (bit k = state of flat site k).  At a
    site whose constraint holds, the chain moves to infected at rate q and to
    healthy at rate 1-q.  ``restriction`` (predicate on Config, boolean mask
    or index list) reflects the chain on an event.
    """
    cons = constraint_matrix(j, R, bc, cap)
    q = q if isinstance(q, Fraction) else float(q)
    return _fa_from_constraints(cons, q, R.size, restriction, {"region": R, "j": j})


# --------------------------------------------------------------------------
# gamma: best constant of the event-conditioned Poincare inequality
# --------------------------------------------------------------------------


class InfiniteGammaError(NumericGuardError):
    """Some function has zero Dirichlet form but positive conditional variance."""


def _gamma_forms(cons: np.ndarray, event: np.ndarray, q: float):
    """Edge list and weights of the Dirichlet form B, plus the conditional law on the event."""
    n = cons.shape[1]
    N = cons.shape[0]
    bits = _site_bits(n)
    mu = _weights(float(q), bits.sum(axis=1), n)
    pi = np.where(event, mu, 0.0)
    Z = pi.sum()
    if Z == 0:
        raise ValueError("empty event")
    pi = pi / Z
    # each edge {s, s^x} with s holding healthy at x, once
    si, sk = np.nonzero(cons & (bits == 1))
    ti = si ^ (1 << sk)
    w = q * (1 - q) * (pi[si] + pi[ti])
    keep = w > 0
    return si[keep], ti[keep], w[keep], pi


def _laplacian(si, ti, w, N):
    W = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([si, ti]), np.concatenate([ti, si]))), shape=(N, N)).tocsr()
    return (sp.diags(np.asarray(W.sum(axis=1)).ravel()) - W).tocsr()


def gamma_dense(cons: np.ndarray, event: np.ndarray, q: float) -> float:
    """Generalised eigenproblem over all functions on the full space (dense)."""
    N = cons.shape[0]
    if N > DENSE_LIMIT:
        raise SiteCapError("dense gamma limited to 4096 states")
    si, ti, w, pi = _gamma_forms(cons, event, q)
    B = _laplacian(si, ti, w, N).toarray()
    A = np.diag(pi) - np.outer(pi, pi)
    # kernel of B: functions constant on the components of the weighted graph
    adj = sp.coo_matrix((np.ones(len(si)), (si, ti)), shape=(N, N))
    k, labels = csgraph.connected_components(adj, directed=False)
    Zk = np.zeros((N, k))
    Zk[np.arange(N), labels] = 1.0
    Zk /= np.linalg.norm(Zk, axis=0)
    leak = np.abs(A @ Zk).max()
    if leak > 1e-12 * max(1.0, np.abs(A).max()):
        raise InfiniteGammaError("conditional variance does not vanish on the kernel of the Dirichlet form")
    if k == N:
        return 1.0
    Q = sla.null_space(Zk.T)
    Bq = Q.T @ B @ Q
    Aq = Q.T @ A @ Q
    ev = sla.eigh(Aq, (Bq + Bq.T) / 2, eigvals_only=True)
    return max(1.0, float(ev.max()))


def gamma_schur(cons: np.ndarray, event: np.ndarray, q: float) -> float:
    """Eliminate off-event states (Kron reduction) and take the relaxation time of the effective chain."""
    N = cons.shape[0]
    si, ti, w, pi = _gamma_forms(cons, event, q)
    S = np.flatnonzero(event)
    if len(S) == 1:
        return 1.0
    adj = sp.coo_matrix((np.ones(len(si)), (si, ti)), shape=(N, N))
    _, labels = csgraph.connected_components(adj, directed=False)
    live = np.isin(labels, np.unique(labels[S]))
    O = np.flatnonzero(live & ~event)
    L = _laplacian(si, ti, w, N)
    Lss = L[S][:, S]
    if len(O):
        # off-event states only touch the event (their mutual edges have zero weight),
        # so the eliminated block is diagonal
        Loo = L[O][:, O]
        if Loo.nnz != len(O) or abs(Loo - sp.diags(Loo.diagonal())).max() > 0:
            raise NumericGuardError("off-event block is not diagonal")
        Leff = Lss - L[S][:, O] @ sp.diags(1.0 / Loo.diagonal()) @ L[O][:, S]
    else:
        Leff = Lss
    Weff = (-Leff).tocoo()
    keep = (Weff.row != Weff.col) & (Weff.data > 1e-15 * max(1.0, Weff.data.max(initial=0.0)))
    r, c, v = Weff.row[keep], Weff.col[keep], Weff.data[keep]
    piS = pi[S]
    chain = FiniteChainSpec(S.tolist(), piS, r, c, v / piS[r])
    try:
        return max(1.0, relaxation_time(chain))
    except ReducibleChainError as err:
        raise InfiniteGammaError(str(err)) from err


def gamma(R: Region, bc: BoundaryCondition | None, q, scales, class_n: int | None = None, method: str = "auto") -> float:
    """Best constant C >= 1 of the super-good-conditioned FA-2f Poincare inequality on R."""
    from .droplet import class_of, supergood_batch

    if R.size > EXHAUSTIVE_CAP:
        raise SiteCapError(f"{R.size} sites exceed the exhaustive cap")
    n = class_n if class_n is not None else class_of(R.dims, scales)
    if n is None:
        raise GeometryError(f"{R.dims} has no class for {scales}")
    bits = _site_bits(R.size)
    states = bits.reshape((-1,) + R.dims)
    event = supergood_batch(states, n, bc, scales)
    if not event.any():
        raise ValueError("empty super-good event")
    cons = constraint_matrix(2, R, bc)
    if method == "auto":
        method = "dense" if 2**R.size <= 1024 else "schur"
    if method == "dense":
        return gamma_dense(cons, event, float(q))
    if method == "schur":
        return gamma_schur(cons, event, float(q))
    raise ValueError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# FA-1f forms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FA1fResult:
    t_rel: float
    exponent: float


def _sites_of(shape) -> list[tuple[int, int]]:
    if isinstance(shape, Region):
        return list(shape.sites())
    return sorted({tuple(int(c) for c in s) for s in shape})


def is_connected(sites) -> bool:
    sites = set(sites)
    if not sites:
        return False
    start = next(iter(sites))
    seen = {start}
    stack = [start]
    while stack:
        x, y = stack.pop()
        for nb in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if nb in sites and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(sites)


def fa1f_chain(shape, q, variant: str = "ergodic", z=None) -> FiniteChainSpec:
    """FA-1f on a connected set: on all non-healthy states, or with site z unconstrained."""
    sites = _sites_of(shape)
    if not is_connected(sites):
        raise GeometryError("FA-1f forms need a connected set")
    n = len(sites)
    pos = {s: k for k, s in enumerate(sites)}
    bits = _site_bits(n)
    infected = 1 - bits
    cons = np.zeros((2**n, n), bool)
    for s, k in pos.items():
        nbs = [pos[t] for t in ((s[0] + 1, s[1]), (s[0] - 1, s[1]), (s[0], s[1] + 1), (s[0], s[1] - 1)) if t in pos]
        cons[:, k] = infected[:, nbs].any(axis=1) if nbs else False
    q = q if isinstance(q, Fraction) else float(q)
    if variant == "ergodic":
        chain = _fa_from_constraints(cons, q, n)
        return chain.restricted(np.arange(2**n) != 2**n - 1)
    if variant == "boundary":
        zk = pos[tuple(z)] if z is not None else 0
        cons[:, zk] = True
        return _fa_from_constraints(cons, q, n)
    raise ValueError(f"unknown variant {variant!r}")


def fa1f_poincare_check(shape, q, variant: str = "ergodic", z=None) -> FA1fResult:
    """Relaxation time of the FA-1f form and the exponent log T_rel / log(1/q)."""
    chain = fa1f_chain(shape, q, variant, z)
    t = max(relaxation_time(chain), 1.0) if chain.size > 1 else 1.0
    return FA1fResult(t, math.log(t) / math.log(1 / float(q)))


def connected_subsets(side: int = 3) -> list[frozenset]:
    """All connected subsets of the side x side box, normalised so min x = min y = 0, deduplicated."""
    cells = [(x, y) for x in range(side) for y in range(side)]
    seen = set()
    for r in range(1, len(cells) + 1):
        for combo in itertools.combinations(cells, r):
            if not is_connected(combo):
                continue
            mx = min(c[0] for c in combo)
            my = min(c[1] for c in combo)
            seen.add(frozenset((x - mx, y - my) for x, y in combo))
    return sorted(seen, key=lambda s: (len(s), sorted(s)))


# --------------------------------------------------------------------------
# Block chains
# --------------------------------------------------------------------------


def _normalise(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p / p.sum()


def product_chain(spaces: Sequence[np.ndarray], moves: Callable, support: np.ndarray | None = None, meta=None) -> FiniteChainSpec:
    """Chain on (a subset of) a product space.

    ``moves(state_tuple)`` yields ``(target_tuple, rate)`` pairs.  The
    measure is the product measure restricted to ``support`` (boolean array
    over the product).
    """
    dims = tuple(len(p) for p in spaces)
    prod = np.ones(dims)
    for k, p in enumerate(spaces):
        shape = [1] * len(dims)
        shape[k] = len(p)
        prod = prod * np.asarray(p, float).reshape(shape)
    if support is None:
        support = np.ones(dims, bool)
    states = [tuple(int(i) for i in s) for s in zip(*np.nonzero(support))]
    if not states:
        raise ValueError("empty state space")
    index = {s: k for k, s in enumerate(states)}
    rates: dict = {}
    for s in states:
        for t, r in moves(s):
            t = tuple(int(i) for i in t)
            if t == s or r == 0:
                continue
            if t not in index:
                raise ValueError(f"move {s} -> {t} leaves the state space")
            key = (index[s], index[t])
            rates[key] = rates.get(key, 0.0) + r
    mu = np.array([prod[s] for s in states])
    return FiniteChainSpec.from_dict(states, mu / mu.sum(), rates, meta)


@dataclass(frozen=True)
class TwoBlockReport:
    max_ratio: float
    violations: int
    ratios: list


def two_block_trel(p1, p2, H) -> tuple[float, float]:
    """Exact T_rel of the two-block chain and the bound 2 / P(X1 in H)."""
    p1, p2 = _normalise(p1), _normalise(p2)
    H = np.asarray(H, bool)
    PH = float(p1[H].sum())
    if PH == 0:
        raise ValueError("P(H) = 0")

    def moves(s):
        a, b = s
        for a2 in range(len(p1)):
            yield (a2, b), p1[a2]
        if H[a]:
            for b2 in range(len(p2)):
                yield (a, b2), p2[b2]

    chain = product_chain([p1, p2], moves)
    return relaxation_time(chain), 2.0 / PH


def two_block_check(sizes=(6, 6), H=None, trials: int = 100, rng=None) -> TwoBlockReport:
    """Random two-block instances: exact T_rel against 2 / P(H)."""
    gen = np.random.default_rng(rng)
    ratios = []
    for _ in range(trials):
        n1 = int(gen.integers(1, sizes[0] + 1))
        n2 = int(gen.integers(1, sizes[1] + 1))
        p1, p2 = gen.random(n1) + 0.05, gen.random(n2) + 0.05
        h = gen.random(n1) < 0.5 if H is None else np.asarray(H, bool)
        if not h.any():
            h[int(gen.integers(n1))] = True
        t, bound = two_block_trel(p1, p2, h)
        ratios.append(t / bound)
    return TwoBlockReport(max(ratios), sum(r > 1 + 1e-12 for r in ratios), ratios)


@dataclass(frozen=True)
class AuxResult:
    t_rel: float
    t_aux: float

    @property
    def ratio(self) -> float:
        return self.t_rel / self.t_aux


def _mass2(pa, pb, ev) -> float:
    return float((np.outer(pa, pb) * ev).sum())


def aux_chain_1(spaces, A1, A3, B12: dict, B23: dict, F12, F23, check: bool = True) -> AuxResult:
    """First auxiliary block chain on H u K and its T_aux.

    ``B12[w3]`` (n1 x n2 bool) is given for w3 in A3, ``B23[w1]`` (n2 x n3
    bool) for w1 in A1; F12, F23 are boolean matrices.
    """
    p1, p2, p3 = (_normalise(p) for p in spaces)
    n1, n2, n3 = len(p1), len(p2), len(p3)
    A1 = np.asarray(A1, bool)
    A3 = np.asarray(A3, bool)
    F12 = np.asarray(F12, bool)
    F23 = np.asarray(F23, bool)
    empty12 = np.zeros((n1, n2), bool)
    empty23 = np.zeros((n2, n3), bool)
    b12 = [np.asarray(B12.get(w, empty12), bool) if A3[w] else empty12 for w in range(n3)]
    b23 = [np.asarray(B23.get(w, empty23), bool) if A1[w] else empty23 for w in range(n1)]
    Hs = np.zeros((n1, n2, n3), bool)
    Ks = np.zeros((n1, n2, n3), bool)
    for w3 in range(n3):
        Hs[:, :, w3] = b12[w3]
    for w1 in range(n1):
        Ks[w1] = b23[w1]
    if check:
        HK = Hs & Ks
        h1 = F12[:, :, None] & A3[None, None, :]
        h2 = F23[None, :, :] & A1[:, None, None]
        if (h1 & ~HK).any():
            raise HypothesisViolation("hypothesis on F12 fails")
        if (h2 & ~HK).any():
            raise HypothesisViolation("hypothesis on F23 fails")
        if not F12.any() or not F23.any():
            raise HypothesisViolation("F events must be nonempty")
    support = Hs | Ks
    if not support.any():
        raise ValueError("H u K is empty")

    def moves(s):
        a, b, c = s
        if Hs[a, b, c]:
            ev = b12[c]
            Z = _mass2(p1, p2, ev)
            for a2, b2 in zip(*np.nonzero(ev)):
                yield (a2, b2, c), p1[a2] * p2[b2] / Z
        if Ks[a, b, c]:
            ev = b23[a]
            Z = _mass2(p2, p3, ev)
            for b2, c2 in zip(*np.nonzero(ev)):
                yield (a, b2, c2), p2[b2] * p3[c2] / Z

    chain = product_chain([p1, p2, p3], moves, support)
    t = max(relaxation_time(chain), 0.0)
    pF12 = _mass2(p1, p2, F12)
    pF23 = _mass2(p2, p3, F23)
    m12 = max((_mass2(p1, p2, b12[w]) / pF12 for w in range(n3) if A3[w]), default=0.0)
    m23 = max((_mass2(p2, p3, b23[w]) / pF23 for w in range(n1) if A1[w]), default=0.0)
    return AuxResult(t, m12**2 * m23)


def aux_chain_2(spaces, A1, A3, C12, C23, C12_hat, A3_family: dict, check: bool = True) -> AuxResult:
    """Second auxiliary block chain on M u N and its T_aux.

    ``A3_family[(w1, w2)]`` (bool over Omega_3) is given for (w1, w2) in C12_hat.
    """
    p1, p2, p3 = (_normalise(p) for p in spaces)
    n1, n2, n3 = len(p1), len(p2), len(p3)
    A1 = np.asarray(A1, bool)
    A3 = np.asarray(A3, bool)
    C12 = np.asarray(C12, bool)
    C23 = np.asarray(C23, bool)
    Ch = np.asarray(C12_hat, bool)
    M = C12[:, :, None] & A3[None, None, :]
    Nn = C23[None, :, :] & A1[:, None, None]
    if check:
        if (Ch & ~C12).any():
            raise HypothesisViolation("C12_hat is not inside C12")
        if not Ch.any():
            raise HypothesisViolation("C12_hat is empty")
        for a, b in zip(*np.nonzero(Ch)):
            fam = np.asarray(A3_family[(int(a), int(b))], bool)
            if not fam.any() or (fam & ~A3).any():
                raise HypothesisViolation(f"A3 family at {(int(a), int(b))} is empty or not inside A3")
            if (fam & ~(M[a, b] & Nn[a, b])).any():
                raise HypothesisViolation(f"inclusion into M and N fails at {(int(a), int(b))}")
    support = M | Nn
    if not support.any():
        raise ValueError("M u N is empty")
    pC12 = _mass2(p1, p2, C12)
    pC23 = _mass2(p2, p3, C23)
    pA1 = float(p1[A1].sum())
    pA3 = float(p3[A3].sum())

    def moves(s):
        a, b, c = s
        if M[a, b, c]:
            for a2, b2 in zip(*np.nonzero(C12)):
                yield (a2, b2, c), p1[a2] * p2[b2] / pC12
            for c2 in np.flatnonzero(A3):
                yield (a, b, c2), p3[c2] / pA3
        if Nn[a, b, c]:
            for b2, c2 in zip(*np.nonzero(C23)):
                yield (a, b2, c2), p2[b2] * p3[c2] / pC23
            for a2 in np.flatnonzero(A1):
                yield (a2, b, c), p1[a2] / pA1

    chain = product_chain([p1, p2, p3], moves, support)
    t = relaxation_time(chain)
    worst = max(pA3 / float(p3[np.asarray(A3_family[(int(a), int(b))], bool)].sum()) for a, b in zip(*np.nonzero(Ch)))
    return AuxResult(t, worst * pC12 / _mass2(p1, p2, Ch))


def random_aux1_instance(gen: np.random.Generator, max_size: int = 4):
    """Random instance satisfying both hypotheses of the first block chain."""
    n1, n2, n3 = (int(x) for x in gen.integers(1, max_size + 1, size=3))
    spaces = [gen.random(k) + 0.05 for k in (n1, n2, n3)]
    A1 = gen.random(n1) < 0.6
    A3 = gen.random(n3) < 0.6
    A1[int(gen.integers(n1))] = True
    A3[int(gen.integers(n3))] = True
    F12 = (gen.random((n1, n2)) < 0.4) & A1[:, None]
    F23 = (gen.random((n2, n3)) < 0.4) & A3[None, :]
    if not F12.any():
        F12[int(gen.choice(np.flatnonzero(A1))), int(gen.integers(n2))] = True
    if not F23.any():
        F23[int(gen.integers(n2)), int(gen.choice(np.flatnonzero(A3)))] = True
    B12 = {}
    for w3 in np.flatnonzero(A3):
        forced = A1[:, None] & F23[None, :, w3]
        B12[int(w3)] = F12 | forced | (gen.random((n1, n2)) < 0.3)
    B23 = {}
    for w1 in np.flatnonzero(A1):
        forced = F12[w1][:, None] & A3[None, :]
        B23[int(w1)] = F23 | forced | (gen.random((n2, n3)) < 0.3)
    return dict(spaces=spaces, A1=A1, A3=A3, B12=B12, B23=B23, F12=F12, F23=F23)


def random_aux2_instance(gen: np.random.Generator, max_size: int = 4):
    """Random instance satisfying the hypothesis of the second block chain."""
    while True:
        n1, n2, n3 = (int(x) for x in gen.integers(1, max_size + 1, size=3))
        spaces = [gen.random(k) + 0.05 for k in (n1, n2, n3)]
        A1 = gen.random(n1) < 0.6
        A3 = gen.random(n3) < 0.6
        A1[int(gen.integers(n1))] = True
        A3[int(gen.integers(n3))] = True
        C12 = gen.random((n1, n2)) < 0.5
        C23 = gen.random((n2, n3)) < 0.5
        cand = {}
        for a, b in zip(*np.nonzero(C12)):
            if not A1[a]:
                continue
            ok = A3 & C23[b]
            if ok.any() and gen.random() < 0.7:
                sub = ok & (gen.random(n3) < 0.7)
                if not sub.any():
                    sub[int(gen.choice(np.flatnonzero(ok)))] = True
                cand[(int(a), int(b))] = sub
        if cand:
            Ch = np.zeros((n1, n2), bool)
            for a, b in cand:
                Ch[a, b] = True
            return dict(spaces=spaces, A1=A1, A3=A3, C12=C12, C23=C23, C12_hat=Ch, A3_family=cand)


# --------------------------------------------------------------------------
# Lumpability
# --------------------------------------------------------------------------


@dataclass
class LumpResult:
    lumpable: bool
    residual: object
    lumped: FiniteChainSpec | None

    def __bool__(self):
        return self.lumpable


def lumpability_check(chain: FiniteChainSpec, projection: Callable[[Hashable], Hashable] | Sequence) -> LumpResult:
    """Strong lumpability: equal total rate into every other class from all members of a class."""
    labels = [projection(s) for s in chain.states] if callable(projection) else list(projection)
    classes = sorted(set(labels), key=repr)
    cidx = {c: k for k, c in enumerate(classes)}
    lab = np.array([cidx[l] for l in labels])
    zero = Fraction(0) if chain.exact else 0.0
    out = [dict() for _ in range(chain.size)]
    for i, j, r in zip(chain.rows.tolist(), chain.cols.tolist(), chain.rates.tolist()):
        cj = lab[j]
        if cj != lab[i]:
            out[i][cj] = out[i].get(cj, zero) + r
    residual = zero
    agg: dict = {}
    for c in range(len(classes)):
        members = np.flatnonzero(lab == c)
        ref = out[members[0]]
        for m in members[1:]:
            keys = set(ref) | set(out[m])
            for k in keys:
                residual = max(residual, abs(ref.get(k, zero) - out[m].get(k, zero)))
        for k, r in ref.items():
            agg[(c, k)] = r
    mu = [sum((chain.measure[i] for i in np.flatnonzero(lab == c)), zero) for c in range(len(classes))]
    lumped = FiniteChainSpec.from_dict(classes, mu, agg, {"lumped_from": chain.meta})
    ok = residual == 0 if chain.exact else residual <= 1e-12
    return LumpResult(bool(ok), residual, lumped)
