import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fa2f.errors import GeometryError, SiteCapError
from fa2f.lattice import (
    ALL_HEALTHY,
    ALL_INFECTED,
    SITE_CAP,
    BoundaryCondition,
    Config,
    Density,
    Region,
    SeededRng,
    boundary_sites,
    compose,
    constraint,
    infected_neighbour_counts,
    neighbour_table,
    replica_seeds,
    sample_config,
)


def brute_count(region, bc, cfg, x):
    """Infected neighbours of x by walking the four directions."""
    n = 0
    for axis in range(region.ndim):
        for step in (-1, 1):
            y = list(x)
            y[axis] += step
            if region.is_torus:
                y[axis] %= region.dims[axis]
            if region.contains(y):
                n += int(cfg.state(y) == 0)
            else:
                n += int(bc.value(region, y) == 0)
    return n


# -- regions and configs ------------------------------------------------------


def test_region_validation():
    with pytest.raises(GeometryError):
        Region.rectangle()
    with pytest.raises(GeometryError):
        Region.torus(0, 3)
    with pytest.raises(GeometryError):
        Region.rectangle(2, 2, offset=(1,))
    assert SITE_CAP >= 2**26
    with pytest.raises(SiteCapError):
        Region.rectangle(SITE_CAP + 1)


def test_region_box_and_translate():
    V = Region.box((-2, -2), (2, 2))
    assert V.dims == (5, 5) and V.offset == (-2, -2)
    assert V.contains((0, 0)) and not V.contains((3, 0))
    W = V.translate((1, 0))
    assert W.contains((3, 0))
    assert len(V.boundary_adjacent()) == 16


def test_density():
    d = Density(0.3)
    assert d.qprime == pytest.approx(-math.log(0.7))
    assert d.qprime > d.q
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            Density(bad)


def test_config_packing_is_small():
    R = Region.rectangle(10**4, 10**4)
    cfg = Config.all_healthy(R)
    assert cfg.nbytes <= 16 * 2**20


@given(st.integers(1, 5), st.integers(1, 5), st.data())
@settings(max_examples=50, deadline=None)
def test_text_and_binary_roundtrip(w, h, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=w * h, max_size=w * h))
    off = data.draw(st.tuples(st.integers(-3, 3), st.integers(-3, 3)))
    cfg = Config(Region.rectangle(w, h, offset=off), np.array(bits, dtype=np.uint8).reshape(w, h))
    assert Config.from_bytes(cfg.to_bytes()) == cfg
    back = Config.from_text(cfg.to_text(), offset=off)
    assert back == cfg


def test_binary_header_is_16_bytes():
    cfg = Config.all_infected(Region.rectangle(3, 2))
    blob = cfg.to_bytes()
    assert blob[:2] == b"FA"
    # header, two int32 offsets, first state, one run
    assert len(blob) == 16 + 8 + 1 + 1


def test_text_orientation():
    cfg = Config.from_text("#.\n..\n")
    # top line is the highest row
    assert cfg.state((0, 1)) == 1 and cfg.state((1, 1)) == 0 and cfg.state((0, 0)) == 0


def test_index_roundtrip():
    R = Region.rectangle(3, 2)
    for k in range(64):
        assert Config.from_index(R, k).to_index() == k


# -- sampling -----------------------------------------------------------------


def test_sample_tiny_q_all_healthy():
    cfg = sample_config(Region.rectangle(10, 10), 1e-300, SeededRng(1))
    assert cfg.n_infected() == 0


def test_sample_deterministic():
    R = Region.rectangle(17, 9)
    assert sample_config(R, 0.3, SeededRng(5, 2)) == sample_config(R, 0.3, SeededRng(5, 2))
    assert sample_config(R, 0.3, SeededRng(5, 2)) != sample_config(R, 0.3, SeededRng(5, 3))


def test_sample_fraction_million_sites():
    cfg = sample_config(Region.rectangle(1000, 1000), 0.3, SeededRng(7))
    frac = cfg.n_infected() / 10**6
    assert abs(frac - 0.3) <= 4 * math.sqrt(0.3 * 0.7 / 10**6)


def test_sample_fraction_over_seeds():
    n, q = 400, 0.3
    tol = 4 * math.sqrt(q * (1 - q) / n)
    bad = sum(abs(sample_config(Region.rectangle(20, 20), q, SeededRng(s)).n_infected() / n - q) > tol for s in range(200))
    assert bad < 2  # fewer than 1% of 200 seeds


def test_replica_seeds_prefix_stable():
    a = replica_seeds(SeededRng(3), 10)
    b = replica_seeds(SeededRng(3), 25)
    assert np.array_equal(a, b[:10])


# -- constraint ---------------------------------------------------------------


def test_constraint_examples():
    R = Region.rectangle(3, 3)
    H = Config.all_healthy(R)
    assert not any(constraint(1, R, ALL_HEALTHY, H, x) for x in R.sites())
    cfg = Config.from_infected(R, [(0, 1), (2, 1)])
    assert constraint(2, R, ALL_HEALTHY, cfg, (1, 1))
    R2 = Region.rectangle(2, 2)
    assert constraint(2, R2, ALL_INFECTED, Config.all_healthy(R2), (0, 0))
    with pytest.raises(GeometryError):
        constraint(1, R, ALL_HEALTHY, H, (3, 0))


def test_torus_neighbours_deduplicated():
    # a side of length 2 reaches the same neighbour both ways; it counts once
    R = Region.torus(2, 3)
    cfg = Config.from_infected(R, [(1, 0)])
    assert infected_neighbour_counts(R, None, cfg)[0, 0] == 1
    assert neighbour_table(R).shape == (6, 4)


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_counts_match_brute_force(data):
    w = data.draw(st.integers(1, 4))
    h = data.draw(st.integers(1, 4))
    torus = data.draw(st.booleans())
    R = Region.torus(w, h) if torus else Region.rectangle(w, h)
    bits = data.draw(st.lists(st.integers(0, 1), min_size=w * h, max_size=w * h))
    cfg = Config(R, np.array(bits, dtype=np.uint8).reshape(w, h))
    bc = None
    if not torus:
        pad = np.array(data.draw(st.lists(st.integers(0, 1), min_size=(w + 2) * (h + 2), max_size=(w + 2) * (h + 2))), dtype=np.uint8)
        bc = BoundaryCondition.from_padded(pad.reshape(w + 2, h + 2))
    counts = infected_neighbour_counts(R, bc, cfg)
    for x in R.sites():
        if torus:
            # deduplicated: distinct neighbour sites only
            nbs = set()
            for axis in range(2):
                for step in (-1, 1):
                    y = list(x)
                    y[axis] = (y[axis] + step) % R.dims[axis]
                    if tuple(y) != x:
                        nbs.add(tuple(y))
            want = sum(cfg.state(y) == 0 for y in nbs)
        else:
            want = brute_count(R, bc, cfg, x)
        assert counts[x] == want


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_constraint_monotone(data):
    R = Region.rectangle(4, 3)
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=12, max_size=12)), dtype=np.uint8).reshape(4, 3)
    cfg = Config(R, bits)
    extra = data.draw(st.sampled_from(list(R.sites())))
    more = cfg.with_states([extra], 0)
    j = data.draw(st.integers(1, 4))
    for x in R.sites():
        if constraint(j, R, ALL_HEALTHY, cfg, x):
            assert constraint(j, R, ALL_HEALTHY, more, x)
        # infected boundary dominates healthy boundary
        assert constraint(j, R, ALL_INFECTED, cfg, x) >= constraint(j, R, ALL_HEALTHY, cfg, x)


def test_boundary_sites():
    R = Region.rectangle(2, 3, offset=(5, 5))
    bs = boundary_sites(R)
    assert len(bs) == 2 * 2 + 2 * 3
    assert all(not R.contains(s) for s in bs)


def test_explicit_bc_shape_checked():
    bc = BoundaryCondition.random(Region.rectangle(3, 3), 0.5, SeededRng(1))
    with pytest.raises(GeometryError):
        bc.padded(Region.rectangle(2, 2))


# -- compose ------------------------------------------------------------------


def test_compose_identity_and_columns():
    R = Region.rectangle(2, 3)
    cfg = sample_config(R, 0.5, SeededRng(11))
    assert compose([(R, cfg)]) == cfg
    A = Region.rectangle(1, 3)
    B = Region.rectangle(1, 3, offset=(1, 0))
    ca, cb = Config.from_infected(A, [(0, 1)]), Config.from_infected(B, [(1, 2)])
    whole = compose([(A, ca), (B, cb)])
    assert whole.region.dims == (2, 3)
    assert whole.restrict(A) == ca and whole.restrict(B) == cb


def test_compose_order_independent_and_overlap():
    parts = [Region.rectangle(1, 2, offset=(k, 0)) for k in range(3)]
    cfgs = [sample_config(p, 0.5, SeededRng(20 + k)) for k, p in enumerate(parts)]
    pairs = list(zip(parts, cfgs))
    assert compose(pairs) == compose(pairs[::-1]) == compose([pairs[1], pairs[2], pairs[0]])
    with pytest.raises(GeometryError):
        compose([(parts[0], cfgs[0]), (parts[0], cfgs[0])])


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_compose_restriction_roundtrip(w1, w2, h, seed):
    A = Region.rectangle(w1, h)
    B = Region.rectangle(w2, h, offset=(w1, 0))
    ca, cb = sample_config(A, 0.4, SeededRng(seed)), sample_config(B, 0.4, SeededRng(seed, 1))
    whole = compose([(B, cb), (A, ca)])
    assert whole.restrict(A) == ca and whole.restrict(B) == cb
