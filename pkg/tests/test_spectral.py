import math
from fractions import Fraction

import numpy as np
import pytest

from fa2f import oracles, pins, spectral
from fa2f.droplet import ScaleSequence
from fa2f.errors import HypothesisViolation, ReducibleChainError, SiteCapError
from fa2f.lattice import ALL_HEALTHY, ALL_INFECTED, Region
from fa2f.spectral import FiniteChainSpec, build_fa_chain, relaxation_time, spectral_gap

TOY = ScaleSequence.custom([1, 2, 4])


def test_two_state_chain():
    for a, b in ((1.0, 1.0), (0.3, 2.0), (5.0, 0.01)):
        ch = FiniteChainSpec.from_dict([0, 1], [b / (a + b), a / (a + b)], {(0, 1): a, (1, 0): b})
        assert relaxation_time(ch) == pytest.approx(1 / (a + b), rel=1e-13)


def test_complete_resample_gap_one():
    mu = np.array([0.1, 0.2, 0.3, 0.4])
    rates = {(i, j): mu[j] for i in range(4) for j in range(4) if i != j}
    ch = FiniteChainSpec.from_dict(range(4), mu, rates)
    assert ch.check_detailed_balance()
    assert spectral_gap(ch) == pytest.approx(1.0, abs=1e-13)
    assert spectral.spectrum(ch)[0] == pytest.approx(0.0, abs=1e-13)


def test_single_state_chain():
    ch = FiniteChainSpec.from_dict([0], [1.0], {})
    assert relaxation_time(ch) == 0.0


def test_reducible_chain_reports_components():
    R = Region.rectangle(2, 2)
    ch = build_fa_chain(2, R, ALL_HEALTHY, 0.3)
    with pytest.raises(ReducibleChainError) as err:
        relaxation_time(ch)
    assert len(err.value.components) > 1


def test_fa_torus_spectrum_regression(frozen):
    ch = build_fa_chain(2, Region.torus(2, 2), None, 0.3)
    ev = spectral.spectrum(ch)
    assert np.allclose(ev, frozen["fa2f_torus2x2_q0.3_spectrum"], atol=1e-12)


@pytest.mark.parametrize("dims,torus,infected", [((3, 2), False, True), ((2, 2), True, False), ((4, 2), False, True)])
def test_fa_chain_matches_loop_oracle(dims, torus, infected):
    q = 0.35
    R = Region.torus(*dims) if torus else Region.rectangle(*dims)
    bc = None if torus else (ALL_INFECTED if infected else ALL_HEALTHY)
    ch = build_fa_chain(2, R, bc, q)
    Q = oracles.fa_generator_loops(2, dims, torus, q, infected)
    assert np.allclose(ch.generator(dense=True), Q, atol=1e-15)
    mu = oracles.product_measure_bits(R.size, q)
    assert np.allclose(ch.float_measure(), mu)
    if len(ch.components()) == 1:
        ev = oracles.reversible_gap_dense(Q, mu)
        assert spectral_gap(ch) == pytest.approx(ev[1], rel=1e-10)


def test_fa_chain_exact_detailed_balance():
    ch = build_fa_chain(2, Region.rectangle(3, 2), ALL_INFECTED, Fraction(1, 3))
    assert ch.exact
    assert ch.detailed_balance_residual() == 0
    assert sum(ch.measure) == 1


def test_lanczos_route_matches_dense(monkeypatch):
    ch = build_fa_chain(2, Region.rectangle(4, 3), ALL_INFECTED, 0.4)
    dense = spectral_gap(ch)
    monkeypatch.setattr(spectral, "DENSE_LIMIT", 16)
    assert spectral_gap(ch) == pytest.approx(dense, rel=1e-9)


def test_site_cap():
    with pytest.raises(SiteCapError):
        build_fa_chain(2, Region.rectangle(5, 5), ALL_HEALTHY, 0.3)


def test_transient_distribution_tends_to_measure():
    ch = build_fa_chain(1, Region.rectangle(2, 2), ALL_INFECTED, 0.4)
    p = spectral.transient_distribution(ch, 0, 200.0)
    assert np.allclose(p, ch.float_measure(), atol=1e-10)


def test_dump_load_roundtrip(tmp_path):
    for q in (Fraction(2, 7), 0.3):
        ch = build_fa_chain(2, Region.rectangle(2, 2), ALL_INFECTED, q)
        p = tmp_path / f"c{ch.exact}.txt"
        spectral.dump_chain(ch, p)
        back = spectral.load_chain(p)
        assert back.exact == ch.exact
        assert list(back.measure) == list(ch.measure)
        assert back.rate_dict() == ch.rate_dict()


def test_relabel_and_scale():
    ch = build_fa_chain(1, Region.torus(2, 2), None, 0.3).restricted(np.arange(16) != 15)
    perm = np.random.default_rng(1).permutation(ch.size)
    assert spectral_gap(ch.relabel(perm)) == pytest.approx(spectral_gap(ch), rel=1e-12)
    assert spectral_gap(ch.scaled(3.0)) == pytest.approx(3 * spectral_gap(ch), rel=1e-12)


# -- gamma --------------------------------------------------------------------


def test_gamma_toy_values(frozen):
    R = Region.rectangle(2, 2)
    for bc, key in ((ALL_HEALTHY, "bc1"), (ALL_INFECTED, "bc0")):
        d = spectral.gamma(R, bc, 0.5, TOY, method="dense")
        s = spectral.gamma(R, bc, 0.5, TOY, method="schur")
        assert d == pytest.approx(frozen[f"gamma_toy2x2_q0.5_{key}"], rel=1e-10)
        assert d == pytest.approx(s, rel=1e-10)


@pytest.mark.parametrize("q", [0.2, 0.5, 0.8])
def test_gamma_routes_agree_level3(q):
    R = Region.rectangle(4, 2)
    for bc in (ALL_HEALTHY, ALL_INFECTED):
        d = spectral.gamma(R, bc, q, TOY, method="dense")
        s = spectral.gamma(R, bc, q, TOY, method="schur")
        assert math.isfinite(d) and d >= 1.0
        assert d == pytest.approx(s, rel=1e-9)


# -- FA-1f --------------------------------------------------------------------


def test_fa1f_path2(frozen):
    res = spectral.fa1f_poincare_check([(0, 0), (1, 0)], 0.3)
    assert res.t_rel == pytest.approx(frozen["fa1f_path2_q0.3_trel"], rel=1e-12)
    assert res.t_rel == pytest.approx(10 / 3, rel=1e-12)


def test_fa1f_boundary_variant_single_site():
    # an unconstrained lone site resamples at rate one
    assert spectral.fa1f_poincare_check([(0, 0)], 0.3, "boundary").t_rel == pytest.approx(1.0)


def test_connected_subsets_count():
    subs = spectral.connected_subsets(3)
    # fixed polyominoes fitting a 3x3 box, up to translation
    assert len(subs) == len(set(subs))
    assert sum(len(s) == 1 for s in subs) == 1 and sum(len(s) == 2 for s in subs) == 2
    assert sum(len(s) == 9 for s in subs) == 1


def test_fa1f_exponents_stable(frozen):
    """Max exponent over shapes with >= 2 sites changes by at most a factor 3 across q."""
    subs = [s for s in spectral.connected_subsets(3) if len(s) >= 2]
    for q, (lo, hi) in frozen["fa1f_shape_exponent_range_multi"].items():
        per_shape = []
        for s in subs:
            e = max(spectral.fa1f_poincare_check(s, float(q), "ergodic").exponent, max(spectral.fa1f_poincare_check(s, float(q), "boundary", z=z).exponent for z in s))
            per_shape.append(e)
        assert min(per_shape) == pytest.approx(lo, rel=1e-9)
        assert max(per_shape) == pytest.approx(hi, rel=1e-9)
        assert hi / lo <= 3
        assert hi <= pins.FA1F_EXPONENT_CAP


# -- block chains -------------------------------------------------------------


def test_two_block_examples():
    t, bound = spectral.two_block_trel([1, 1], [1, 1], [True, True])
    assert t <= bound
    rep = spectral.two_block_check(trials=50, rng=3)
    assert rep.violations == 0 and rep.max_ratio <= 1


def test_aux1_bound_random():
    gen = np.random.default_rng(21)
    worst = 0.0
    for _ in range(150):
        inst = spectral.random_aux1_instance(gen)
        res = spectral.aux_chain_1(**inst)
        worst = max(worst, res.ratio)
    assert worst <= pins.C_AUX1


def test_aux2_bound_random():
    gen = np.random.default_rng(22)
    worst = 0.0
    for _ in range(150):
        res = spectral.aux_chain_2(**spectral.random_aux2_instance(gen))
        worst = max(worst, res.ratio)
    assert worst <= pins.C_AUX2


def test_aux_hypothesis_violations():
    gen = np.random.default_rng(23)
    inst = spectral.random_aux1_instance(gen)
    a, b = np.argwhere(inst["F12"])[0]
    w3 = int(np.flatnonzero(inst["A3"])[0])
    inst["B12"][w3] = inst["B12"][w3].copy()
    inst["B12"][w3][a, b] = False
    # and drop the K side so (a, b, w3) is in neither event
    for w1 in list(inst["B23"]):
        inst["B23"][w1] = inst["B23"][w1] & False
    with pytest.raises(HypothesisViolation):
        spectral.aux_chain_1(**inst)
    inst2 = spectral.random_aux2_instance(np.random.default_rng(24))
    inst2["C12_hat"] = inst2["C12_hat"] | ~inst2["C12"]
    if (~inst2["C12"]).any():
        with pytest.raises(HypothesisViolation):
            spectral.aux_chain_2(**inst2)


# -- lumpability --------------------------------------------------------------


def test_lumpability_identity_and_symmetry():
    ch = build_fa_chain(1, Region.torus(3, 1), None, Fraction(1, 3)).restricted(np.arange(8) != 7)
    assert spectral.lumpability_check(ch, lambda s: s)
    # rotation classes of the ring
    def orbit(s):
        bits = [(s >> k) & 1 for k in range(3)]
        return min(tuple(bits[k:] + bits[:k]) for k in range(3))

    res = spectral.lumpability_check(ch, orbit)
    assert res and res.residual == 0
    assert res.lumped.size == 3


def test_lumpability_perturbed_fails():
    ch = build_fa_chain(1, Region.torus(3, 1), None, 0.3).restricted(np.arange(8) != 7)

    def orbit(s):
        bits = [(s >> k) & 1 for k in range(3)]
        return min(tuple(bits[k:] + bits[:k]) for k in range(3))

    # bump one rate out of a state whose rotation class has three members
    k = next(i for i, r in enumerate(ch.rows) if sum(orbit(t) == orbit(ch.states[r]) for t in ch.states) == 3)
    ch.rates = ch.rates.copy()
    ch.rates[k] *= 1.5

    res = spectral.lumpability_check(ch, orbit)
    assert not res and res.residual > 1e-3
