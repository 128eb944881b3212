import math

import numpy as np
import pytest

from fa2f import kcm, spectral, stats
from fa2f.errors import GeometryError
from fa2f.kcm import NOT_HIT, SimParams, fa_run, fa_tau0_samples
from fa2f.lattice import ALL_INFECTED, Config, Region, SeededRng


def test_params_validation():
    T = Region.torus(4, 4)
    with pytest.raises(ValueError):
        SimParams(2, 0.3, T, t_max=0)
    with pytest.raises(ValueError):
        SimParams(5, 0.3, T)
    with pytest.raises(GeometryError):
        SimParams(2, 0.3, T, origin=(4, 0))
    with pytest.raises(ValueError):
        SimParams(2, 1.0, T)


def test_origin_initially_infected():
    T = Region.torus(4, 4)
    init = Config.from_infected(T, [(0, 0)])
    out = fa_run(SimParams(2, 0.3, T, init=init, t_max=5.0, rng=1))
    assert out.tau0 == 0.0 and out.rings == 0


def test_all_healthy_never_hit():
    T = Region.torus(6, 6)
    out = fa_run(SimParams(2, 0.3, T, init=Config.all_healthy(T), t_max=50.0, rng=2))
    assert out.tau0 is NOT_HIT and not out.hit
    assert out.legal_rings == 0 and out.rings > 0
    assert float(NOT_HIT) == math.inf and repr(NOT_HIT) == "NOT_HIT"


def test_p_tau0_zero_is_q():
    s = fa_tau0_samples(SimParams(2, 0.3, Region.torus(8, 8), t_max=1e-9, rng=SeededRng(3)), 20000)
    frac = float((s.tau0 == 0).mean())
    assert abs(frac - 0.3) <= 4 * math.sqrt(0.3 * 0.7 / 20000)


def test_ring_rate_is_region_size():
    T = Region.torus(5, 5)
    t = 400.0
    out = fa_run(SimParams(2, 0.3, T, init=Config.all_healthy(T), t_max=t, rng=4))
    # Poisson(|T| t) rings
    assert abs(out.rings - 25 * t) <= 5 * math.sqrt(25 * t)


def test_final_law_matches_matrix_exponential():
    R = Region.torus(2, 2)
    init = Config.from_infected(R, [(0, 0)])
    p = SimParams(1, 0.4, R, rng=SeededRng(5))
    emp = kcm.final_state_law(p, init, 0.7, 100000)
    exact = spectral.transient_distribution(spectral.build_fa_chain(1, R, None, 0.4), init.to_index(), 0.7)
    assert stats.total_variation(emp, exact) <= 0.01


def test_final_law_rectangle_with_boundary():
    R = Region.rectangle(2, 2)
    init = Config.all_healthy(R)
    p = SimParams(2, 0.5, R, bc=ALL_INFECTED, rng=SeededRng(6))
    emp = kcm.final_state_law(p, init, 1.0, 100000)
    exact = spectral.transient_distribution(spectral.build_fa_chain(2, R, ALL_INFECTED, 0.5), init.to_index(), 1.0)
    assert stats.total_variation(emp, exact) <= 0.01


def test_tau0_exchangeable_in_origin():
    T = Region.torus(6, 6)
    # small tori can freeze, so compare tau0 censored at t_max
    a = np.minimum(fa_tau0_samples(SimParams(2, 0.4, T, t_max=200.0, rng=SeededRng(7)), 4000).tau0, 200.0)
    b = np.minimum(fa_tau0_samples(SimParams(2, 0.4, T, t_max=200.0, rng=SeededRng(8), origin=(3, 2)), 4000).tau0, 200.0)
    ma, mb = a.mean(), b.mean()
    se = math.hypot(a.std() / math.sqrt(len(a)), b.std() / math.sqrt(len(b)))
    assert abs(ma - mb) <= 4 * se


def test_tau0_replicas_prefix_stable():
    p = SimParams(2, 0.4, Region.torus(8, 8), t_max=1e4, rng=SeededRng(9))
    a = fa_tau0_samples(p, 10).tau0
    b = fa_tau0_samples(p, 30).tau0
    assert np.array_equal(a, b[:10])


@pytest.mark.parametrize("q", [0.2, 0.3, 0.5])
def test_stationarity(q):
    rep = kcm.stationarity_check(SimParams(2, q, Region.torus(16, 16), rng=SeededRng(10, int(q * 10))), 50.0, 2000.0)
    assert rep.passed, (rep.z_occupancy, rep.z_pairs)


def test_event_log_replay(tmp_path):
    T = Region.torus(8, 8)
    p = SimParams(2, 0.35, T, t_max=20.0, rng=SeededRng(11), log_events=True, origin=(4, 4))
    out = fa_run(p)
    init = kcm._initial(p)
    assert kcm.replay(init, out.events) == out.final_config
    path = tmp_path / "ev.bin"
    kcm.write_event_log(path, out)
    back = kcm.read_event_log(path)
    assert np.array_equal(back, out.events)
    with pytest.raises(FileExistsError):
        kcm.write_event_log(path, out)
    # partial replay stops at the requested time
    mid = out.t_end / 2
    part = kcm.replay(init, back, until=mid)
    assert part == kcm.replay(init, back[back["time"] <= mid])


def test_same_seed_same_trajectory():
    p = SimParams(2, 0.35, Region.torus(8, 8), t_max=30.0, rng=SeededRng(12))
    a, b = fa_run(p), fa_run(p)
    assert a.tau0 == b.tau0 and a.final_config == b.final_config and a.rings == b.rings


@pytest.mark.parametrize("q", [0.3, 0.4, 0.5])
def test_tau0_regression(frozen, q):
    """300 replicas on 64^2 against the frozen 10^4-replica oracle (independent seed)."""
    ref = frozen[f"fa_tau0_64_q{q}"]
    s = fa_tau0_samples(SimParams(2, q, Region.torus(64, 64), t_max=1e7, rng=SeededRng(1600, int(q * 10))), 300)
    assert s.summary.hit_fraction == ref["hit"]
    assert abs(s.tau0.mean() - ref["mean"]) <= 4 * ref["sd"] / math.sqrt(300)


def test_tau0_csv(tmp_path):
    s = fa_tau0_samples(SimParams(2, 0.3, Region.torus(4, 4), t_max=1e-9, rng=SeededRng(13)), 50)
    path = tmp_path / "t.csv"
    kcm.write_tau0_csv(path, s, seed=13)
    lines = path.read_text().splitlines()
    assert lines[0] == "seed,replica,q,L,tau0"
    assert len(lines) == 51
    assert any(ln.endswith(",inf") for ln in lines[1:]) and any(ln.endswith(",0.0") for ln in lines[1:])
