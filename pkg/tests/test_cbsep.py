import math
from fractions import Fraction

import numpy as np
import pytest

from fa2f import cbsep, pins, spectral
from fa2f.cbsep import GCBSEPParams, Graph, gcbsep_build, gcbsep_simulate
from fa2f.errors import GeometryError, SiteCapError
from fa2f.lattice import SeededRng


def test_graphs():
    g = Graph.torus(2)
    assert g.n_vertices == 4 and len(g.edges) == 4  # parallel edges merged
    assert len(Graph.torus(4).edges) == 32
    assert Graph.path(3).edges == ((0, 1), (1, 2))
    assert not Graph.from_edges(3, [(0, 1)]).is_connected()
    with pytest.raises(GeometryError):
        Graph.from_edges(2, [(0, 2)])
    with pytest.raises(GeometryError):
        GCBSEPParams.binary(Graph.from_edges(3, [(0, 1)]), 0.5)


def test_single_edge_is_complete_resample():
    for p in (0.5, 0.2, 0.05):
        ch = gcbsep_build(GCBSEPParams.binary(Graph.path(2), p))
        assert ch.size == 3
        assert spectral.relaxation_time(ch) == pytest.approx(1.0, rel=1e-12)


def test_moves_branch_and_coalesce():
    ch = gcbsep_build(GCBSEPParams.binary(Graph.path(3), Fraction(1, 3)))
    idx = {s: k for k, s in enumerate(ch.states)}
    d = ch.rate_dict()
    # branching 100 -> 110, coalescing 110 -> 010, no empty state
    assert d[(idx[(1, 0, 0)], idx[(1, 1, 0)])] > 0
    assert d[(idx[(1, 1, 0)], idx[(0, 1, 0)])] > 0
    assert (0, 0, 0) not in idx
    # a particle cannot jump across an empty edge
    assert (idx[(1, 0, 0)], idx[(0, 0, 1)]) not in d
    assert ch.exact and ch.detailed_balance_residual() == 0


def test_state_cap():
    with pytest.raises(SiteCapError):
        gcbsep_build(GCBSEPParams.binary(Graph.torus(5), 0.5))


def test_two_by_two(frozen):
    ch = gcbsep_build(GCBSEPParams.binary(Graph.torus(2), 0.5))
    t = spectral.relaxation_time(ch)
    assert t == pytest.approx(frozen["cbsep_torus2x2_p0.5_trel"], rel=1e-12)
    assert t == pytest.approx(1.5, rel=1e-12)


def test_simulate_invariants():
    params = GCBSEPParams.binary(Graph.torus(4), 0.1)
    traj = gcbsep_simulate(params, [1] + [0] * 15, 200.0, SeededRng(1))
    assert traj.min_count >= 1
    assert traj.max_drop <= 1  # one update changes the count by at most one
    assert traj.counts.min() >= 1 and traj.events > 0
    with pytest.raises(ValueError):
        gcbsep_simulate(params, [0] * 16, 1.0, SeededRng(1))


def test_final_law_matches_exact():
    params = GCBSEPParams(Graph.path(3), (0.5, 0.3, 0.2), (False, True, False))
    ch = gcbsep_build(params)
    start = (1, 0, 2)
    emp = cbsep.gcbsep_final_law(params, start, 0.8, 100000, SeededRng(2))
    idx = {s: k for k, s in enumerate(ch.states)}
    e = np.zeros(ch.size)
    for s, v in emp.items():
        e[idx[s]] = v
    exact = spectral.transient_distribution(ch, idx[start], 0.8)
    assert 0.5 * np.abs(e - exact).sum() <= 0.01


def test_generalised_lumps_to_binary():
    params = GCBSEPParams(Graph.path(3), (Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)), (False, True, True))
    ch = gcbsep_build(params)
    res = spectral.lumpability_check(ch, cbsep.particle_projection(params))
    assert res and res.residual == 0
    binary = gcbsep_build(GCBSEPParams.binary(Graph.path(3), Fraction(1, 2)))
    assert spectral.relaxation_time(res.lumped) == pytest.approx(spectral.relaxation_time(binary), rel=1e-12)
    # the generalised chain relaxes no faster than its particle projection
    assert spectral.relaxation_time(ch) >= spectral.relaxation_time(binary) - 1e-12


def test_renormalize_examples():
    base = GCBSEPParams.binary(Graph.torus(4), 0.1)
    hat = cbsep.renormalize(base, ell=2, collapse=True)
    assert hat.graph.n_vertices == 4
    assert hat.p == pytest.approx(1 - 0.9**4)
    full = cbsep.renormalize(base, ell=2)
    assert full.n_local == 16 and full.p == pytest.approx(hat.p)
    assert cbsep.renormalize(base, ell=1).weights == base.weights
    with pytest.raises(GeometryError):
        cbsep.renormalize(base, ell=3)
    assert cbsep.default_block(0.1, 2) == 4 and cbsep.default_block(0.25, 2) == 2


def test_renormalized_projection_lumpable():
    base = GCBSEPParams.binary(Graph.torus(2), Fraction(1, 5))
    full = cbsep.renormalize(base, ell=1)
    ch = gcbsep_build(full)
    assert spectral.lumpability_check(ch, cbsep.particle_projection(full))


def test_scaling_pin():
    rows = cbsep.scaling_study(ns=(4, 9), ps=[0.5, 0.25, 0.125])
    assert all(r.method == "exact" for r in rows)
    assert max(r.ratio for r in rows) <= pins.C_CBSEP
    assert cbsep.trel_log_bound(0.5) == 2.0


def test_scaling_csv(tmp_path):
    rows = cbsep.scaling_study(ns=(4,), ps=[0.5])
    p = tmp_path / "s.csv"
    cbsep.write_scaling_csv(p, rows)
    lines = p.read_text().splitlines()
    assert lines[0] == "d,n,p,method,t_rel,bound,ratio" and len(lines) == 2


def test_mc_relaxation_within_factor_two():
    params = GCBSEPParams.binary(Graph.torus(3), 0.3)
    exact = spectral.relaxation_time(gcbsep_build(params))
    est = cbsep.mc_relaxation_estimate(params, 3e4, SeededRng(3))
    assert exact / 2 <= est <= 2 * exact


# -- cover time ---------------------------------------------------------------


def test_cover_trivial_graphs():
    assert cbsep.cover_time_estimate(Graph(1, ()), 10, SeededRng(4)) == 0.0
    est = cbsep.cover_time_estimate(Graph.path(2), 40000, SeededRng(5))
    assert est == pytest.approx(1.0, abs=4 / math.sqrt(40000))
    with pytest.raises(GeometryError):
        cbsep.cover_time_samples(Graph.from_edges(3, [(0, 1)]), 5, SeededRng(6))


def test_cover_path_three_exact():
    # from the middle of a 3-path: Exp(2) to leave, then the far end is hit
    # after mean 3 (h0 = 1 + h1, h1 = 1/2 + h0/2)
    est = cbsep.cover_time_estimate(Graph.path(3), 40000, SeededRng(7), start=1)
    assert est == pytest.approx(0.5 + 3, rel=0.03)


def test_cover_ratio_regression(frozen):
    for L, ref in frozen["cover_ratio_torus"].items():
        L = int(L)
        m = cbsep.cover_time_estimate(Graph.torus(L), 200, SeededRng(8, L))
        ratio = m / (L**2 * math.log(L))
        assert ratio <= pins.C_COVER
        assert abs(ratio - ref) <= 0.15 * ref
