import math

import numpy as np
import pytest

from flowshadow import PseudoOrbit, builtin, flow_to, make_concat_ab, sample_orbit
from flowshadow.chain import build_cover, find_attractors, transition_graph
from flowshadow.shadow import (ReparamClass, Reparameterization, certify_average_nonshadowing, error_statistic,
                               search_shadowing, segment_integrals, tail_slope)
from flowshadow.verify import recheck_certificate

GRID = np.linspace(-2.0, 2.0, 4001)


@pytest.fixture(scope="module")
def pf():
    return builtin("pitchfork1d")


@pytest.fixture(scope="module")
def pf_graph(pf):
    return transition_graph(pf, build_cover(pf.space, None, 6), 0.0, 2.0)


def test_error_statistic():
    assert error_statistic([2.0] + [0.0] * 31, "average") == pytest.approx(0.125)
    assert error_statistic(1.0 / np.arange(1, 33), "limit") == pytest.approx(1 / 25)
    assert error_statistic([1.0, 3.0, 2.0], "uniform") == 3.0
    assert error_statistic([1.0, 3.0, 2.0, 2.0], "asymptotic_average") == 2.0
    assert tail_slope(1.0 / np.arange(1, 65) ** 2) > 0.5
    with pytest.raises(ValueError):
        error_statistic([1.0], "sideways")


def test_reparameterization():
    h = Reparameterization(((0.0, 0.0), (1.0, 2.0), (3.0, 3.0)), lam=2.0)
    np.testing.assert_allclose(h([-1.0, 0.5, 2.0, 4.0]), [-1.0, 1.0, 2.5, 4.0])
    assert Reparameterization.from_dict(h.to_dict()) == h
    assert Reparameterization.identity().is_identity
    with pytest.raises(ValueError):
        Reparameterization(((0.0, 0.0), (1.0, 3.0)), lam=2.0)
    with pytest.raises(ValueError):
        Reparameterization(((1.0, 1.0),))


def test_pattern_ladder():
    rc = ReparamClass(2.0)
    pats = rc.patterns()
    assert (1, 1) in pats and (2, 1) in pats and (1, 2) in pats and (3, 1) not in pats
    assert all(math.gcd(a, b) == 1 for a, b in pats)
    assert rc.rungs() == [1.0, 4 / 3, 1.5, 2.0]
    assert ReparamClass(1.0).rungs() == [1.0]


def test_self_shadowing(pf):
    so = sample_orbit(pf, [0.5], [1.0] * 21)
    assert np.max(segment_integrals(so, [0.5], kind="sup")) <= 1e-12
    res = search_shadowing(so, "uniform", GRID)
    assert res.z[0] == pytest.approx(0.5, abs=1e-3)
    assert res.h.is_identity and res.value < 1e-10
    again = error_statistic(segment_integrals(so, res.z, kind="sup"), "uniform")
    assert again == res.value


def test_gap_recovers_shift(pf):
    H = 8
    pts = [flow_to(pf, [0.5], float(i) + (2.0 if i >= 0 else 0.0)) for i in range(-H, H + 1)]
    po = PseudoOrbit(pf, -H, np.array(pts), np.ones(2 * H + 1))
    res = search_shadowing(po, "gap", GRID, N_gap=4.0)
    assert res.K == pytest.approx(2.0, abs=0.05)
    assert res.value < 1e-6
    # with no gap allowed the gap statistic is the limit statistic
    g0 = search_shadowing(po, "gap", GRID[::40], N_gap=0.0)
    l0 = search_shadowing(po, "limit", GRID[::40])
    assert g0.value == pytest.approx(l0.value, abs=1e-15) and g0.z == l0.z


def test_warping_helps_when_time_is_stretched():
    ci = builtin("circle_ns")
    x = [np.array([1.0])]
    for _ in range(12):
        x.append(flow_to(ci, x[-1], 1.5))
    po = PseudoOrbit(ci, 0, np.array(x), np.ones(13))
    grid = np.linspace(0.5, 1.5, 51)
    vals = []
    for lam in (1.0, 2.0):
        r = search_shadowing(po, "average", grid, ReparamClass(lam, band=8.0))
        vals.append(r.value)
        if lam > 1:
            assert not r.h.is_identity
            assert np.all(r.h.slopes() <= lam + 1e-12)
            # the reported value is the exact functional at the reported (z, h)
            f = segment_integrals(po, r.z, r.h)
            assert error_statistic(f[1:], "average") == pytest.approx(r.value, rel=1e-9)
    assert vals[1] < vals[0]


def test_concat_average_lower_bound(pf):
    po = make_concat_ab(pf, [1.0], [-1.0], 32)
    res = search_shadowing(po, "average", GRID)
    assert res.value >= 0.25 - 1e-6
    assert len(res.candidate_values) == GRID.size


def test_certificate_and_soundness(pf, pf_graph):
    cand = [c for c in find_attractors(pf_graph) if 47 in c.boxes][0]
    cert = certify_average_nonshadowing(pf, cand, [-1.0], 0.5, 6, graph=pf_graph)
    assert cert.valid and cert.lower_bound == 0.25
    assert cert.neighborhood_boxes == list(range(43, 53))
    ok, msgs = recheck_certificate(cert.to_dict())
    assert ok, msgs
    # soundness hook: no searched candidate, warped or not, beats the certified bound
    po = make_concat_ab(pf, [1.0], [-1.0], 16)
    for lam in (1.0, 2.0):
        r = search_shadowing(po, "average", GRID[::20], ReparamClass(lam))
        assert r.value >= cert.lower_bound - 1e-6
    # a tampered certificate does not replay
    bad = cert.to_dict()
    bad["neighborhood_boxes"] = bad["neighborhood_boxes"][1:]
    assert not recheck_certificate(bad)[0]


def test_certificate_preconditions(pf, pf_graph):
    ci = builtin("circle_ns")
    g = transition_graph(ci, build_cover(ci.space, None, 6), 0.0, 2.0)
    cand = [c for c in find_attractors(g) if c.proper][0]
    assert not certify_average_nonshadowing(ci, cand, [0.02], 0.5, 6, graph=g).valid
    assert certify_average_nonshadowing(ci, cand, [0.0], 0.5, 6, graph=g).valid
    cand = [c for c in find_attractors(pf_graph) if 47 in c.boxes][0]
    cert = certify_average_nonshadowing(pf, cand, [0.9], 0.5, 6, graph=pf_graph)
    assert not cert.valid and cert.failure["check"] == "b_outside_basin"
    with pytest.raises(ValueError):
        certify_average_nonshadowing(pf, cand, [-1.0], 0.0, 6, graph=pf_graph)
