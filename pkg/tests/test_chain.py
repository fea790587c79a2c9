import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowshadow import builtin
from flowshadow.chain import (BoxGraph, ancestors, build_cover, chain_transitive, find_attractors, omega_limit,
                              reachable, scc, stable_unstable_witness, topologically_transitive,
                              transition_graph, witness_sweep)
from flowshadow.sysdef import SpaceSpec


def brute_scc(n, edges):
    R = np.eye(n, dtype=bool)
    for a, b in edges:
        R[a, b] = True
    for k in range(n):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    M = R & R.T
    labels = -np.ones(n, dtype=int)
    nxt = 0
    for i in range(n):
        if labels[i] < 0:
            labels[M[i]] = nxt
            nxt += 1
    return labels, R


@pytest.fixture(scope="module")
def pf_graph():
    pf = builtin("pitchfork1d")
    return pf, transition_graph(pf, build_cover(pf.space, None, 6), 0.0, 2.0)


@pytest.fixture(scope="module")
def circle_graph():
    ci = builtin("circle_ns")
    return ci, transition_graph(ci, build_cover(ci.space, None, 6), 0.0, 2.0)


def test_cover_geometry():
    c = build_cover(SpaceSpec.box((-2.0, 2.0), (0.0, 1.0)), None, 2)
    assert c.n_boxes == 16
    assert c.flat_index(c.multi_index(np.arange(16))).tolist() == list(range(16))
    lo, hi = c.bounds(5)
    np.testing.assert_allclose(lo, [-1.0, 0.25])
    np.testing.assert_allclose(hi, [0.0, 0.5])
    # a point on a shared face belongs to both boxes
    _, b = c.locate([[-1.0, 0.3]])
    assert sorted(b.tolist()) == [1, 5]
    assert c.box_distance(0, 15) == pytest.approx(np.hypot(2.0, 0.5))
    assert c.inflate([5]).tolist() == [0, 1, 2, 4, 5, 6, 8, 9, 10]
    with pytest.raises(ValueError):
        build_cover(c.space, None, 13)


def test_torus_cover_wraps():
    c = build_cover(SpaceSpec.torus(1.0, 1.0), None, 3)
    _, b = c.near([[0.001, 0.5]], 0.01)
    assert 4 in b.tolist() and 60 in b.tolist()
    assert c.box_distance(0, 7) == 0.0
    assert len(c.inflate([0])) == 9


def test_test_points():
    c = build_cover(SpaceSpec.box((0.0, 1.0), (0.0, 1.0)), None, 1)
    P = c.test_points([3], 9)[0]
    assert P.shape == (9, 2)
    assert np.all(P >= 0.5) and np.all(P <= 1.0)
    assert [0.75, 0.75] in P.tolist()


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))))
def test_scc_matches_brute_force(graph):
    n, edges = graph
    res = scc(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
    labels, R = brute_scc(n, edges)
    assert np.array_equal(res.labels, labels)
    for c, members in enumerate(res.components):
        has_cycle = members.size > 1 or any(a == b == members[0] for a, b in edges)
        assert res.recurrent[c] == has_cycle
    # condensation is acyclic and consistent with reachability
    for a, b in res.dag_edges:
        assert a != b and R[res.components[a][0], res.components[b][0]]


def test_reachability_helpers():
    cover = build_cover(SpaceSpec.box((0.0, 1.0)), None, 2)
    g = BoxGraph(cover, 0.0, np.array([1.0]), np.array([[0, 1], [1, 2], [3, 2]]), 5)
    assert reachable(g, [0]).tolist() == [0, 1, 2]
    assert ancestors(g, [2]).tolist() == [0, 1, 2, 3]
    assert "0 1" in g.edge_list_text()
    assert g.has_edge(3, 2) and not g.has_edge(2, 3)


def test_pitchfork_structure(pf_graph):
    pf, g = pf_graph
    ct = chain_transitive(g)
    assert not ct.transitive
    src, dst = ct.witness
    assert dst not in reachable(g, [src])
    cands = find_attractors(g)
    proper = sorted(c.boxes.tolist() for c in cands if c.proper)
    assert proper == [[15, 16], [47, 48]]
    assert all(r.tolist() == [31, 32] for c in cands for r in c.repellers)


def test_circle_structure(circle_graph):
    ci, g = circle_graph
    cands = find_attractors(g)
    assert len(cands) == 1 and cands[0].proper
    assert cands[0].boxes.tolist() == [31, 32]
    assert cands[0].repellers[0].tolist() == [0, 63]


def test_torus_is_chain_transitive():
    tl = builtin("torus_linear", alpha=2 ** 0.5)
    g = transition_graph(tl, build_cover(tl.space, None, 3), 0.0, 200.0)
    assert chain_transitive(g).transitive
    assert not any(c.proper for c in find_attractors(g))


def test_omega_limit(pf_graph):
    pf, g = pf_graph
    assert omega_limit(pf, [0.5], 50, 10, g.cover).tolist() == [47, 48]
    tl = builtin("torus_linear", alpha=2 ** 0.5)
    assert len(omega_limit(tl, [0.1, 0.2], 1, 500, build_cover(tl.space, None, 3))) == 64


def test_transitivity(pf_graph):
    tl = builtin("torus_linear", alpha=2 ** 0.5)
    rep = topologically_transitive(tl, build_cover(tl.space, None, 3), 10, 300.0, seed=4)
    assert rep.verdict == "verified-for-samples" and rep.seed == 4
    pf, g = pf_graph
    rep = topologically_transitive(pf, g.cover, 2, 50.0, graph=g, extra_pairs=[(48, 15)])
    assert rep.verdict == "refuted"
    rec = [p for p in rep.pairs if (p["U"], p["V"]) == (48, 15)][0]
    S = np.array(rec["invariant_set"])
    assert set(reachable(g, S).tolist()) == set(S.tolist())


def test_witness_mechanics():
    sd = builtin("saddle2d")
    assert stable_unstable_witness(sd, [0, 0], [0, 0], 0.0, [0, 0]).holds
    assert not stable_unstable_witness(sd, [0, 0], [0, 0], 0.0, [0.1, 0.0]).holds
    pf = builtin("pitchfork1d")
    assert not stable_unstable_witness(pf, [-1.0], [1.0], 0.0, [1.0]).holds
    sw = witness_sweep(pf, [-1.0], [1.0], np.linspace(-2, 2, 81), np.arange(-10, 11) * 0.05)
    assert sw["n_pass"] == 0 and sw["n_z"] == 81 and sw["n_K"] == 21
    with pytest.raises(ValueError):
        witness_sweep(pf, [-1.0], [1.0], [[0.0]], [0.033])
