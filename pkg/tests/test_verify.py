import math

import numpy as np
import pytest

from flowshadow import builtin, io
from flowshadow import verify as V

SQRT2 = 2 ** 0.5


@pytest.fixture(scope="module")
def pf():
    return builtin("pitchfork1d")


@pytest.fixture(scope="module")
def ci():
    return builtin("circle_ns")


def test_prop3_reports_are_deterministic(pf):
    a = V.verify_prop3(pf, depth=5)
    b = V.verify_prop3(pf, depth=5)
    assert a.verdict == "consistent" and a.exit_code == 0
    assert io.dumps(a.to_dict()) == io.dumps(b.to_dict())


def test_prop3_singleton_excluded():
    rep = V.verify_prop3(builtin("saddle2d"), depth=3)
    assert rep.verdict == "inconclusive" and V.SINGLETON_NOTE in rep.notes


def test_thm_asp_circle(ci):
    rep = V.verify_thm_asp(ci, [math.pi], [0.0], grid_n=401)
    assert rep.verdict == "consistent", rep.checks
    check = [c for c in rep.checks if c["check"] == "delta_average_holds"][0]
    jump = rep.artifacts["junction_defect"]
    assert check["window_N"] <= math.ceil(jump / 0.1) + 1
    assert V.recheck_certificate(rep.artifacts["certificate"])[0]


def test_thm_asp_preconditions(pf, ci):
    assert V.verify_thm_asp(pf, [1.0], [1.0]).verdict == "inconclusive"
    rep = V.verify_thm_aasp(pf, [1.0], [1.0])
    assert rep.verdict == "inconclusive" and "a = b" in rep.notes[0]
    # b inside the basin: the certificate precondition fails and nothing is claimed
    rep = V.verify_thm_asp(ci, [math.pi], [0.02], grid_n=101)
    assert rep.verdict == "inconclusive"
    assert not rep.artifacts["certificate"]["valid"]


def test_thm_asp_torus_inconclusive():
    tl = builtin("torus_linear", alpha=SQRT2)
    rep = V.verify_thm_asp(tl, [0.5, 0.5], [0.1, 0.1], depth=3, grid_n=5)
    assert rep.verdict == "inconclusive"


def test_thm_aasp_circle(ci):
    rep = V.verify_thm_aasp(ci, [math.pi], [0.0], half_len=33, grid_n=401)
    assert rep.verdict == "consistent", rep.checks


def test_lemma_plsp(pf):
    rep = V.verify_lemma_plsp(pf, [0.5], K=2.0)
    assert rep.verdict == "consistent"
    assert rep.checks[0]["max_difference"] <= 1e-12


def test_lemma_nonempty_circle_contrapositive(ci):
    rep = V.verify_lemma_nonempty(ci, [0.0], [math.pi], grid_n=401)
    assert rep.verdict == "consistent" and rep.parameters["mode"] == "contrapositive"
    assert rep.artifacts["sign_certificate"]["valid"]


def test_lemma_nonempty_circle_attractor_first_has_witnesses(ci):
    # W^s(pi) and W^u(0) share every point except 0 and pi: the expected witnesses are found
    rep = V.verify_lemma_nonempty(ci, [math.pi], [0.0], grid_n=101, N_gap=0.5)
    assert rep.artifacts["sweep"]["n_pass"] > 0
    assert rep.verdict == "inconclusive"
    assert not rep.artifacts["sign_certificate"]["valid"]


def test_lemma_nonempty_saddle_witness():
    rep = V.verify_lemma_nonempty(builtin("saddle2d"), [0, 0], [0, 0], grid_n=21, N_gap=0.5, depth=3)
    assert rep.verdict == "consistent"
    assert [[0.0, 0.0], 0.0] in [[list(z), k] for z, k in rep.artifacts["sweep"]["witnesses"]]


def test_sign_certificate(pf, ci):
    cert = V.sign_invariance_certificate(pf, [-1.0], [1.0])
    assert cert["valid"] and cert["equilibria"] == pytest.approx([-1.0, 0.0, 1.0])
    signs = [a["sign"] for a in cert["arcs"]]
    assert signs == [1, -1, 1, -1]
    assert V.recheck_certificate(cert)[0]
    # non-equilibrium points use their limits
    cert = V.sign_invariance_certificate(pf, [-1.5], [1.0])
    assert cert["valid"] and cert["x_limit"] == pytest.approx(-1.0)
    # 0.7 flows backward to 0, whose unstable set meets the stable set of -1
    cert = V.sign_invariance_certificate(pf, [-0.5], [0.7])
    assert cert["y_limit"] == 0.0 and not cert["valid"]
    assert not V.sign_invariance_certificate(pf, [1.0], [1.0])["valid"]
    assert not V.sign_invariance_certificate(ci, [math.pi], [0.02])["valid"]
    bad = V.sign_invariance_certificate(pf, [-1.0], [1.0])
    bad["equilibria"] = [-1.0, 1.0]
    assert not V.recheck_certificate(bad)[0]
    assert not V.sign_invariance_certificate(builtin("saddle2d"), [0, 0], [0, 0])["valid"]


def test_gap_noattractor(pf):
    rep = V.verify_thm_gap_noattractor(pf, grid_n=401)
    assert rep.verdict == "consistent"
    assert V.CONTRAPOSITIVE_NOTE in rep.notes
    tl = builtin("torus_linear", alpha=SQRT2)
    assert V.verify_thm_gap_noattractor(tl, depth=3).verdict == "inconclusive"


def test_lemma_tt():
    tl = builtin("torus_linear", alpha=SQRT2)
    rep = V.verify_lemma_tt(tl, depth=3, T_max=300.0, pair_budget=10)
    assert rep.verdict == "consistent"
    assert V.verify_lemma_tt(builtin("pitchfork1d"), depth=4).verdict == "inconclusive"


def test_prop_chain_limit_shadow(pf):
    rep = V.verify_prop_chain_limit_shadow(pf)
    assert rep.verdict == "consistent"
    jd = rep.artifacts["junction_defects"]
    assert jd == pytest.approx([0.4 / n for n in range(1, len(jd) + 1)])


def test_thm_final_circle_and_torus(ci):
    rep = V.verify_thm_final(ci, grid_n=401)
    assert rep.verdict == "consistent"
    tl = builtin("torus_linear", alpha=SQRT2)
    rep = V.verify_thm_final(tl, depth=3, T_max=300.0, pair_budget=10)
    assert rep.verdict == "consistent"
    assert "evidence" in rep.artifacts["sampled_shadowing"]["note"]
    assert V.verify_thm_final(builtin("saddle2d")).verdict == "inconclusive"


def test_recheck_rejects_unknown():
    ok, msgs = V.recheck_certificate({"kind": "something"})
    assert not ok and msgs
