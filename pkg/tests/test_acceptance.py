"""
Acceptance criteria, each at its stated tolerance.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from flowshadow import PseudoOrbit, builtin, classify, make_concat_ab, sample_orbit
from flowshadow.flow import IntegratorConfig, sample_times
from flowshadow.chain import (build_cover, find_attractors, reachable, scc, topologically_transitive,
                              transition_graph)
from flowshadow.shadow import certify_average_nonshadowing, search_shadowing, segment_integrals
from flowshadow.sysdef import CATALOG, ParseError, eval_field, format_system, parse_system
from flowshadow import verify as V

SQRT2 = 2 ** 0.5
GRID = np.linspace(-2.0, 2.0, 4001)


def logistic(t, x0):
    """Closed-form pitchfork flow x' = x - x^3."""
    t = np.asarray(t, dtype=float)
    return x0 * np.exp(t) / np.sqrt(1 - x0 ** 2 + x0 ** 2 * np.exp(2 * t))


def _pitchfork_graph():
    pf = builtin("pitchfork1d")
    cover = build_cover(pf.space, pf.region, 6)
    return pf, transition_graph(pf, cover, 0.0, 2.0)


# --------------------------------------------------------------------------

def criterion_1():
    details = []
    ok = True
    for name, params, depth in (("pitchfork1d", {}, 6), ("circle_ns", {}, 6), ("torus_linear", {"alpha": SQRT2}, 4)):
        rep = V.verify_prop3(builtin(name, params), depth)
        ct = rep.artifacts["chain_transitive"]["chain_transitive"]
        proper = any(a["proper"] for a in rep.artifacts["attractors"])
        good = rep.verdict == "consistent" and ct == (not proper)
        ok &= good
        details.append(f"{name}: chain_transitive={ct} proper={proper}")
    return ok, "; ".join(details)


def criterion_2():
    pf, g = _pitchfork_graph()
    po = make_concat_ab(pf, [1.0], [-1.0], 32)
    cls = classify(po, "delta_average", 0.1)
    cand = V._attractor_for(g, find_attractors(g), [1.0])
    cert = certify_average_nonshadowing(pf, cand, [-1.0], 0.5, 6, graph=g)
    res = search_shadowing(po, "average", GRID)
    all_boxes_ok = all(c["ok"] for c in cert.checks)
    ok = cls.holds and cls.window_N == 21 and cert.valid and all_boxes_ok and res.value >= 0.25 - 1e-6
    return ok, (f"window_N={cls.window_N}, certificate valid={cert.valid} ({len(cert.checks)} checks), "
                f"search minimum={res.value:.6g}")


def criterion_3():
    pf, g = _pitchfork_graph()
    # half_len 33 gives two-sided partial averages for every n <= 32
    po = make_concat_ab(pf, [1.0], [-1.0], 33)
    cls = classify(po, "asymptotic_average")
    avg = np.asarray(cls.partial_averages)
    n = np.arange(1, avg.size + 1)
    err = float(np.max(np.abs(avg[:32] - 2.0 / n[:32]))) if avg.size >= 32 else math.inf
    cand = V._attractor_for(g, find_attractors(g), [1.0])
    cert = certify_average_nonshadowing(pf, cand, [-1.0], 0.5, 6, graph=g)
    ok = avg.size >= 32 and err <= 1e-9 and cert.valid
    return ok, f"max |avg_n - 2/n| over n<=32 = {err:.3g}, certificate valid={cert.valid}"


def criterion_4():
    pf = builtin("pitchfork1d")
    so = sample_orbit(pf, [0.5], [1.0] * 21)
    err_id = float(np.max(segment_integrals(so, [0.5], kind="sup")))
    res = search_shadowing(so, "uniform", GRID)
    dz = abs(res.z[0] - 0.5)
    ok = err_id <= 1e-5 and dz <= 1e-3 and res.h.is_identity
    return ok, f"error at z=0.5, h=id: {err_id:.3g}; searched z={res.z[0]:.6g} (|dz|={dz:.3g})"


def criterion_5():
    pf = builtin("pitchfork1d")
    H = 8
    idx = np.arange(-H, H + 1)
    pts = np.where(idx < 0, logistic(idx, 0.5), logistic(idx + 2.0, 0.5))
    po = PseudoOrbit(pf, -H, pts[:, None], np.ones(idx.size))
    res = search_shadowing(po, "gap", GRID, N_gap=4.0)
    fwd = np.asarray(res.per_segment["forward"])
    tail = float(np.max(fwd[-max(1, fwd.size // 4):]))
    ok = 1.95 <= res.K <= 2.05 and tail <= 1e-4
    return ok, f"K={res.K:.4g}, z={res.z[0]:.6g}, tail error={tail:.3g}"


def criterion_6():
    pf, g = _pitchfork_graph()
    rep = V.verify_lemma_nonempty(pf, [-1.0], [1.0], N_gap=4.0, grid_n=4001)
    sweep = rep.artifacts["sweep"]
    cert = rep.artifacts["sign_certificate"]
    # the x < 0 and x > 0 box sets, closed under the graph up to their boundary box at 0
    cover = g.cover
    lo, hi = cover.bounds(np.arange(cover.n_boxes))
    neg = np.flatnonzero(hi[:, 0] <= 0.0)
    pos = np.flatnonzero(lo[:, 0] >= 0.0)
    touch0 = set(np.flatnonzero((lo[:, 0] <= 1e-9) & (hi[:, 0] >= -1e-9)).tolist())
    E = g.edges

    def invariant(S):
        succ = E[np.isin(E[:, 0], S), 1]
        return set(succ.tolist()) <= set(S.tolist()) | touch0

    inv_neg, inv_pos = invariant(neg), invariant(pos)
    final = V.verify_thm_final(pf)
    ok = (sweep["n_pass"] == 0 and cert["valid"] and inv_neg and inv_pos
          and final.verdict == "consistent" and final.exit_code == 0)
    return ok, (f"witnesses passing={sweep['n_pass']} of {sweep['n_z']}x{sweep['n_K']}, sign certificate "
                f"valid={cert['valid']}, x<0/x>0 box sets invariant={inv_neg}/{inv_pos}, "
                f"thm_final={final.verdict}")


def criterion_7():
    tl = builtin("torus_linear", alpha=SQRT2)
    rep = topologically_transitive(tl, build_cover(tl.space, tl.region, 4), 20, 600.0, seed=0)
    pf, g = _pitchfork_graph()
    cover = g.cover
    u = int(cover.locate(np.array([[1.0]]))[1].max())
    v = int(cover.locate(np.array([[-1.0]]))[1].min())
    r2 = topologically_transitive(pf, cover, 1, 100.0, graph=g, extra_pairs=[(u, v)])
    rec = [p for p in r2.pairs if (p["U"], p["V"]) == (u, v)][0]
    inv = np.asarray(rec.get("invariant_set", []), dtype=int)
    closed = inv.size > 0 and set(reachable(g, inv).tolist()) == set(inv.tolist())
    separates = inv.size > 0 and not np.isin(cover.inflate([v]), inv).any()
    ok = (rep.verdict == "verified-for-samples" and rep.n_verified == 20 and rec["status"] == "refuted"
          and closed and separates)
    return ok, (f"torus {rep.n_verified}/20 pairs verified; pitchfork pair ({u},{v}) {rec['status']}, "
                f"invariant set of {inv.size} boxes closed={closed} separating={separates}")


def criterion_8():
    pf = builtin("pitchfork1d")
    t = np.linspace(0.0, 5.0, 501)
    errs = []
    for step in (1e-2, 5e-3):
        # integrate each sample time with a whole number of steps of the given size
        Y = sample_times(pf, np.array([[0.5]]), t, IntegratorConfig(step=step))[0, :, 0]
        errs.append(float(np.max(np.abs(Y - logistic(t, 0.5)))))
    ratio = errs[0] / errs[1]
    return ratio >= 12, f"max error {errs[0]:.3g} -> {errs[1]:.3g}, ratio {ratio:.2f}"


def _brute_scc(n, edges):
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
    return labels


def criterion_9():
    rng = np.random.default_rng(20240601)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 65))
        m = int(rng.integers(0, 3 * n + 1))
        edges = rng.integers(0, n, size=(m, 2))
        got = scc(n, edges).labels
        want = _brute_scc(n, edges.tolist())
        bad += int(not np.array_equal(got, want))
    return bad == 0, f"{200 - bad}/200 random graphs match brute-force reachability labels"


def _hand_fields(name, P):
    x = P[:, 0]
    if name == "pitchfork1d":
        return (x - x ** 3)[:, None]
    if name == "circle_ns":
        return np.sin(x)[:, None]
    if name == "torus_linear":
        return np.stack([np.ones_like(x), np.full_like(x, SQRT2)], axis=1)
    return np.stack([x, -P[:, 1]], axis=1)


def criterion_10():
    rng = np.random.default_rng(7)
    ok_rt, max_err = True, 0.0
    for name in sorted(CATALOG):
        spec = builtin(name, {"alpha": SQRT2} if name == "torus_linear" else {})
        text = format_system(spec)
        again = parse_system(text)
        ok_rt &= format_system(again) == text and again.fields == spec.fields and again.space == spec.space
        P = spec.region_lo + rng.random((100, spec.dim)) * (spec.region_hi - spec.region_lo)
        max_err = max(max_err, float(np.max(np.abs(eval_field(again, P) - _hand_fields(name, P)))))
    crashes = 0
    for _ in range(10000):
        data = rng.integers(0, 256, size=int(rng.integers(0, 257)), dtype=np.uint8).tobytes()
        try:
            parse_system(data)
        except ParseError:
            pass
        except Exception:
            crashes += 1
    ok = ok_rt and max_err <= 1e-12 and crashes == 0
    return ok, f"round trip stable={ok_rt}, max eval error={max_err:.3g}, fuzz crashes={crashes}/10000"


CRITERIA = {
    1: ("chain transitivity vs attractors cross-check", criterion_1),
    2: ("average shadowing pipeline", criterion_2),
    3: ("asymptotic average pipeline", criterion_3),
    4: ("self-shadowing", criterion_4),
    5: ("gap recovery", criterion_5),
    6: ("stable/unstable contrapositive", criterion_6),
    7: ("topological transitivity", criterion_7),
    8: ("integrator order", criterion_8),
    9: ("SCC oracle", criterion_9),
    10: ("parser", criterion_10),
}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_acceptance(n, acceptance_results):
    title, fn = CRITERIA[n]
    t0 = time.perf_counter()
    ok, detail = fn()
    detail = f"{detail} [{time.perf_counter() - t0:.1f} s]"
    acceptance_results[n] = (ok, title, detail)
    print(f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for n in sorted(CRITERIA):
        title, fn = CRITERIA[n]
        t0 = time.perf_counter()
        ok, detail = fn()
        failed += not ok
        print(f"ACCEPTANCE {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{time.perf_counter() - t0:.1f} s]")
    raise SystemExit(1 if failed else 0)
