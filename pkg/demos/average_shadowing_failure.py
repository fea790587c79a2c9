"""
Why the pitchfork flow lacks the average shadowing property.

The orbit of a = 1 (an attractor) is glued at time 0 to the forward orbit
of b = -1 (a point outside its basin). The single jump of size 2 is
averaged away, so the sequence is a 0.1-average-pseudo orbit, but no true
orbit can follow it in average: any candidate settles near one of the two
sinks and pays a distance of order 1 on one half of the window.

Run with ``python demos/average_shadowing_failure.py``.
"""

import numpy as np

from flowshadow import builtin, classify, make_concat_ab
from flowshadow.chain import build_cover, find_attractors, transition_graph
from flowshadow.shadow import certify_average_nonshadowing, search_shadowing


def main():
    pf = builtin("pitchfork1d")
    po = make_concat_ab(pf, [1.0], [-1.0], half_len=32)
    rep = classify(po, "delta_average", 0.1)
    print(f"delta-average pseudo orbit: {rep.verdict}, least window N = {rep.window_N}")

    res = search_shadowing(po, "average", np.linspace(-2, 2, 4001))
    print(f"best average error over 4001 candidates: {res.value:.4f} at z = {res.z[0]:+.3f}")

    graph = transition_graph(pf, build_cover(pf.space, None, 6), 0.0, 2.0)
    attractor = [c for c in find_attractors(graph) if 47 in c.boxes][0]
    cert = certify_average_nonshadowing(pf, attractor, [-1.0], 0.5, 6, graph=graph)
    print(f"certificate valid: {cert.valid}; every shadow has average error >= {cert.lower_bound}")
    for c in cert.checks:
        if c["check"] in ("U_forward_invariant", "C_forward_invariant"):
            continue
        print(f"  {c['check']}: ok")
    n_img = sum(c["check"] == "U_forward_invariant" for c in cert.checks)
    print(f"  {n_img} box image checks for the neighbourhood U")


if __name__ == "__main__":
    main()
