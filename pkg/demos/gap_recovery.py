"""
Recovering a time gap.

A pseudo-orbit that follows X_i(z) for i < 0 and then jumps ahead by K = 2
time units is shadowed in the gap sense by the same z with that K. The
searcher scans K on a 0.05 grid and finds it.
"""

import numpy as np

from flowshadow import PseudoOrbit, builtin


from flowshadow.shadow import search_shadowing


def logistic(t, x0):
    return x0 * np.exp(t) / np.sqrt(1 - x0 ** 2 + x0 ** 2 * np.exp(2 * t))


def main():
    pf = builtin("pitchfork1d")
    idx = np.arange(-8, 9)
    pts = np.where(idx < 0, logistic(idx, 0.5), logistic(idx + 2.0, 0.5))
    po = PseudoOrbit(pf, -8, pts[:, None], np.ones(idx.size))
    res = search_shadowing(po, "gap", np.linspace(-2, 2, 4001), N_gap=4.0)
    print(f"recovered K = {res.K:.2f}, z = {res.z[0]:.3f}, tail error = {res.value:.2e}")
    for mode in ("limit", "average"):
        r = search_shadowing(po, mode, np.linspace(-2, 2, 4001))
        print(f"without a gap ({mode}): best error {r.value:.3e}")


if __name__ == "__main__":
    main()
