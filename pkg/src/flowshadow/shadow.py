"""
Shadowing error functionals, the witness search over a candidate grid
and a bounded-slope reparameterization class, and the box-level
certificate that a concatenated pseudo-orbit cannot be shadowed in average.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit

from . import io
from .chain import (AttractorCandidate, BoxCover, BoxGraph, build_cover, find_attractors,
                    reachable, scc, transition_graph)
from .flow import DEFAULT, IntegratorConfig, distance, flow_many, lipschitz_estimate, sample_times
from .sysdef import eval_field
from .pseudo import PseudoOrbit, fit_power_tail

log = logging.getLogger(__name__)

__all__ = [
    "MODES", "Reparameterization", "ReparamClass", "ShadowResult", "NonShadowCertificate",
    "segment_integrals", "error_statistic", "search_shadowing",
    "certify_average_nonshadowing", "box_image_check",
]

MODES = ("uniform", "average", "asymptotic_average", "limit", "gap")
QUANTUM = 0.1
GAP_STEP = 0.05
LADDER = (1.0, 4 / 3, 1.5, 2.0, 3.0, 4.0)


# --------------------------------------------------------------------------
# reparameterizations

@dataclass(frozen=True)
class Reparameterization:
    """Increasing piecewise-linear h with h(0) = 0, slope 1 outside the breakpoints."""

    breakpoints: tuple = ((0.0, 0.0),)
    lam: float = 1.0

    def __post_init__(self):
        bp = sorted((float(u), float(v)) for u, v in self.breakpoints)
        if (0.0, 0.0) not in bp:
            raise ValueError("breakpoints must include (0, 0)")
        u = np.array([p[0] for p in bp])
        v = np.array([p[1] for p in bp])
        if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
            raise ValueError("breakpoints must be strictly increasing in both coordinates")
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        slopes = np.diff(v) / np.diff(u)
        if np.any(slopes < 1 / self.lam - 1e-12) or np.any(slopes > self.lam + 1e-12):
            raise ValueError("a slope lies outside [1/lambda, lambda]")
        object.__setattr__(self, "breakpoints", tuple(bp))

    @classmethod
    def identity(cls) -> "Reparameterization":
        return cls()

    @property
    def is_identity(self) -> bool:
        return len(self.breakpoints) == 1

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_identity:
            return t.copy()
        u = np.array([p[0] for p in self.breakpoints])
        v = np.array([p[1] for p in self.breakpoints])
        out = np.interp(t, u, v)
        out = np.where(t < u[0], v[0] + (t - u[0]), out)
        return np.where(t > u[-1], v[-1] + (t - u[-1]), out)

    def slopes(self) -> np.ndarray:
        u = np.array([p[0] for p in self.breakpoints])
        v = np.array([p[1] for p in self.breakpoints])
        return np.diff(v) / np.diff(u)

    def to_dict(self) -> dict:
        return {"breakpoints": [list(p) for p in self.breakpoints], "lambda": self.lam}

    @classmethod
    def from_dict(cls, d) -> "Reparameterization":
        return cls(tuple(tuple(p) for p in d["breakpoints"]), d.get("lambda", 1.0))


@dataclass(frozen=True)
class ReparamClass:
    """Searched class of h: lattice quantum 0.1, slopes a/b with a, b <= max_pattern in [1/lam, lam],
    and |h(t) - t| <= band."""

    lam: float = 1.0
    band: float = 2.0
    max_pattern: int = 4

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        if self.band < 0:
            raise ValueError("band must be non-negative")

    def patterns(self, lam: float | None = None) -> list[tuple[int, int]]:
        lam = self.lam if lam is None else lam
        out = set()
        for a in range(1, self.max_pattern + 1):
            for b in range(1, self.max_pattern + 1):
                f = Fraction(a, b)
                if f.numerator == a and 1 / lam - 1e-12 <= a / b <= lam + 1e-12:
                    out.add((a, b))
        return sorted(out, key=lambda p: (p[0] / p[1], p))

    def rungs(self) -> list[float]:
        """Slope caps actually reachable with the pattern set, up to lam."""
        caps = sorted({max(a / b, b / a) for a, b in self.patterns()})
        return caps

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "band": self.band, "max_pattern": self.max_pattern, "quantum": QUANTUM}


# --------------------------------------------------------------------------
# segment layout

class _Side:
    """Fine time grid and reference samples of one side of a pseudo-orbit.

    Segments are listed in the order the side's functional indexes them:
    forward i = 0, 1, ..., backward i = 1, 2, ... (segment -i).
    """

    def __init__(self, po: PseudoOrbit, side: str, dq: float, cfg: IntegratorConfig):
        zero = -po.origin
        starts = po.segment_starts()
        if side == "forward":
            pos = list(range(zero, len(po)))
        elif side == "backward":
            pos = list(range(zero - 1, -1, -1))
        else:
            raise ValueError("side must be 'forward' or 'backward'")
        self.side = side
        self.pos = pos
        self.dq = dq
        self.dur = np.array([po.durations[p] for p in pos])
        self.start = np.array([starts[p] for p in pos])
        self.m = np.maximum(1, np.ceil(self.dur / dq - 1e-9).astype(np.int64))
        self.lattice = bool(np.all(np.abs(self.m * dq - self.dur) < 1e-9)
                            and np.all(np.abs(np.rint(self.start / dq) * dq - self.start) < 1e-9))
        self.start_idx = np.rint(self.start / dq).astype(np.int64) if self.lattice else None
        self.ref = []
        for dur_val in np.unique(self.dur):
            sel = np.flatnonzero(self.dur == dur_val)
            m = int(self.m[sel[0]])
            tau = np.arange(m + 1) * dq if self.lattice else np.linspace(0.0, dur_val, m + 1)
            pts = np.array([po.points[pos[j]] for j in sel])
            R = sample_times(po.system, pts, tau, cfg)
            if np.isnan(R).any():
                raise ValueError("reference segment escaped the state space")
            for j, r in zip(sel, R):
                self.ref.append((int(j), r))
        self.ref = [r for _, r in sorted(self.ref, key=lambda p: p[0])]

    def __len__(self):
        return len(self.pos)

    def abs_times(self, j: int) -> np.ndarray:
        m = int(self.m[j])
        if self.lattice:
            return (self.start_idx[j] + np.arange(m + 1)) * self.dq
        return self.start[j] + np.linspace(0.0, self.dur[j], m + 1)

    def abs_idx(self, j: int) -> np.ndarray:
        return self.start_idx[j] + np.arange(int(self.m[j]) + 1)

    def reduce(self, j: int, D: np.ndarray, kind: str) -> np.ndarray:
        """Trapezoid integral (or sup) over the last axis."""
        if kind == "sup":
            return D.max(axis=-1)
        hstep = self.dur[j] / self.m[j]
        return hstep * (D.sum(axis=-1) - 0.5 * (D[..., 0] + D[..., -1]))


def _sides(po: PseudoOrbit, cfg: IntegratorConfig):
    dq = cfg.quad_step
    fwd = _Side(po, "forward", dq, cfg)
    bwd = _Side(po, "backward", dq, cfg) if po.origin < 0 else None
    return fwd, bwd


def _values_at(spec, side: _Side, Z, hfun, kind, cfg, shift_idx: int = 0):
    """Per-segment values for each row of Z; `hfun` maps absolute times (identity if None)."""
    out = np.empty((Z.shape[0], len(side)))
    if hfun is None and side.lattice:
        idx = np.concatenate([side.abs_idx(j) for j in range(len(side))]) + shift_idx
        uniq, inv = np.unique(idx, return_inverse=True)
        S = sample_times(spec, Z, uniq * side.dq, cfg)
        off = 0
        for j in range(len(side)):
            n = int(side.m[j]) + 1
            D = distance(spec.space, S[:, inv[off:off + n], :], side.ref[j][None])
            out[:, j] = side.reduce(j, D, kind)
            off += n
        return out
    if shift_idx:
        raise ValueError("a time shift needs lattice-aligned durations")
    times = np.concatenate([side.abs_times(j) for j in range(len(side))])
    ht = times if hfun is None else hfun(times)
    uniq, inv = np.unique(ht, return_inverse=True)
    S = sample_times(spec, Z, uniq, cfg)
    off = 0
    for j in range(len(side)):
        n = int(side.m[j]) + 1
        D = distance(spec.space, S[:, inv[off:off + n], :], side.ref[j][None])
        out[:, j] = side.reduce(j, D, kind)
        off += n
    return out


def segment_integrals(po: PseudoOrbit, z, h: Reparameterization | None = None, K: float | None = None,
                      side: str = "forward", cfg: IntegratorConfig = DEFAULT, kind: str = "integral") -> np.ndarray:
    """Per-segment tracking errors of the orbit of z against the pseudo-orbit.

    forward: i = 0..i_max, integral over [s_i, s_{i+1}] of d(X_{h(t)}(z), X_{t - s_i}(x_i));
    backward: i = 1..-i_min, the same over segment -i. With `K` set (gap
    mode) h(t) = t + K forward and h(t) = t backward. `kind` = "sup"
    replaces each integral by the sampled maximum.
    """
    if kind not in ("integral", "sup"):
        raise ValueError("kind must be 'integral' or 'sup'")
    if h is not None and K is not None:
        raise ValueError("give either h or a gap K, not both")
    spec = po.system
    sd = _Side(po, side, cfg.quad_step, cfg)
    if len(sd) == 0:
        raise ValueError(f"the window has no {side} segments")
    Z = np.asarray(z, dtype=float).reshape(1, spec.dim)
    if K is not None and side == "forward" and K != 0:
        kq = K / sd.dq
        if sd.lattice and abs(round(kq) - kq) < 1e-9:
            return _values_at(spec, sd, Z, None, kind, cfg, int(round(kq)))[0]
        return _values_at(spec, sd, Z, lambda t: t + K, kind, cfg)[0]
    hfun = None if (h is None or h.is_identity) else h
    return _values_at(spec, sd, Z, hfun, kind, cfg)[0]


# --------------------------------------------------------------------------
# statistics

def _stat_rows(V: np.ndarray, mode: str) -> np.ndarray:
    V = np.atleast_2d(V)
    L = V.shape[1]
    if L == 0:
        raise ValueError("empty per-segment sequence")
    if mode == "uniform":
        return V.max(axis=1)
    if mode == "average":
        means = np.cumsum(V, axis=1) / np.arange(1, L + 1)
        return means[:, max(1, L // 2) - 1:].max(axis=1)
    if mode == "asymptotic_average":
        return V.sum(axis=1) / L
    if mode in ("limit", "gap"):
        q = max(1, L // 4)
        return V[:, L - q:].max(axis=1)
    raise ValueError(f"unknown mode {mode!r}")


def error_statistic(per_segment, mode: str) -> float:
    """Desk-scale statistic of a per-segment error sequence v_1..v_L.

    uniform: max; average: max of running means over n in [L//2, L];
    asymptotic_average: the final running mean; limit and gap: max over the
    last quarter.
    """
    v = np.asarray(per_segment, dtype=float).ravel()
    return float(_stat_rows(v[None, :], mode)[0])


def tail_slope(per_segment) -> float | None:
    """Fitted decay exponent p of the running means (means ~ c n^-p)."""
    v = np.asarray(per_segment, dtype=float)
    means = np.cumsum(v) / np.arange(1, v.size + 1)
    fit = fit_power_tail(np.arange(1, v.size + 1), means)
    return None if fit is None else fit[1]


def _combine(mode, fwd_vals, bwd_vals):
    """Mode value of one candidate from its per-side per-segment arrays (rows = candidates)."""
    f = fwd_vals if mode == "uniform" else fwd_vals[:, 1:]
    if f.shape[1] == 0:
        raise ValueError("the window is too short on the forward side for this mode")
    val = _stat_rows(f, mode)
    if bwd_vals is not None and bwd_vals.shape[1]:
        val = np.maximum(val, _stat_rows(bwd_vals, mode))
    return val


# --------------------------------------------------------------------------
# results

@dataclass
class ShadowResult:
    mode: str
    z: list
    h: Reparameterization
    K: float | None
    value: float
    per_segment: dict
    z_index: int
    candidate_values: np.ndarray
    config: dict = field(default_factory=dict)
    tail_slope: float | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        return io.plain({
            "schema_version": io.SCHEMA_VERSION, "kind": "shadow_result", "mode": self.mode,
            "z": self.z, "z_index": self.z_index, "h": self.h.to_dict(), "K": self.K, "value": self.value,
            "per_segment": self.per_segment, "tail_slope": self.tail_slope,
            "candidate_min": float(np.min(self.candidate_values)),
            "n_candidates": int(len(self.candidate_values)), "config": self.config, "notes": self.notes,
        })


def _evaluate(po, mode, z, h, K, cfg):
    """Exact per-side values and the mode value at one (z, h, K)."""
    kind = "sup" if mode == "uniform" else "integral"
    gapK = K if mode == "gap" else None
    f = segment_integrals(po, z, h, gapK, "forward", cfg, kind)
    b = segment_integrals(po, z, h, None, "backward", cfg, kind) if po.origin < 0 else None
    val = float(_combine(mode, f[None, :], None if b is None else b[None, :])[0])
    per = {"forward": f.tolist()}
    if b is not None:
        per["backward"] = b.tolist()
    return val, per


def search_shadowing(po: PseudoOrbit, mode: str, candidate_grid, reparam: ReparamClass | None = None,
                     N_gap: float = 4.0, cfg: IntegratorConfig = DEFAULT, chunk: int = 256) -> ShadowResult:
    """Exact minimizer of the mode statistic over the candidate grid and the searched h class.

    With lam = 1 only h = id is searched (every candidate is evaluated
    exactly). With lam > 1 each slope rung up to lam is searched by dynamic
    programming on the 0.1 time lattice; the chosen (z, h) of each rung is
    re-evaluated exactly and the best exact value is returned. Gap mode
    searches K on a 0.05 grid in [-N_gap, N_gap] with h = id.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    spec = po.system
    Z = np.array(candidate_grid, dtype=float).reshape(-1, spec.dim)
    if Z.shape[0] == 0:
        raise ValueError("empty candidate grid")
    reparam = ReparamClass() if reparam is None else reparam
    if N_gap < 0:
        raise ValueError("N_gap must be non-negative")
    fwd, bwd = _sides(po, cfg)
    if len(fwd) < (1 if mode == "uniform" else 2):
        raise ValueError("window has too few forward segments for this mode")
    kind = "sup" if mode == "uniform" else "integral"
    config = {"mode": mode, "reparam": reparam.to_dict(), "N_gap": N_gap if mode == "gap" else None,
              "gap_step": GAP_STEP if mode == "gap" else None, "n_candidates": int(Z.shape[0]),
              "step": cfg.step, "quad_step": cfg.quad_step}

    if mode == "gap":
        if not fwd.lattice:
            raise ValueError("gap search needs durations on the quadrature lattice")
        nK = int(math.floor(N_gap / GAP_STEP + 1e-9))
        kq = int(round(GAP_STEP / fwd.dq))
        Ks = np.arange(-nK, nK + 1)
        best = np.full(Z.shape[0], np.inf)
        bestK = np.zeros(Z.shape[0], dtype=np.int64)
        for s in range(0, Z.shape[0], chunk):
            Zc = Z[s:s + chunk]
            bv = _values_at(spec, bwd, Zc, None, kind, cfg) if bwd is not None and len(bwd) else None
            bstat = _stat_rows(bv, mode) if bv is not None else np.zeros(Zc.shape[0])
            fv_all = _gap_forward(spec, fwd, Zc, Ks * kq, kind, cfg)
            for ki, fv in enumerate(fv_all):
                val = np.maximum(_stat_rows(fv[:, 1:], mode), bstat)
                val = np.where(np.isnan(val), np.inf, val)
                better = val < best[s:s + chunk]
                best[s:s + chunk] = np.where(better, val, best[s:s + chunk])
                bestK[s:s + chunk] = np.where(better, Ks[ki], bestK[s:s + chunk])
        zi = int(np.lexsort((bestK, np.arange(Z.shape[0]), best))[0])
        K = float(bestK[zi] * GAP_STEP)
        val, per = _evaluate(po, mode, Z[zi], None, K, cfg)
        return ShadowResult(mode, Z[zi].tolist(), Reparameterization.identity(), K, val, per, zi, best, config)

    # identity h, exact over the whole grid
    vals = np.empty(Z.shape[0])
    for s in range(0, Z.shape[0], chunk):
        Zc = Z[s:s + chunk]
        fv = _values_at(spec, fwd, Zc, None, kind, cfg)
        bv = _values_at(spec, bwd, Zc, None, kind, cfg) if bwd is not None and len(bwd) else None
        vals[s:s + chunk] = _combine(mode, fv, bv)
    vals = np.where(np.isnan(vals), np.inf, vals)
    zi = int(np.lexsort((np.arange(Z.shape[0]), vals))[0])
    best_val, best_per = _evaluate(po, mode, Z[zi], None, None, cfg)
    best_h, best_zi = Reparameterization.identity(), zi
    cand = vals.copy()
    notes = ""
    if reparam.lam > 1:
        if not fwd.lattice or not _on_quantum(fwd) or (bwd is not None and not _on_quantum(bwd)):
            raise ValueError("warped search needs durations on the 0.1 lattice")
        for rung in reparam.rungs():
            if rung <= 1:
                continue
            h_rows, approx = _warp_search(po, mode, Z, reparam, rung, fwd, bwd, cfg)
            cand = np.minimum(cand, approx)
            ri = int(np.lexsort((np.arange(Z.shape[0]), approx))[0])
            h = h_rows[ri]
            v, per = _evaluate(po, mode, Z[ri], h, None, cfg)
            if v < best_val:
                best_val, best_per, best_h, best_zi = v, per, h, ri
        notes = "shadowed within the searched class" if best_val < math.inf else ""
    res = ShadowResult(mode, Z[best_zi].tolist(), best_h, None, best_val, best_per, best_zi, cand, config, notes=notes)
    if mode == "asymptotic_average":
        res.tail_slope = tail_slope(best_per["forward"][1:])
    return res


def _gap_forward(spec, side: _Side, Z, shifts, kind, cfg):
    """Forward per-segment values for every lattice shift (one array per shift)."""
    base = np.concatenate([side.abs_idx(j) for j in range(len(side))])
    lo = int(base.min() + min(shifts.min(), 0))
    hi = int(base.max() + max(shifts.max(), 0))
    idx = np.arange(lo, hi + 1)
    S = sample_times(spec, Z, idx * side.dq, cfg)
    out = []
    for sh in shifts:
        vals = np.empty((Z.shape[0], len(side)))
        for j in range(len(side)):
            cols = side.abs_idx(j) + sh - lo
            D = distance(spec.space, S[:, cols, :], side.ref[j][None])
            vals[:, j] = side.reduce(j, D, kind)
        out.append(vals)
    return out


def _on_quantum(side: _Side) -> bool:
    r = QUANTUM / side.dq
    return bool(np.all(side.m % int(round(r)) == 0) and np.all(side.start_idx % int(round(r)) == 0))


# --------------------------------------------------------------------------
# warping dynamic program

@njit(cache=False, nogil=True)
def _dp_side(shadow, ref, seg_q, r, dq, pats, B, is_torus, per, bottleneck):
    """Monotone lattice DP for one candidate and one side.

    shadow: (Ns, d) samples at fine indices 0..Ns-1 along the side's
    direction; ref: (nseg, Lmax*r+1, d) oriented reference samples; seg_q:
    (nseg+1,) segment boundaries in quanta. Returns per-segment costs and
    the path as (q, s) quanta.
    """
    nseg = seg_q.shape[0] - 1
    Q = seg_q[nseg]
    W = 2 * B + 1
    INF = 1e300
    dp = np.full((Q + 1, W), INF)
    back = np.full((Q + 1, W, 2), -1, dtype=np.int64)
    dp[0, B] = 0.0
    d = shadow.shape[1]
    Ns = shadow.shape[0]
    seg_of = np.empty(Q, dtype=np.int64)
    for j in range(nseg):
        for q in range(seg_q[j], seg_q[j + 1]):
            seg_of[q] = j
    for q in range(Q):
        j = seg_of[q]
        qend = seg_q[j + 1]
        for w in range(W):
            c0 = dp[q, w]
            if c0 >= INF:
                continue
            s = q + w - B
            for p in range(pats.shape[0]):
                a = pats[p, 0]
                b = pats[p, 1]
                q2 = q + b
                if q2 > qend:
                    continue
                s2 = s + a
                w2 = s2 - q2 + B
                if w2 < 0 or w2 >= W or s2 * r >= Ns:
                    continue
                nk = b * r
                cost = 0.0
                for k in range(nk + 1):
                    pos = s * r + (a * k) / b
                    i0 = int(math.floor(pos))
                    fr = pos - i0
                    if i0 + 1 >= Ns:
                        i0 = Ns - 2
                        fr = 1.0
                    tloc = (q - seg_q[j]) * r + k
                    acc = 0.0
                    for c in range(d):
                        v = shadow[i0, c] * (1.0 - fr) + shadow[i0 + 1, c] * fr
                        diff = abs(v - ref[j, tloc, c])
                        if is_torus:
                            diff = diff % per[c]
                            if per[c] - diff < diff:
                                diff = per[c] - diff
                        acc += diff * diff
                    dist = math.sqrt(acc)
                    if bottleneck:
                        if dist > cost:
                            cost = dist
                    else:
                        wk = 0.5 if (k == 0 or k == nk) else 1.0
                        cost += wk * dist * dq
                tot = max(c0, cost) if bottleneck else c0 + cost
                if tot < dp[q2, w2]:
                    dp[q2, w2] = tot
                    back[q2, w2, 0] = q
                    back[q2, w2, 1] = w
    bw = 0
    for w in range(W):
        if dp[Q, w] < dp[Q, bw]:
            bw = w
    path = np.empty((Q + 1, 2), dtype=np.int64)
    n = 0
    q = Q
    w = bw
    while q >= 0 and w >= 0:
        path[n, 0] = q
        path[n, 1] = q + w - B
        n += 1
        if q == 0:
            break
        q, w = back[q, w, 0], back[q, w, 1]
    path = path[:n][::-1].copy()
    # per-segment costs along the path
    segc = np.zeros(nseg)
    for t in range(path.shape[0] - 1):
        q0, s0 = path[t, 0], path[t, 1]
        q1, s1 = path[t + 1, 0], path[t + 1, 1]
        j = seg_of[q0]
        a = s1 - s0
        b = q1 - q0
        nk = b * r
        cost = 0.0
        for k in range(nk + 1):
            pos = s0 * r + (a * k) / b
            i0 = int(math.floor(pos))
            fr = pos - i0
            if i0 + 1 >= Ns:
                i0 = Ns - 2
                fr = 1.0
            tloc = (q0 - seg_q[j]) * r + k
            acc = 0.0
            for c in range(d):
                v = shadow[i0, c] * (1.0 - fr) + shadow[i0 + 1, c] * fr
                diff = abs(v - ref[j, tloc, c])
                if is_torus:
                    diff = diff % per[c]
                    if per[c] - diff < diff:
                        diff = per[c] - diff
                acc += diff * diff
            dist = math.sqrt(acc)
            if bottleneck:
                if dist > segc[j]:
                    segc[j] = dist
            else:
                wk = 0.5 if (k == 0 or k == nk) else 1.0
                segc[j] += wk * dist * dq
    return segc, path


def _side_arrays(side: _Side, sign: int):
    r = int(round(QUANTUM / side.dq))
    Lq = (side.m // r).astype(np.int64)
    seg_q = np.concatenate([[0], np.cumsum(Lq)]).astype(np.int64)
    Lmax = int(Lq.max())
    ref = np.zeros((len(side), Lmax * r + 1, side.ref[0].shape[1]))
    for j, R in enumerate(side.ref):
        ref[j, :R.shape[0]] = R if sign > 0 else R[::-1]
    return r, seg_q, ref


def _warp_search(po, mode, Z, reparam: ReparamClass, rung: float, fwd: _Side, bwd: _Side | None, cfg):
    """DP-optimal h per candidate for one slope rung; returns (h per row, approximate mode values)."""
    spec = po.system
    pats = np.array(reparam.patterns(rung), dtype=np.int64)
    B = int(round(reparam.band / QUANTUM))
    bottleneck = mode == "uniform"
    per = spec.space.periods if spec.space.is_torus else np.ones(spec.dim)
    sides = [(fwd, 1)] + ([(bwd, -1)] if bwd is not None and len(bwd) else [])
    prepared = []
    for sd, sign in sides:
        r, seg_q, ref = _side_arrays(sd, sign)
        Ns = (int(seg_q[-1]) + B) * r + 2
        times = sign * np.arange(Ns) * sd.dq
        prepared.append((sd, sign, r, seg_q, ref, times))
    hs, approx = [], np.empty(Z.shape[0])
    for zi in range(Z.shape[0]):
        side_vals, bps = [], [(0.0, 0.0)]
        for sd, sign, r, seg_q, ref, times in prepared:
            S = sample_times(spec, Z[zi:zi + 1], times, cfg)[0]
            if np.isnan(S).any():
                # escape: keep the valid prefix finite and mark the candidate bad
                side_vals.append(np.full(len(sd), np.inf))
                continue
            if spec.space.is_torus:
                S = np.unwrap(S, axis=0, period=per)
            segc, path = _dp_side(S, ref, seg_q, r, sd.dq, pats, B, spec.space.is_torus, per, bottleneck)
            side_vals.append(segc)
            for q, s in path[1:]:
                bps.append((sign * q * QUANTUM, sign * s * QUANTUM))
        f = side_vals[0][None, :]
        b = side_vals[1][None, :] if len(side_vals) > 1 else None
        approx[zi] = _combine(mode, f, b)[0]
        hs.append(_collapse(bps, rung))
    approx = np.where(np.isnan(approx), np.inf, approx)
    return hs, approx


def _collapse(bps, lam) -> Reparameterization:
    """Drop collinear breakpoints."""
    bps = sorted(set(bps))
    keep = [bps[0]]
    for i in range(1, len(bps) - 1):
        (u0, v0), (u1, v1), (u2, v2) = keep[-1], bps[i], bps[i + 1]
        if abs((v1 - v0) * (u2 - u1) - (v2 - v1) * (u1 - u0)) > 1e-12 or (u1, v1) == (0.0, 0.0):
            keep.append(bps[i])
    if len(bps) > 1:
        keep.append(bps[-1])
    return Reparameterization(tuple(keep), lam)


# --------------------------------------------------------------------------
# non-shadowing certificate

@dataclass
class NonShadowCertificate:
    valid: bool
    epsilon0: float
    system: str
    b: list
    depth: int
    attractor_boxes: list
    neighborhood_boxes: list
    complement_boxes: list
    margin: float
    lipschitz: dict
    checks: list
    failure: dict | None = None
    lower_bound: float | None = None
    system_params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["schema_version"] = io.SCHEMA_VERSION
        d["kind"] = "nonshadow_certificate"
        return io.plain(d)


def box_image_check(spec, cover: BoxCover, box: int, target: set, L: float, cfg: IntegratorConfig,
                    r: int, T: float = 1.0) -> dict:
    """One box's time-T image containment record.

    The box is split into r**dim cells; each cell center c is flowed and the
    ball of radius e^{L T} * rho + 1e-9 around X_T(c), rho the cell half
    diagonal, must touch only boxes of `target` and stay in the region.
    """
    lo, hi = cover.bounds(box)
    w = (hi - lo) / r
    grids = np.meshgrid(*[lo[k] + (np.arange(r) + 0.5) * w[k] for k in range(spec.dim)], indexing="ij")
    C = np.stack([g.ravel() for g in grids], axis=-1)
    Y, ex = flow_many(spec, C, T, cfg)
    rho = 0.5 * float(np.linalg.norm(w))
    radius = math.exp(L * T) * rho + 1e-9
    rec = {"box": int(box), "r": int(r), "rho": rho, "radius": radius, "ok": False}
    if np.isnan(ex).sum() != ex.size:
        rec["reason"] = "escape"
        return rec
    rec["image_lo"] = (Y.min(axis=0) - radius).tolist()
    rec["image_hi"] = (Y.max(axis=0) + radius).tolist()
    if not cover.wraps and (np.any(Y - radius < cover.lo) or np.any(Y + radius > cover.hi)):
        rec["reason"] = "image leaves the region"
        return rec
    _, bi = cover.near(Y, radius)
    outside = sorted(set(np.unique(bi).tolist()) - target)
    rec["ok"] = not outside
    if outside:
        rec["reason"] = f"image touches boxes outside the target set: {outside[:8]}"
    return rec


def _invariance_checks(spec, cover, boxes, L, cfg, label, max_cells):
    target = set(int(b) for b in boxes)
    recs = []
    for bx in boxes:
        r = 4
        while True:
            rec = box_image_check(spec, cover, int(bx), target, L, cfg, r)
            rec["check"] = label
            if rec["ok"] or r ** spec.dim * 2 ** spec.dim > max_cells or rec.get("reason") == "escape":
                break
            r *= 2
        recs.append(rec)
        if not rec["ok"]:
            break
    return recs


def _local_lipschitz(spec, cover, boxes):
    if cover.wraps:
        return lipschitz_estimate(spec, None, 64 if spec.dim > 1 else 401), None
    lo, hi = cover.hull(boxes)
    lo = np.maximum(lo - cover.widths, spec.space.lo)
    hi = np.minimum(hi + cover.widths, spec.space.hi)
    reg = tuple(zip(lo.tolist(), hi.tolist()))
    return lipschitz_estimate(spec, reg, 64 if spec.dim > 1 else 401), reg


def certify_average_nonshadowing(spec, attractor, b, epsilon0: float, depth: int = 6,
                                 cfg: IntegratorConfig = DEFAULT, graph: BoxGraph | None = None,
                                 T_edge: float = 2.0, max_cells: int = 1 << 16) -> NonShadowCertificate:
    """Box-level evidence that concat_ab(a in A, b) has no shadow in average at level epsilon0/2.

    Checks, in order: the candidate is a proper attractor; b lies in the
    region and outside the graph basin (or is an equilibrium outside A);
    the epsilon0-inflation of A stays in the basin boxes; U = boxes within
    epsilon0/2 of A maps into itself at time 1 with a Groenwall margin;
    the forward closure C of b is invariant (equilibrium or checked boxes);
    C misses the epsilon0-inflation of A and lies at least epsilon0/2 from U.
    The first failed check is returned as `failure`.
    """
    if epsilon0 <= 0:
        raise ValueError("epsilon0 must be positive")
    cover = build_cover(spec.space, spec.region, depth) if graph is None else graph.cover
    if graph is None:
        graph = transition_graph(spec, cover, 0.0, T_edge, cfg=cfg)
    sccs = scc(graph)
    cands = find_attractors(graph, sccs)
    if isinstance(attractor, AttractorCandidate):
        cand = attractor
    else:
        want = set(int(v) for v in np.atleast_1d(attractor))
        match = [c for c in cands if set(c.boxes.tolist()) == want or want <= set(c.boxes.tolist())]
        cand = match[0] if match else None
    b = np.asarray(b, dtype=float).reshape(spec.dim)
    checks: list = []
    cert = NonShadowCertificate(False, float(epsilon0), spec.name, b.tolist(), depth,
                                [] if cand is None else cand.boxes.tolist(), [], [], 0.0, {}, checks,
                                system_params=dict(spec.params))

    def fail(rec):
        rec["ok"] = False
        checks.append(rec)
        cert.failure = rec
        return cert

    if cand is None:
        return fail({"check": "precondition", "reason": "boxes do not form an attractor candidate of the graph"})
    if not cand.proper:
        return fail({"check": "precondition", "reason": "attractor candidate is not proper"})
    checks.append({"check": "proper_attractor", "ok": True, "repellers": [r.tolist() for r in cand.repellers]})
    if not np.all(spec.space.contains(b[None, :], 1e-12)):
        return fail({"check": "b_in_region", "reason": "b lies outside the region"})
    _, bboxes = cover.locate(b[None, :])
    fb = eval_field(spec, b)
    is_eq = float(np.linalg.norm(fb)) <= 1e-12
    in_basin = bool(np.isin(bboxes, cand.basin).any())
    in_A = bool(np.isin(bboxes, cand.boxes).any())
    rec = {"check": "b_outside_basin", "b_boxes": bboxes.tolist(), "in_graph_basin": in_basin,
           "equilibrium": is_eq, "field_norm": float(np.linalg.norm(fb))}
    if in_A or (in_basin and not is_eq):
        return fail(dict(rec, reason="b lies in the graph basin of A and is not an equilibrium outside A"))
    rec["ok"] = True
    checks.append(rec)

    A = cand.boxes
    infl = cover.inflate(A, epsilon0, strict=True)
    rec = {"check": "inflation_in_basin", "inflation_boxes": int(infl.size)}
    if not cover.wraps:
        lo, hi = cover.hull(A)
        if np.any(lo - epsilon0 < spec.space.lo) or np.any(hi + epsilon0 > spec.space.hi):
            return fail(dict(rec, reason="epsilon0-inflation of A leaves the isolated region"))
    if not np.isin(infl, cand.basin).all():
        return fail(dict(rec, reason="epsilon0-inflation of A is not inside the basin boxes"))
    rec["ok"] = True
    checks.append(rec)

    U = cover.inflate(A, epsilon0 / 2, strict=True)
    cert.neighborhood_boxes = U.tolist()
    L, reg = _local_lipschitz(spec, cover, cover.inflate(U))
    cert.lipschitz = {"U": L, "U_region": reg}
    cert.margin = math.exp(L) * 0.5 * float(np.linalg.norm(cover.widths))
    recs = _invariance_checks(spec, cover, U, L, cfg, "U_forward_invariant", max_cells)
    checks.extend(recs)
    if not recs[-1]["ok"]:
        cert.failure = recs[-1]
        return cert

    if is_eq:
        C = bboxes
        checks.append({"check": "C_invariant", "ok": True, "evidence": "b is an equilibrium",
                       "field_norm": float(np.linalg.norm(fb))})
    else:
        C = reachable(graph, bboxes)
        LC, regC = _local_lipschitz(spec, cover, cover.inflate(C))
        cert.lipschitz["C"] = LC
        recs = _invariance_checks(spec, cover, C, LC, cfg, "C_forward_invariant", max_cells)
        checks.extend(recs)
        if not recs[-1]["ok"]:
            cert.complement_boxes = C.tolist()
            cert.failure = recs[-1]
            return cert
    cert.complement_boxes = C.tolist()
    hit = np.intersect1d(C, infl)
    if hit.size:
        return fail({"check": "C_disjoint", "reason": f"C meets the epsilon0-inflation of A at {hit[:8].tolist()}"})
    checks.append({"check": "C_disjoint", "ok": True})
    gap = float(cover.box_distance(U[:, None], C[None, :]).min())
    if gap < epsilon0 / 2:
        return fail({"check": "gap", "gap": gap, "reason": "U and C are closer than epsilon0/2"})
    checks.append({"check": "gap", "ok": True, "gap": gap})
    cert.valid = True
    cert.lower_bound = epsilon0 / 2
    return cert
