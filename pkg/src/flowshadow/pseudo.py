"""
Pseudo-orbits on finite index windows, their jump defects, finite-window
classifiers for each pseudo-orbit class, and the concatenation
constructions used to build non-shadowable and limit pseudo-orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import io
from .flow import DEFAULT, EscapeError, IntegratorConfig, distance, flow_many, flow_to
from .sysdef import SystemSpec, builtin

__all__ = [
    "PseudoOrbit", "ClassificationReport", "KINDS", "defects", "classify",
    "make_concat_ab", "make_alpha_beta", "perturb_orbit", "fit_power_tail",
]

KINDS = ("delta_pseudo", "delta_average", "asymptotic_average", "limit", "positive_limit")
MIN_WINDOW = 8


@dataclass(frozen=True, eq=False)
class PseudoOrbit:
    """Points x_i and durations t_i for i = origin, ..., origin + len - 1."""

    system: SystemSpec
    origin: int
    points: np.ndarray
    durations: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        dur = np.array(self.durations, dtype=float).ravel()
        if pts.shape[1] != self.system.dim:
            raise ValueError("point dimension does not match the system")
        if pts.shape[0] != dur.size:
            raise ValueError("points and durations must have equal length")
        if pts.shape[0] == 0:
            raise ValueError("empty pseudo-orbit")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(dur)):
            raise ValueError("non-finite values in pseudo-orbit")
        if np.any(dur < 1):
            raise ValueError("durations must be >= 1")
        pts = self.system.space.normalize(pts)
        lo, hi = self.system.region_lo, self.system.region_hi
        if np.any(pts < lo - 1e-9) or np.any(pts > hi + 1e-9):
            raise ValueError("pseudo-orbit leaves the isolated region")
        pts.setflags(write=False)
        dur.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "durations", dur)
        object.__setattr__(self, "origin", int(self.origin))

    def __len__(self):
        return self.points.shape[0]

    @property
    def i_min(self) -> int:
        return self.origin

    @property
    def i_max(self) -> int:
        return self.origin + len(self) - 1

    @property
    def one_sided(self) -> bool:
        return self.origin >= 0

    def x(self, i: int) -> np.ndarray:
        return self.points[i - self.origin]

    def t(self, i: int) -> float:
        return float(self.durations[i - self.origin])

    def s(self, n: int) -> float:
        """Cumulative time: s_0 = 0, s_n = t_0 + ... + t_{n-1}, s_{-n} = t_{-n} + ... + t_{-1}."""
        if n == 0:
            return 0.0
        if n > 0:
            return float(sum(self.t(i) for i in range(0, n)))
        return float(sum(self.t(i) for i in range(n, 0)))

    def segment_start(self, i: int) -> float:
        """Signed start time of segment i on the shadowing time axis."""
        return self.s(i) if i >= 0 else -self.s(i)

    def segment_starts(self) -> np.ndarray:
        """Signed start times S_i for every index in the window, in order.

        S_0 = 0, S_i = s_i for i > 0 and S_i = -s_{-i} for i < 0, so segment i
        occupies [S_i, S_i + t_i].
        """
        n = len(self)
        zero = -self.origin
        starts = np.empty(n)
        if zero < 0:
            raise ValueError("window must contain index 0 to place segments in time")
        if zero == 0:
            starts[:] = np.concatenate([[0.0], np.cumsum(self.durations[:-1])])
            return starts
        fwd = self.durations[zero:]
        starts[zero:] = np.concatenate([[0.0], np.cumsum(fwd[:-1])])
        starts[:zero] = -np.cumsum(self.durations[:zero][::-1])[::-1]
        return starts

    def to_dict(self) -> dict:
        d = {
            "schema_version": io.SCHEMA_VERSION,
            "system": self.system.name,
            "origin": self.origin,
            "durations": self.durations.tolist(),
            "points": self.points.tolist(),
        }
        if self.system.params:
            d["system_params"] = dict(self.system.params)
        if self.meta:
            d["meta"] = io.plain(self.meta)
        return d

    @classmethod
    def from_dict(cls, d: dict, system: SystemSpec | None = None) -> "PseudoOrbit":
        if system is None:
            system = builtin(d["system"], d.get("system_params", {}))
        elif system.name != d["system"]:
            raise ValueError(f"pseudo-orbit was made for {d['system']!r}, not {system.name!r}")
        return cls(system, int(d["origin"]), np.array(d["points"], dtype=float), np.array(d["durations"], dtype=float),
                   meta=dict(d.get("meta", {})))

    def save(self, path) -> None:
        io.write_atomic(path, io.dumps(self.to_dict()))

    @classmethod
    def load(cls, path, system: SystemSpec | None = None) -> "PseudoOrbit":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(io.loads(fh.read()), system)


def defects(po: PseudoOrbit, cfg: IntegratorConfig = DEFAULT) -> np.ndarray:
    """d(X_{t_i}(x_i), x_{i+1}) for i = i_min .. i_max - 1."""
    if len(po) < 2:
        raise ValueError("need at least two points for defects")
    Y, exit_t = flow_many(po.system, po.points[:-1], po.durations[:-1], cfg)
    bad = np.flatnonzero(~np.isnan(exit_t))
    if bad.size:
        raise EscapeError(exit_t[bad[0]], po.points[bad[0]])
    return distance(po.system.space, Y, po.points[1:])


# --------------------------------------------------------------------------
# classification

@dataclass
class ClassificationReport:
    kind: str
    verdict: str
    delta: float | None
    window_N: int | None
    defect_sequence: list
    fit: tuple | None = None
    tail_tol: float = 1e-3
    tail_fraction: float = 0.25
    one_sided: bool = False
    partial_averages: list | None = None
    notes: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return io.plain(dataclass_dict(self))


def dataclass_dict(obj) -> dict:
    return {k: getattr(obj, k) for k in obj.__dataclass_fields__}


def fit_power_tail(n, values):
    """Fit values ~ c * n^(-p); returns (c, p) with c the tightest bound for that p.

    Only positive values enter the regression. Returns None when fewer than
    two positive values exist.
    """
    n = np.asarray(n, dtype=float)
    v = np.asarray(values, dtype=float)
    pos = v > 0
    if pos.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(n[pos]), np.log(v[pos]), 1)
    p = -float(slope)
    c = float(np.max(v[pos] * n[pos] ** p))
    return (c, p)


def _window_max_means(d: np.ndarray) -> np.ndarray:
    """M[n-1] = max over k of the mean of n consecutive defects."""
    L = d.size
    cs = np.concatenate([[0.0], np.cumsum(d)])
    M = np.empty(L)
    for n in range(1, L + 1):
        M[n - 1] = np.max(cs[n:] - cs[:-n]) / n
    return M


def _side_tail(values: np.ndarray, frac: float, outer_first: bool):
    """(tail, preceding block) of one side, tail being the outermost `frac`."""
    m = max(1, int(math.ceil(frac * values.size)))
    if outer_first:
        return values[:m], values[m:2 * m]
    return values[-m:], values[-2 * m:-m]


def _side_fit(values: np.ndarray, outer_first: bool):
    """Power fit of one side's defects against distance from index 0."""
    v = values[::-1] if outer_first else values
    return fit_power_tail(np.arange(1, v.size + 1), v)


def classify(po: PseudoOrbit, kind: str, delta: float | None = None, cfg: IntegratorConfig = DEFAULT,
             tail_tol: float = 1e-3, tail_fraction: float = 0.25) -> ClassificationReport:
    """Decide a pseudo-orbit class on the finite window.

    Limit-type verdicts are tri-state; "inconclusive" means the window does
    not settle the question at the configured tolerances.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    if kind in ("delta_pseudo", "delta_average") and (delta is None or delta <= 0):
        raise ValueError(f"{kind} needs a positive delta")
    if kind != "delta_pseudo" and len(po) < MIN_WINDOW:
        raise ValueError(f"window too short for {kind} (need >= {MIN_WINDOW} points)")
    d = defects(po, cfg)
    rep = ClassificationReport(kind, "inconclusive", delta, None, d.tolist(),
                               tail_tol=tail_tol, tail_fraction=tail_fraction,
                               one_sided=po.one_sided)

    if kind == "delta_pseudo":
        rep.verdict = "holds" if float(d.max()) < delta else "fails"
        return rep

    if kind == "delta_average":
        M = _window_max_means(d)
        ok = M < delta
        if not ok[-1]:
            rep.verdict = "fails"
            rep.notes = "the full-window mean already violates the bound"
        else:
            bad = np.flatnonzero(~ok)
            N = int(bad[-1] + 2) if bad.size else 1
            rep.window_N = N
            if N <= d.size // 2:
                rep.verdict = "holds"
            else:
                rep.notes = "least N exceeds half the window; too few n tested"
        rep.fit = fit_power_tail(np.arange(1, d.size + 1), M)
        return rep

    if kind == "asymptotic_average":
        idx = np.arange(po.i_min, po.i_max)
        if po.one_sided:
            n_max = d.size - 1
            ns = np.arange(1, n_max + 1)
            avgs = np.array([d[: n + 1].sum() / n for n in ns])
            rep.notes = "one-sided window: averages (1/n) sum_{i=0}^{n}"
        else:
            n_max = min(-po.i_min, po.i_max - 1)
            ns = np.arange(1, n_max + 1)
            zero = -po.i_min
            avgs = np.array([d[zero - n: zero + n + 1].sum() / n for n in ns])
        rep.partial_averages = avgs.tolist()
        rep.fit = fit_power_tail(ns, avgs)
        tail, _ = _side_tail(avgs, tail_fraction, outer_first=False)
        monotone = bool(np.all(np.diff(tail) <= 1e-15))
        p = rep.fit[1] if rep.fit else math.inf
        if monotone and (avgs[-1] < tail_tol or p >= 0.5):
            rep.verdict = "holds"
        elif avgs[-1] >= tail_tol and p < 0.1:
            rep.verdict = "fails"
        return rep

    # limit and positive_limit
    zero = -po.i_min
    sides = []
    if kind == "positive_limit" or po.one_sided:
        sides.append((d[max(zero, 0):], False))
        rep.one_sided = True
    else:
        neg, pos = d[:zero], d[zero:]
        if neg.size < 4 or pos.size < 4:
            raise ValueError("each side needs at least 4 defects for a two-sided limit check")
        sides += [(neg, True), (pos, False)]
    verdicts = []
    fits = []
    for vals, outer_first in sides:
        tail, before = _side_tail(vals, tail_fraction, outer_first)
        fit = _side_fit(vals, outer_first)
        fits.append(fit)
        tmax = float(tail.max())
        not_rising = before.size == 0 or tmax <= float(before.max()) + 1e-15
        if tmax < tail_tol and not_rising:
            verdicts.append("holds")
        elif tmax >= tail_tol and (fit is None or fit[1] < 0.1 or tail.mean() >= 0.5 * vals.mean()):
            verdicts.append("fails")
        else:
            verdicts.append("inconclusive")
    rep.fit = min((f for f in fits if f), key=lambda f: f[1], default=None)
    if "fails" in verdicts:
        rep.verdict = "fails"
    elif all(v == "holds" for v in verdicts):
        rep.verdict = "holds"
    return rep


# --------------------------------------------------------------------------
# constructions

def _check_in_region(spec: SystemSpec, p, name: str) -> np.ndarray:
    p = spec.space.normalize(np.asarray(p, dtype=float).reshape(spec.dim))
    if np.any(p < spec.region_lo) or np.any(p > spec.region_hi):
        raise ValueError(f"{name} lies outside the isolated region")
    return p


def make_concat_ab(spec: SystemSpec, a, b, half_len: int = 32, cfg: IntegratorConfig = DEFAULT) -> PseudoOrbit:
    """x_i = X_i(a) for i <= 0 and x_i = X_i(b) for i > 0, all t_i = 1.

    The window is i = -half_len .. half_len; the only designed jump sits
    between i = 0 and i = 1.
    """
    if half_len < 8:
        raise ValueError("half_len must be at least 8")
    a = _check_in_region(spec, a, "a")
    b = _check_in_region(spec, b, "b")
    back = [a]
    for _ in range(half_len):
        back.append(flow_to(spec, back[-1], -1.0, cfg))
    fwd = [flow_to(spec, b, 1.0, cfg)]
    for _ in range(half_len - 1):
        fwd.append(flow_to(spec, fwd[-1], 1.0, cfg))
    pts = np.array(back[::-1] + fwd)
    return PseudoOrbit(spec, -half_len, pts, np.ones(pts.shape[0]),
                       meta={"construction": "concat_ab", "a": a.tolist(), "b": b.tolist()})


def make_alpha_beta(spec: SystemSpec, segments: Sequence[PseudoOrbit], cfg: IntegratorConfig = DEFAULT) -> PseudoOrbit:
    """Concatenate finite pseudo-orbits in order, re-indexed from 0."""
    if not segments:
        raise ValueError("need at least one segment")
    pts, durs, junctions = [], [], []
    for seg in segments:
        if len(seg) == 0:
            raise ValueError("empty segment")
        if seg.system != spec:
            raise ValueError("segment belongs to a different system")
        if pts:
            junctions.append(sum(len(p) for p in pts) - 1)
        pts.append(seg.points)
        durs.append(seg.durations)
    P = np.concatenate(pts)
    T = np.concatenate(durs)
    jd = []
    for j in junctions:
        y = flow_to(spec, P[j], T[j], cfg)
        jd.append(distance(spec.space, y, P[j + 1]))
    if not all(math.isfinite(v) for v in jd):
        raise ValueError("junction defect is not finite")
    return PseudoOrbit(spec, 0, P, T, meta={"construction": "alpha_beta", "junctions": junctions,
                                            "junction_defects": jd})


def perturb_orbit(spec: SystemSpec, x0, n_steps: int, noise, rng_seed: int, cfg: IntegratorConfig = DEFAULT) -> PseudoOrbit:
    """Unit-time orbit with a uniform ball perturbation of radius sigma_i after step i.

    `noise` is a sequence of radii or a callable ``i -> sigma_i``. Points
    are projected back into the isolated region.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    sig = np.array([noise(i) for i in range(n_steps)] if callable(noise) else noise, dtype=float)
    if sig.size != n_steps or np.any(sig < 0) or not np.all(np.isfinite(sig)):
        raise ValueError("noise must give n_steps finite non-negative radii")
    rng = np.random.default_rng(rng_seed)
    lo, hi = spec.region_lo, spec.region_hi
    pts = [_check_in_region(spec, x0, "x0")]
    for i in range(n_steps):
        y = flow_to(spec, pts[-1], 1.0, cfg)
        u = rng.normal(size=spec.dim)
        r = sig[i] * rng.random() ** (1.0 / spec.dim)
        nrm = np.linalg.norm(u)
        if nrm > 0:
            y = y + r * u / nrm
        if spec.space.is_torus:
            y = spec.space.normalize(y)
        else:
            y = np.clip(y, lo, hi)
        pts.append(y)
    P = np.array(pts)
    return PseudoOrbit(spec, 0, P, np.ones(P.shape[0]), meta={"construction": "perturb", "seed": rng_seed})
