"""
Flat metrics on boxes and tori, fixed-step RK4 flows, orbit sampling and
Lipschitz estimates.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import kernels_for
from .sysdef import SpaceSpec, SystemSpec, evaluate

log = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig", "Trajectory", "EscapeError", "distance", "flow_to",
    "flow_many", "sample_times", "trajectory", "sample_orbit",
    "lipschitz_estimate",
]

MAX_TIME = 1e6


class EscapeError(RuntimeError):
    """A trajectory left a box state space (or hit a non-finite value)."""

    def __init__(self, exit_time: float, point=None):
        self.exit_time = float(exit_time)
        self.point = None if point is None else np.asarray(point, dtype=float)
        super().__init__(f"trajectory escaped the state space at t = {exit_time:.6g}")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings.

    `step` is the RK4 sub-step in time units; the actual step for a flight of
    length t is ``t / ceil(t / step)``.
    """

    method: str = "rk4"
    step: float = 1e-3
    clamp: bool = False

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError("only rk4 is supported")
        if not (0 < self.step <= 1):
            raise ValueError("step must lie in (0, 1]")

    @property
    def quad_step(self) -> float:
        """Trapezoid sub-step used by the shadowing functionals."""
        return self.step * 10


DEFAULT = IntegratorConfig()


def distance(space: SpaceSpec, p, q) -> np.ndarray | float:
    """Euclidean distance on a box, flat quotient distance on a torus.

    Broadcasts over leading axes. NaN coordinates propagate.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != space.dim or q.shape[-1] != space.dim:
        raise ValueError(f"dimension mismatch: {p.shape[-1]}, {q.shape[-1]} vs space {space.dim}")
    diff = np.abs(p - q)
    if space.is_torus:
        per = space.periods
        diff = np.mod(diff, per)
        diff = np.minimum(diff, per - diff)
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(d) if d.ndim == 0 else d


def _kernel_args(spec: SystemSpec):
    sp = spec.space
    return sp.lo, sp.hi, not sp.is_torus


def flow_many(spec: SystemSpec, X, T, cfg: IntegratorConfig = DEFAULT):
    """Flow many points for per-point times.

    Returns ``(Y, exit_times)``; escaped rows of `Y` are NaN and carry the
    elapsed time at exit, other rows have NaN exit time.
    """
    X = np.array(X, dtype=float, ndmin=2)
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],)).copy()
    if np.any(np.abs(T) > MAX_TIME):
        raise ValueError("|t| must not exceed 1e6")
    k = kernels_for(spec)
    lo, hi, is_box = _kernel_args(spec)
    exit_t = np.empty(X.shape[0])
    Y = np.ascontiguousarray(X)
    k.advance(Y, T, cfg.step, lo, hi, is_box, cfg.clamp, exit_t)
    return spec.space.normalize(Y), exit_t


def flow_to(spec: SystemSpec, x, t: float, cfg: IntegratorConfig = DEFAULT) -> np.ndarray:
    """Approximate X_t(x); negative `t` flows the reversed field."""
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    if t == 0:
        return spec.space.normalize(x.copy())
    Y, exit_t = flow_many(spec, x[None, :], float(t), cfg)
    if not np.isnan(exit_t[0]):
        raise EscapeError(math.copysign(exit_t[0], t), x)
    return Y[0]


def sample_times(spec: SystemSpec, X, times, cfg: IntegratorConfig = DEFAULT) -> np.ndarray:
    """X_t(x) for every row x of `X` and every t in `times`.

    Positive and negative times are integrated separately outward from 0,
    landing exactly on each requested time. Escaped samples are NaN.
    Output shape is ``(len(X), len(times), dim)``.
    """
    X = np.array(X, dtype=float, ndmin=2)
    times = np.asarray(times, dtype=float)
    out = np.empty((X.shape[0], times.size, spec.dim))
    k = kernels_for(spec)
    lo, hi, is_box = _kernel_args(spec)
    for sel in (times >= 0, times < 0):
        idx = np.flatnonzero(sel)
        if idx.size == 0:
            continue
        order = idx[np.argsort(np.abs(times[idx]), kind="stable")]
        buf = np.empty((X.shape[0], order.size, spec.dim))
        k.sample(np.ascontiguousarray(X), np.ascontiguousarray(times[order]), cfg.step, lo, hi, is_box, cfg.clamp, buf)
        out[:, order, :] = buf
    return spec.space.normalize(out)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray

    def to_csv(self, path) -> None:
        """Write ``t, x0, ..., x{dim-1}`` rows with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{k}" for k in range(self.points.shape[1])])
            for t, p in zip(self.times, self.points):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in p])


def trajectory(spec: SystemSpec, x, T: float, cfg: IntegratorConfig = DEFAULT, dt: float | None = None) -> Trajectory:
    """Orbit segment on ``[0, T]`` sampled every `dt` (default: the step)."""
    dt = cfg.step if dt is None else dt
    n = max(1, int(math.ceil(abs(T) / dt - 1e-9)))
    times = np.linspace(0.0, T, n + 1)
    pts = sample_times(spec, np.asarray(x, dtype=float)[None, :], times, cfg)[0]
    bad = np.flatnonzero(np.isnan(pts).any(axis=1))
    if bad.size:
        raise EscapeError(times[bad[0]], x)
    return Trajectory(times, pts)


def sample_orbit(spec: SystemSpec, x0, durations: Sequence[float], cfg: IntegratorConfig = DEFAULT):
    """True orbit chopped into a pseudo-orbit: x_{i+1} = X_{t_i}(x_i)."""
    from .pseudo import PseudoOrbit

    durations = [float(t) for t in durations]
    if not durations:
        raise ValueError("durations must be nonempty")
    pts = [spec.space.normalize(np.asarray(x0, dtype=float).reshape(spec.dim))]
    for t in durations[:-1]:
        pts.append(flow_to(spec, pts[-1], t, cfg))
    return PseudoOrbit(spec, 0, np.array(pts), np.array(durations))


def lipschitz_estimate(spec: SystemSpec, region=None, grid_per_axis: int = 64) -> float:
    """1.5 times the largest Jacobian operator norm on a grid over `region`.

    Central differences with h = 1e-5. `region` is a sequence of (lo, hi)
    pairs; defaults to the system's isolated region.
    """
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be at least 2")
    region = spec.region if region is None else region
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in region]
    P = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    h = 1e-5
    d = spec.dim
    J = np.empty((P.shape[0], d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        fp = np.stack([evaluate(f, P + e) for f in spec.fields], axis=-1)
        fm = np.stack([evaluate(f, P - e) for f in spec.fields], axis=-1)
        J[:, :, j] = (fp - fm) / (2 * h)
    if d == 1:
        norms = np.abs(J[:, 0, 0])
    else:
        norms = np.linalg.svd(J, compute_uv=False)[:, 0]
    L = 1.5 * float(norms.max())
    log.debug("lipschitz_estimate: max |J| = %.6g, upper-bias factor 1.5 -> %.6g", norms.max(), L)
    return L
