"""Per-system numba kernels for fixed-step RK4.

The field expressions are turned into a ``rhs(x, out)`` function and
compiled together with the integrator loops so that numba can inline the
right-hand side. Kernels are cached by field source.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from numba import njit

from .sysdef import SystemSpec, to_numba_source

_TEMPLATE = '''
def rhs(x, out):
{body}

def rk4(x, h, k1, k2, k3, k4, y):
    rhs(x, k1)
    for j in range(D):
        y[j] = x[j] + 0.5 * h * k1[j]
    rhs(y, k2)
    for j in range(D):
        y[j] = x[j] + 0.5 * h * k2[j]
    rhs(y, k3)
    for j in range(D):
        y[j] = x[j] + h * k3[j]
    rhs(y, k4)
    for j in range(D):
        x[j] = x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])

def outside(x, lo, hi, is_box):
    for j in range(D):
        if x[j] != x[j]:
            return True
        if is_box and not (x[j] >= lo[j] and x[j] <= hi[j]):
            return True
    return False

def advance(X, T, step, lo, hi, is_box, clamp, exit_t):
    n = X.shape[0]
    x = np.empty(D); k1 = np.empty(D); k2 = np.empty(D)
    k3 = np.empty(D); k4 = np.empty(D); y = np.empty(D)
    for p in range(n):
        exit_t[p] = np.nan
        t = T[p]
        if t == 0.0:
            continue
        ns = int(math.ceil(abs(t) / step - 1e-9))
        if ns < 1:
            ns = 1
        h = t / ns
        for j in range(D):
            x[j] = X[p, j]
        for s in range(ns):
            rk4(x, h, k1, k2, k3, k4, y)
            if outside(x, lo, hi, is_box):
                if clamp and is_box:
                    ok = True
                    for j in range(D):
                        if x[j] != x[j]:
                            ok = False
                        elif x[j] < lo[j]:
                            x[j] = lo[j]
                        elif x[j] > hi[j]:
                            x[j] = hi[j]
                    if ok:
                        continue
                exit_t[p] = (s + 1) * h
                for j in range(D):
                    x[j] = np.nan
                break
        for j in range(D):
            X[p, j] = x[j]

def sample(X, times, step, lo, hi, is_box, clamp, out):
    n = X.shape[0]
    m = times.shape[0]
    x = np.empty(D); k1 = np.empty(D); k2 = np.empty(D)
    k3 = np.empty(D); k4 = np.empty(D); y = np.empty(D)
    for p in range(n):
        for j in range(D):
            x[j] = X[p, j]
        alive = True
        tcur = 0.0
        for k in range(m):
            if alive:
                gap = times[k] - tcur
                if gap != 0.0:
                    ns = int(math.ceil(abs(gap) / step - 1e-9))
                    if ns < 1:
                        ns = 1
                    h = gap / ns
                    for s in range(ns):
                        rk4(x, h, k1, k2, k3, k4, y)
                        if outside(x, lo, hi, is_box):
                            if clamp and is_box:
                                bad = False
                                for j in range(D):
                                    if x[j] != x[j]:
                                        bad = True
                                    elif x[j] < lo[j]:
                                        x[j] = lo[j]
                                    elif x[j] > hi[j]:
                                        x[j] = hi[j]
                                if not bad:
                                    continue
                            alive = False
                            break
                tcur = times[k]
            for j in range(D):
                out[p, k, j] = x[j] if alive else np.nan

def first_hit(X, t_start, t_max, step, tlo, thi, per, is_torus, lo, hi, is_box, hit):
    n = X.shape[0]
    ns = int(math.ceil(t_max / step - 1e-9))
    s0 = int(math.ceil(t_start / step - 1e-9))
    x = np.empty(D); k1 = np.empty(D); k2 = np.empty(D)
    k3 = np.empty(D); k4 = np.empty(D); y = np.empty(D)
    for p in range(n):
        hit[p] = np.nan
        for j in range(D):
            x[j] = X[p, j]
        for s in range(ns):
            rk4(x, step, k1, k2, k3, k4, y)
            if outside(x, lo, hi, is_box):
                break
            if s + 1 < s0:
                continue
            inside = True
            for j in range(D):
                if is_torus:
                    off = (x[j] - tlo[p, j]) % per[j]
                    if off > thi[p, j] - tlo[p, j]:
                        inside = False
                        break
                else:
                    if x[j] < tlo[p, j] or x[j] > thi[p, j]:
                        inside = False
                        break
            if inside:
                hit[p] = (s + 1) * step
                break
'''

_cache: dict = {}
_lock = threading.Lock()


class Kernels:
    """Compiled kernels for one vector field."""

    def __init__(self, spec: SystemSpec):
        lines = []
        for k in range(spec.dim):
            if spec.space.is_torus:
                lines.append(f"    v{k} = x[{k}] % {spec.space.periods[k]!r}")
            else:
                lines.append(f"    v{k} = x[{k}]")
        lines += [f"    out[{k}] = {to_numba_source(f, 'v{}')}" for k, f in enumerate(spec.fields)]
        body = "\n".join(lines)
        self.source = _TEMPLATE.format(body=body)
        ns = {"math": math, "np": np, "D": spec.dim}
        exec(compile(self.source, f"<flowshadow-kernel {spec.name}>", "exec"), ns)
        opts = dict(nogil=True, error_model="numpy", cache=False)
        for name in ("rhs", "rk4", "outside"):
            ns[name] = njit(**opts)(ns[name])
        self.advance = njit(**opts)(ns["advance"])
        self.sample = njit(**opts)(ns["sample"])
        self.first_hit = njit(**opts)(ns["first_hit"])


def kernels_for(spec: SystemSpec) -> Kernels:
    key = (spec.space, tuple(to_numba_source(f) for f in spec.fields))
    with _lock:
        k = _cache.get(key)
        if k is None:
            k = _cache[key] = Kernels(spec)
    return k
