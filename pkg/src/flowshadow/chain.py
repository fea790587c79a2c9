"""
Set-oriented dynamics on uniform box covers: transition graphs, strongly
connected components, chain transitivity, attractor/repeller candidates,
omega-limits, sampled topological transitivity and stable/unstable
set witnesses.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import qmc

from . import io
from ._kernels import kernels_for
from .flow import DEFAULT, IntegratorConfig, distance, sample_times
from .sysdef import SpaceSpec, SystemSpec

log = logging.getLogger(__name__)

__all__ = [
    "BoxCover", "BoxGraph", "AttractorCandidate", "SCCResult", "build_cover",
    "transition_graph", "scc", "chain_transitive", "find_attractors",
    "omega_limit", "topologically_transitive", "stable_unstable_witness",
    "witness_sweep", "reachable", "ancestors",
]

MAX_BOXES = 2 ** 20
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class BoxCover:
    """Uniform grid with 2**depth boxes per axis, numbered row-major."""

    space: SpaceSpec
    region: tuple
    depth: int

    def __post_init__(self):
        if not (1 <= self.depth <= 12):
            raise ValueError("depth must lie in [1, 12]")
        if (2 ** self.depth) ** self.space.dim > MAX_BOXES:
            raise ValueError(f"cover would exceed the box budget of {MAX_BOXES}")
        object.__setattr__(self, "region", tuple((float(a), float(b)) for a, b in self.region))

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def per_axis(self) -> int:
        return 2 ** self.depth

    @property
    def n_boxes(self) -> int:
        return self.per_axis ** self.dim

    @property
    def lo(self) -> np.ndarray:
        return np.array([r[0] for r in self.region])

    @property
    def hi(self) -> np.ndarray:
        return np.array([r[1] for r in self.region])

    @property
    def widths(self) -> np.ndarray:
        return (self.hi - self.lo) / self.per_axis

    @property
    def wraps(self) -> bool:
        """True when the cover is the whole torus, so box indices wrap."""
        return self.space.is_torus and self.region == self.space.bounds

    def multi_index(self, idx) -> np.ndarray:
        return np.stack(np.unravel_index(np.asarray(idx), (self.per_axis,) * self.dim), axis=-1)

    def flat_index(self, mi) -> np.ndarray:
        mi = np.asarray(mi)
        return np.ravel_multi_index(tuple(mi[..., k] for k in range(self.dim)), (self.per_axis,) * self.dim)

    def bounds(self, idx):
        """(lo, hi) arrays of box `idx` (broadcasts over index arrays)."""
        mi = self.multi_index(idx)
        lo = self.lo + mi * self.widths
        return lo, lo + self.widths

    def centers(self, idx=None) -> np.ndarray:
        idx = np.arange(self.n_boxes) if idx is None else idx
        lo, hi = self.bounds(idx)
        return 0.5 * (lo + hi)

    def locate(self, points, tol: float = BOUNDARY_TOL):
        """All boxes within `tol` of each point.

        Returns ``(point_index, box_index)`` pairs; points outside the
        region by more than `tol` (or NaN) contribute nothing.
        """
        return self.near(points, tol)

    def near(self, points, r: float):
        """Boxes at distance <= r from each point, as (point_index, box_index) pairs."""
        P = np.array(points, dtype=float, ndmin=2)
        n = self.per_axis
        w = self.widths
        ok = ~np.isnan(P).any(axis=1)
        rel = np.where(ok[:, None], (P - self.lo) / w, 0.0)
        if self.wraps:
            rel = np.mod(rel, n)
        m = int(math.ceil(r / float(w.min()))) + 1
        if (2 * m + 1) ** self.dim > 4 * self.n_boxes:
            # radius covers a large part of the cover: test every box
            base = np.zeros((P.shape[0], self.dim), dtype=np.int64)
            offsets = self.multi_index(np.arange(self.n_boxes))
            absolute = True
        else:
            base = np.floor(rel).astype(np.int64)
            offsets = np.array(list(itertools.product(range(-m, m + 1), repeat=self.dim)), dtype=np.int64)
            absolute = False
        pi_all, bi_all = [], []
        for off in offsets:
            mi = off[None, :] + (0 if absolute else base)
            if self.wraps:
                mi = np.mod(mi, n)
                valid = ok.copy()
            else:
                valid = ok & np.all((mi >= 0) & (mi < n), axis=1)
            if not valid.any():
                continue
            # per-axis gap between the point and the box (in region units)
            blo = mi * w + self.lo
            d = np.maximum(np.maximum(blo - P, P - (blo + w)), 0.0)
            if self.wraps:
                per = self.hi - self.lo
                c = blo + 0.5 * w
                dc = np.abs(np.mod(P - c + 0.5 * per, per) - 0.5 * per)
                d = np.maximum(dc - 0.5 * w, 0.0)
            dist = np.sqrt(np.sum(d * d, axis=1))
            sel = valid & (dist <= r)
            if sel.any():
                pi_all.append(np.flatnonzero(sel))
                bi_all.append(self.flat_index(mi[sel]))
        if not pi_all:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
        pi = np.concatenate(pi_all)
        bi = np.concatenate(bi_all)
        pairs = np.unique(np.stack([pi, bi], axis=1), axis=0)
        return pairs[:, 0], pairs[:, 1]

    def box_distance(self, a, b) -> np.ndarray:
        """Smallest distance between points of boxes a and b (broadcasting)."""
        la = self.multi_index(a)
        lb = self.multi_index(b)
        diff = np.abs(la - lb)
        if self.wraps:
            diff = np.minimum(diff, self.per_axis - diff)
        gap = np.maximum(diff - 1, 0) * self.widths
        return np.sqrt(np.sum(gap * gap, axis=-1))

    def inflate(self, boxes, radius: float | None = None, strict: bool = False) -> np.ndarray:
        """Boxes at box-distance <= radius from the set (one box layer if radius is None).

        With `strict` the comparison is ``< radius``.
        """
        boxes = np.unique(np.asarray(boxes, dtype=np.int64))
        if boxes.size == 0:
            return boxes
        if radius is None:
            return self._neighbors(boxes)
        allb = np.arange(self.n_boxes)
        keep = np.zeros(self.n_boxes, dtype=bool)
        for chunk in np.array_split(boxes, max(1, boxes.size // 256)):
            D = self.box_distance(allb[:, None], chunk[None, :]).min(axis=1)
            keep |= (D < radius) if strict else (D <= radius)
        keep[boxes] = True
        return np.flatnonzero(keep)

    def _neighbors(self, boxes) -> np.ndarray:
        mi = self.multi_index(boxes)
        out = []
        for off in itertools.product((-1, 0, 1), repeat=self.dim):
            nb = mi + np.array(off)
            if self.wraps:
                nb = np.mod(nb, self.per_axis)
                out.append(self.flat_index(nb))
            else:
                ok = np.all((nb >= 0) & (nb < self.per_axis), axis=1)
                out.append(self.flat_index(nb[ok]))
        return np.unique(np.concatenate(out))

    def hull(self, boxes):
        """Axis-aligned bounding (lo, hi) of a box set (non-wrapping coordinates)."""
        lo, hi = self.bounds(np.asarray(boxes))
        return lo.min(axis=0), hi.max(axis=0)

    def test_points(self, idx, samples_per_box: int) -> np.ndarray:
        """Corners, center and Halton interior points of each box: shape (n, k, dim)."""
        idx = np.atleast_1d(np.asarray(idx))
        unit = _unit_test_points(self.dim, samples_per_box)
        lo, _ = self.bounds(idx)
        return lo[:, None, :] + unit[None, :, :] * self.widths

    def header(self) -> str:
        return (f"# cover space={self.space.text()} region={list(self.region)} "
                f"depth={self.depth} boxes={self.n_boxes}")

    def to_dict(self) -> dict:
        return {"space": self.space.text(), "region": [list(r) for r in self.region], "depth": self.depth,
                "n_boxes": self.n_boxes}


def _unit_test_points(dim: int, k: int) -> np.ndarray:
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    base = np.vstack([corners, np.full((1, dim), 0.5)])
    if k < base.shape[0]:
        raise ValueError(f"samples_per_box must be at least {base.shape[0]} (corners + center)")
    extra = k - base.shape[0]
    if extra:
        halton = qmc.Halton(d=dim, scramble=False).random(extra + 1)[1:]
        base = np.vstack([base, halton])
    return base


def build_cover(space: SpaceSpec, region=None, depth: int = 6) -> BoxCover:
    return BoxCover(space, space.bounds if region is None else tuple(region), depth)


def default_samples(dim: int) -> int:
    return 2 ** dim + 1 + 4


@dataclass(eq=False)
class BoxGraph:
    cover: BoxCover
    delta: float
    t_samples: np.ndarray
    edges: np.ndarray
    test_points_per_box: int

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        n = self.cover.n_boxes
        self.matrix = csr_matrix((np.ones(len(self.edges), dtype=np.int8), (self.edges[:, 0], self.edges[:, 1])),
                                 shape=(n, n))

    @property
    def n(self) -> int:
        return self.cover.n_boxes

    def successors(self, i: int) -> np.ndarray:
        m = self.matrix
        return m.indices[m.indptr[i]:m.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(j in self.successors(i))

    def edge_list_text(self) -> str:
        lines = [self.cover.header(),
                 f"# delta={self.delta!r} t_edge={float(self.t_samples[-1])!r} "
                 f"samples_per_box={self.test_points_per_box} edges={len(self.edges)}"]
        lines += [f"{p} {q}" for p, q in self.edges]
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"cover": self.cover.to_dict(), "delta": self.delta, "t_edge": float(self.t_samples[-1]),
                "samples_per_box": self.test_points_per_box, "n_edges": int(len(self.edges))}


def transition_graph(spec: SystemSpec, cover: BoxCover, delta: float = 0.0, T_edge: float = 2.0,
                     samples_per_box: int | None = None, cfg: IntegratorConfig = DEFAULT) -> BoxGraph:
    """Edge P -> Q iff some test point of P lands within `delta` of Q at some t in {1, 1.5, ..., T_edge}.

    Landing distances are compared with an extra 1e-9 so that points sitting
    exactly on a shared face count for both boxes. Escaped samples give no edge.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if T_edge < 1:
        raise ValueError("T_edge must be at least 1")
    k = default_samples(spec.dim) if samples_per_box is None else int(samples_per_box)
    t_samples = np.arange(1.0, T_edge + 1e-12, 0.5)
    P = cover.test_points(np.arange(cover.n_boxes), k).reshape(-1, spec.dim)
    src_of_point = np.repeat(np.arange(cover.n_boxes), k)
    edges = []
    chunk = max(1, 2_000_000 // max(1, t_samples.size))
    for start in range(0, P.shape[0], chunk):
        Y = sample_times(spec, P[start:start + chunk], t_samples, cfg)
        flat = Y.reshape(-1, spec.dim)
        pi, bi = cover.near(flat, delta + BOUNDARY_TOL)
        src = src_of_point[start + pi // t_samples.size]
        edges.append(np.stack([src, bi], axis=1))
    E = np.unique(np.concatenate(edges), axis=0) if edges else np.empty((0, 2), dtype=np.int64)
    return BoxGraph(cover, float(delta), t_samples, E, k)


# --------------------------------------------------------------------------
# components

@dataclass(eq=False)
class SCCResult:
    labels: np.ndarray          # component id per box, numbered by smallest member
    components: list            # sorted box arrays, by component id
    recurrent: np.ndarray       # bool per component: contains a cycle
    dag_edges: np.ndarray       # condensation edges (c1, c2), c1 != c2

    @property
    def n_components(self) -> int:
        return len(self.components)

    def recurrent_boxes(self) -> np.ndarray:
        return np.sort(np.concatenate([c for c, r in zip(self.components, self.recurrent) if r] or [np.empty(0, int)]))

    def terminal(self) -> list[int]:
        out = np.ones(self.n_components, dtype=bool)
        out[self.dag_edges[:, 0]] = False
        return list(np.flatnonzero(out))

    def initial(self) -> list[int]:
        out = np.ones(self.n_components, dtype=bool)
        out[self.dag_edges[:, 1]] = False
        return list(np.flatnonzero(out))


def scc(graph_or_n, edges=None) -> SCCResult:
    """Strongly connected components and the condensation DAG.

    Accepts a BoxGraph or ``(n, edges)``. Components are numbered in
    order of their smallest box index, which makes labels deterministic.
    """
    if isinstance(graph_or_n, BoxGraph):
        n, E = graph_or_n.n, graph_or_n.edges
    else:
        n, E = int(graph_or_n), np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    M = csr_matrix((np.ones(len(E), dtype=np.int8), (E[:, 0], E[:, 1])), shape=(n, n))
    _, raw = connected_components(M, directed=True, connection="strong")
    first = {}
    for i, c in enumerate(raw):
        first.setdefault(c, len(first))
    labels = np.array([first[c] for c in raw], dtype=np.int64)
    comps = [[] for _ in range(len(first))]
    for i, c in enumerate(labels):
        comps[c].append(i)
    comps = [np.array(c, dtype=np.int64) for c in comps]
    rec = np.array([c.size > 1 for c in comps], dtype=bool)
    if len(E):
        selfs = E[E[:, 0] == E[:, 1], 0]
        rec[labels[selfs]] = True
        lc = labels[E]
        dag = np.unique(lc[lc[:, 0] != lc[:, 1]], axis=0) if (lc[:, 0] != lc[:, 1]).any() else np.empty((0, 2), np.int64)
    else:
        dag = np.empty((0, 2), dtype=np.int64)
    return SCCResult(labels, comps, rec, dag)


def reachable(graph: BoxGraph, sources) -> np.ndarray:
    """Boxes reachable from `sources` (including them), sorted."""
    return _bfs(graph.matrix, sources)


def ancestors(graph: BoxGraph, targets) -> np.ndarray:
    """Boxes with a path into `targets` (including them), sorted."""
    return _bfs(graph.matrix.T.tocsr(), targets)


def _bfs(M, sources) -> np.ndarray:
    seen = np.zeros(M.shape[0], dtype=bool)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    seen[frontier] = True
    while frontier.size:
        nxt = np.unique(np.concatenate([M.indices[M.indptr[i]:M.indptr[i + 1]] for i in frontier]))
        nxt = nxt[~seen[nxt]]
        seen[nxt] = True
        frontier = nxt
    return np.flatnonzero(seen)


@dataclass
class TransitivityVerdict:
    transitive: bool
    witness: tuple | None
    n_components: int

    def to_dict(self):
        return {"chain_transitive": self.transitive, "witness": list(self.witness) if self.witness else None,
                "n_components": self.n_components}


def chain_transitive(graph: BoxGraph, sccs: SCCResult | None = None) -> TransitivityVerdict:
    """Strong connectivity of the box graph; on failure an ordered pair (P, Q) with no path P -> Q."""
    s = scc(graph) if sccs is None else sccs
    if s.n_components == 1:
        return TransitivityVerdict(True, None, 1)
    term = s.terminal()
    if len(term) >= 2:
        src = int(s.components[term[-1]][0])
        dst = int(s.components[term[0]][0])
    else:
        src = int(s.components[term[0]][0])
        reach = np.zeros(graph.n, dtype=bool)
        reach[reachable(graph, [src])] = True
        dst = int(np.flatnonzero(~reach)[0])
    return TransitivityVerdict(False, (src, dst), s.n_components)


# --------------------------------------------------------------------------
# attractors

@dataclass
class AttractorCandidate:
    boxes: np.ndarray
    neighborhood: np.ndarray
    basin: np.ndarray
    proper: bool
    repellers: list = field(default_factory=list)
    component: int = -1

    def to_dict(self) -> dict:
        return {"boxes": self.boxes.tolist(), "neighborhood": self.neighborhood.tolist(),
                "basin": self.basin.tolist(), "proper": self.proper,
                "repellers": [r.tolist() for r in self.repellers], "component": self.component}


def find_attractors(graph: BoxGraph, sccs: SCCResult | None = None) -> list[AttractorCandidate]:
    """Recurrent terminal components as attractor candidates.

    Repeller candidates are recurrent components not reachable from any
    other recurrent component (initial among the recurrent classes). A
    candidate is proper when such a repeller exists apart from it and it
    does not cover every box.
    """
    s = scc(graph) if sccs is None else sccs
    rec_comps = [c for c in range(s.n_components) if s.recurrent[c]]
    # component-level reachability restricted to what is needed
    comp_reach = {}
    for c in rec_comps:
        boxes = reachable(graph, s.components[c][:1])
        comp_reach[c] = set(np.unique(s.labels[boxes]).tolist())
    repellers = [c for c in rec_comps if not any(c in comp_reach[o] for o in rec_comps if o != c)]
    out = []
    for c in s.terminal():
        if not s.recurrent[c]:
            continue
        A = s.components[c]
        reps = [s.components[r] for r in repellers if r != c]
        proper = bool(reps) and A.size < graph.n
        out.append(AttractorCandidate(A, graph.cover.inflate(A), ancestors(graph, A), proper, reps, int(c)))
    return out


# --------------------------------------------------------------------------
# trajectories on the cover

def omega_limit(spec: SystemSpec, x, burn_T: float, obs_T: float, cover: BoxCover,
                cfg: IntegratorConfig = DEFAULT, dt: float | None = None) -> np.ndarray:
    """Boxes visited by the orbit of x on [burn_T, burn_T + obs_T]."""
    if burn_T < 1 or obs_T < 1:
        raise ValueError("burn_T and obs_T must be at least 1")
    dt = cfg.quad_step if dt is None else dt
    n = int(math.ceil(obs_T / dt - 1e-9))
    times = burn_T + np.arange(n + 1) * (obs_T / n)
    Y = sample_times(spec, np.asarray(x, dtype=float)[None, :], times, cfg)[0]
    if np.isnan(Y).any():
        from .flow import EscapeError
        raise EscapeError(float(times[np.flatnonzero(np.isnan(Y).any(axis=1))[0]]), x)
    _, bi = cover.locate(Y)
    return np.unique(bi)


@dataclass
class TransitivityReport:
    verdict: str
    pairs: list
    seed: int
    pair_budget: int
    T_max: float
    invariant_set: list | None = None
    refuted_pair: tuple | None = None

    @property
    def n_verified(self) -> int:
        return sum(1 for p in self.pairs if p["status"] == "verified")

    def to_dict(self) -> dict:
        return io.plain({k: getattr(self, k) for k in self.__dataclass_fields__})


def _first_hit(spec, cover, starts, target, T_max, cfg, t_start=1.0):
    """Earliest t in [t_start, T_max] (step lattice) at which each start enters the one-box inflation of its target."""
    k = kernels_for(spec)
    w = cover.widths
    tlo, thi = cover.bounds(target)
    tlo, thi = tlo - w, thi + w
    sp = spec.space
    hit = np.empty(starts.shape[0])
    k.first_hit(np.ascontiguousarray(starts), float(t_start), float(T_max), cfg.step,
                np.ascontiguousarray(tlo), np.ascontiguousarray(thi),
                sp.periods if sp.is_torus else np.ones(sp.dim), sp.is_torus,
                sp.lo, sp.hi, not sp.is_torus, hit)
    return hit


def topologically_transitive(spec: SystemSpec, cover: BoxCover, pair_budget: int = 20, T_max: float = 100.0,
                             cfg: IntegratorConfig = DEFAULT, seed: int = 0, graph: BoxGraph | None = None,
                             extra_pairs=(), samples_per_box: int | None = None) -> TransitivityReport:
    """Sampled check of X_t(U) meeting V for box pairs (U, V).

    U and V are boxes of the cover, read as relatively open subsets of the
    region; V is inflated by one box width. Pairs that never hit are
    refuted when the graph reachability closure of U misses the inflated V
    (that closure is a forward-invariant box set). Random pairs are drawn
    with `seed`; attractor/repeller pairs are appended when a graph is given.
    """
    if pair_budget < 1:
        raise ValueError("pair_budget must be at least 1")
    rng = np.random.default_rng(seed)
    pairs = [tuple(int(v) for v in rng.integers(0, cover.n_boxes, size=2)) for _ in range(pair_budget)]
    if graph is not None:
        cands = find_attractors(graph)
        reps = {}
        for c in cands:
            if not c.proper:
                continue
            for r in c.repellers:
                reps[int(r[0])] = r
        atts = [int(c.boxes[0]) for c in cands if c.proper]
        for a in atts:
            for r in sorted(reps):
                pairs += [(a, r), (r, a)]
            for b in atts:
                if a != b:
                    pairs.append((a, b))
    pairs += [tuple(int(v) for v in p) for p in extra_pairs]
    k = default_samples(spec.dim) if samples_per_box is None else samples_per_box
    records = []
    verdict = "verified-for-samples"
    inv, refuted = None, None
    for U, V in pairs:
        starts = cover.test_points([U], k)[0]
        hit = _first_hit(spec, cover, starts, np.full(starts.shape[0], V), T_max, cfg)
        ok = ~np.isnan(hit)
        rec = {"U": U, "V": V, "status": "verified" if ok.any() else "no-hit",
               "hit_time": float(np.nanmin(hit)) if ok.any() else None}
        if not ok.any():
            if graph is not None:
                R = reachable(graph, [U])
                near_v = cover.inflate([V])
                if not np.isin(near_v, R).any():
                    rec["status"] = "refuted"
                    rec["invariant_set"] = R.tolist()
                    if inv is None:
                        inv, refuted = R.tolist(), (U, V)
        records.append(rec)
    statuses = {r["status"] for r in records}
    if "refuted" in statuses:
        verdict = "refuted"
    elif "no-hit" in statuses:
        verdict = "inconclusive"
    return TransitivityReport(verdict, records, seed, pair_budget, float(T_max), inv, refuted)


# --------------------------------------------------------------------------
# stable / unstable sets

@dataclass
class WitnessResult:
    forward_rate: float
    backward_rate: float
    forward_final: float
    backward_final: float
    verdict: str
    notes: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def to_dict(self) -> dict:
        return io.plain({k: getattr(self, k) for k in self.__dataclass_fields__})


def _decay_rate(t, e) -> float:
    """Slope of log e against t; -inf when e vanishes identically."""
    pos = e > 1e-300
    if not pos.any():
        return -math.inf
    if pos.sum() < 2:
        return -math.inf if e[-1] <= 1e-300 else 0.0
    slope, _ = np.polyfit(t[pos], np.log(e[pos]), 1)
    return float(slope)


def stable_unstable_witness(spec: SystemSpec, x, y, K: float, z, T: float = 20.0,
                            cfg: IntegratorConfig = DEFAULT, dt: float = 0.05,
                            tol: float = 1e-3) -> WitnessResult:
    """Does z lie in W^s(X_{-K}(x)) and in W^u(y), judged on [0, T]?

    e_f(t) = d(X_t(X_K(z)), X_t(x)) and e_b(t) = d(X_{-t}(z), X_{-t}(y)).
    Holds iff both final errors are below `tol` and both fitted exponential
    rates are negative.
    """
    if T < 10:
        raise ValueError("T must be at least 10")
    n = int(round(T / dt))
    t = np.arange(n + 1) * dt
    x, y, z = (np.asarray(v, dtype=float).reshape(spec.dim) for v in (x, y, z))
    fz = sample_times(spec, z[None, :], K + t, cfg)[0]
    fx = sample_times(spec, x[None, :], t, cfg)[0]
    bz = sample_times(spec, z[None, :], -t, cfg)[0]
    by = sample_times(spec, y[None, :], -t, cfg)[0]
    ef = distance(spec.space, fz, fx)
    eb = distance(spec.space, bz, by)
    notes = []
    res = []
    for name, e in (("forward", ef), ("backward", eb)):
        if np.isnan(e).any():
            notes.append(f"{name} side escaped the state space")
            res.append((math.nan, math.nan))
        else:
            res.append((_decay_rate(t, e), float(e[-1])))
    (rf, ff), (rb, fb) = res
    ok = all(not math.isnan(r) and r < 0 and f < tol for r, f in res)
    return WitnessResult(rf, rb, ff, fb, "holds" if ok else "fails", "; ".join(notes))


def witness_sweep(spec: SystemSpec, x, y, zs, Ks, T: float = 20.0, cfg: IntegratorConfig = DEFAULT,
                  dt: float = 0.05, tol: float = 1e-3):
    """Evaluate the stable/unstable witness test over a grid of z and K.

    K values must lie on the `dt` lattice. Returns a dict with the number of
    passing pairs, the first passing (z, K) if any, and the smallest final
    errors seen on each side.
    """
    zs = np.array(zs, dtype=float).reshape(-1, spec.dim)
    Ks = np.asarray(Ks, dtype=float)
    kidx = np.rint(Ks / dt).astype(np.int64)
    if np.any(np.abs(kidx * dt - Ks) > 1e-9):
        raise ValueError("K grid must lie on the dt lattice")
    n = int(round(T / dt))
    kmin, kmax = int(min(kidx.min(), 0)), int(kidx.max())
    fwd_idx = np.arange(kmin, kmax + n + 1)
    t = np.arange(n + 1) * dt
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    y = np.asarray(y, dtype=float).reshape(spec.dim)
    fx = sample_times(spec, x[None, :], t, cfg)[0]
    by = sample_times(spec, y[None, :], -t, cfg)[0]
    passing = []
    best_f, best_b = math.inf, math.inf
    n_pass = 0
    for start in range(0, zs.shape[0], 512):
        Z = zs[start:start + 512]
        FZ = sample_times(spec, Z, fwd_idx * dt, cfg)
        BZ = sample_times(spec, Z, -t, cfg)
        eb = distance(spec.space, BZ, by[None, :, :])
        eb_fin = eb[:, -1]
        best_b = min(best_b, float(np.nanmin(eb_fin)) if not np.isnan(eb_fin).all() else math.inf)
        for kk, K in zip(kidx, Ks):
            sl = FZ[:, kk - kmin: kk - kmin + n + 1, :]
            ef = distance(spec.space, sl, fx[None, :, :])
            ef_fin = ef[:, -1]
            if not np.isnan(ef_fin).all():
                best_f = min(best_f, float(np.nanmin(ef_fin)))
            cand = np.flatnonzero((ef_fin < tol) & (eb_fin < tol))
            for c in cand:
                if np.isnan(ef[c]).any() or np.isnan(eb[c]).any():
                    continue
                if _decay_rate(t, ef[c]) < 0 and _decay_rate(t, eb[c]) < 0:
                    n_pass += 1
                    if len(passing) < 10:
                        passing.append((Z[c].tolist(), float(K)))
    return {"n_pass": n_pass, "witnesses": passing, "min_forward_final": best_f,
            "min_backward_final": best_b, "n_z": int(zs.shape[0]), "n_K": int(Ks.size), "T": T, "dt": dt}
