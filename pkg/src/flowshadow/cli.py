"""
Command-line front end.

Exit status: 0 check passed or artifact produced, 2 property refuted (a
counterexample artifact is written), 3 inconclusive, 1 usage or runtime
error. Reports are deterministic JSON with the full run configuration
embedded; with ``--out DIR`` they are written atomically into DIR,
otherwise the report goes to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import logging
import os
import sys

import numpy as np

from . import __version__, io
from .chain import (ancestors, build_cover, chain_transitive, find_attractors, omega_limit, scc,
                    topologically_transitive, transition_graph)
from .flow import EscapeError, IntegratorConfig, trajectory
from .pseudo import KINDS, PseudoOrbit, classify, defects, make_concat_ab, perturb_orbit
from .shadow import MODES, ReparamClass, certify_average_nonshadowing, search_shadowing
from .sysdef import CATALOG, ParseError, builtin, format_system, parse_system
from .flow import sample_orbit
from . import verify as V

log = logging.getLogger("flowshadow")

EXIT_OK, EXIT_ERROR, EXIT_REFUTED, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# configuration

def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}")


def _system(args):
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            return parse_system(fh.read())
    if not args.system:
        raise UsageError("give --system NAME or --file PATH")
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    return builtin(args.system, params)


def _run_config(args, spec=None) -> dict:
    """Every option of the invocation, plus the resolved system."""
    skip = ("func", "out", "jobs", "command_path", "depth_given")
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg = {"command": args.command_path, "step": args.step, "seed": args.seed, "options": opts,
           "out": args.out, "version": __version__}
    if spec is not None:
        cfg["system"] = {"source": args.file or "builtin", "name": spec.name, "params": dict(spec.params),
                         "text": format_system(spec)}
    return cfg


def _cfg(args) -> IntegratorConfig:
    return IntegratorConfig(step=args.step)


def _emit(args, name: str, report: dict, extra: dict | None = None) -> None:
    """Write the report (and side files) to --out, or print the report."""
    text = io.dumps(report)
    if args.out:
        io.write_atomic(os.path.join(args.out, name), text)
        for fname, body in (extra or {}).items():
            io.write_atomic(os.path.join(args.out, fname), body)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = _stdio.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _report(kind, args, spec, body, status="ok"):
    return {"schema_version": io.SCHEMA_VERSION, "kind": kind, "status": status,
            "run_config": _run_config(args, spec), "result": body}


# --------------------------------------------------------------------------
# sys

def cmd_sys_list(args):
    for name, (_, params) in sorted(CATALOG.items()):
        sys.stdout.write(name + (" (" + ", ".join(params) + ")" if params else "") + "\n")
    return EXIT_OK


def cmd_sys_show(args):
    if args.name:
        args.system = args.name
    spec = _system(args)
    sys.stdout.write(format_system(spec))
    return EXIT_OK


def cmd_integrate(args):
    spec = _system(args)
    x0 = args.x0 or list(((spec.region_lo + spec.region_hi) / 2).tolist())
    tr = trajectory(spec, x0, args.t_max, _cfg(args), args.dt)
    rows = [[t, *p] for t, p in zip(tr.times, tr.points)]
    body = _csv(["t"] + [f"x{k}" for k in range(spec.dim)], rows)
    if args.out:
        rep = _report("trajectory", args, spec, {"x0": x0, "T": args.t_max, "n_samples": len(rows),
                                                 "final": tr.points[-1].tolist()})
        _emit(args, "trajectory.json", rep, {"trajectory.csv": body})
    else:
        sys.stdout.write(body)
    return EXIT_OK


# --------------------------------------------------------------------------
# pseudo

def cmd_pseudo_gen(args):
    spec = _system(args)
    cfg = _cfg(args)
    if args.kind == "concat_ab":
        if args.a is None or args.b is None:
            raise UsageError("concat_ab needs --a and --b")
        po = make_concat_ab(spec, args.a, args.b, args.half_len, cfg)
    elif args.kind == "perturb":
        x0 = args.x0 or ((spec.region_lo + spec.region_hi) / 2).tolist()
        po = perturb_orbit(spec, x0, args.n, [args.noise] * args.n, args.seed, cfg)
    else:
        x0 = args.x0 or ((spec.region_lo + spec.region_hi) / 2).tolist()
        po = sample_orbit(spec, x0, [1.0] * args.n, cfg)
    text = io.dumps(po.to_dict())
    if args.out:
        io.write_atomic(os.path.join(args.out, args.name), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load_po(args):
    spec = _system(args) if (args.file or args.system) else None
    with open(args.po, encoding="utf-8") as fh:
        return PseudoOrbit.from_dict(io.loads(fh.read()), spec)


def cmd_pseudo_classify(args):
    po = _load_po(args)
    cfg = _cfg(args)
    rep = classify(po, args.kind, args.delta, cfg, tail_tol=args.tail_tol)
    d = defects(po, cfg)
    idx = np.arange(po.i_min, po.i_max)
    out = _report("classification", args, po.system, rep.to_dict(), rep.verdict)
    _emit(args, "classification.json", out, {"defects.csv": _csv(["i", "defect"], zip(idx, d))})
    return {"holds": EXIT_OK, "fails": EXIT_REFUTED}.get(rep.verdict, EXIT_INCONCLUSIVE)


# --------------------------------------------------------------------------
# shadow

def _grid(spec, n):
    return V.candidate_grid(spec, n)


def cmd_shadow_search(args):
    po = _load_po(args)
    cfg = _cfg(args)
    res = search_shadowing(po, args.mode, _grid(po.system, args.grid), ReparamClass(args.lam), args.gap_n, cfg)
    body = {"search": res.to_dict()}
    status, code = "ok", EXIT_OK
    meta = po.meta
    if meta.get("construction") == "concat_ab" and args.mode in ("average", "asymptotic_average"):
        # the designed orbit of the average-shadowing theorem: attach the lower-bound certificate
        spec = po.system
        g, s, cands = V._graph(spec, args.depth, args.t_edge, cfg)
        cand = V._attractor_for(g, cands, meta["a"])
        if cand is not None:
            cert = certify_average_nonshadowing(spec, cand, meta["b"], args.eps0, args.depth, cfg, graph=g)
            body["certificate"] = cert.to_dict()
            if cert.valid and res.value >= args.eps0 / 2 - 1e-6:
                status, code = "refuted", EXIT_REFUTED
                body["conclusion"] = (f"no {args.mode}-shadow at level {args.eps0 / 2!r}: certified lower bound "
                                      f"{cert.lower_bound!r}, searched minimum {res.value!r}")
    rows = [[i, v] for i, v in enumerate(res.per_segment["forward"])]
    rows += [[-1 - i, v] for i, v in enumerate(res.per_segment.get("backward", []))]
    _emit(args, "shadow.json", _report("shadow_search", args, po.system, body, status),
          {"per_segment.csv": _csv(["segment", "error"], rows)})
    return code


def cmd_shadow_certify(args):
    cfg = _cfg(args)
    if args.recheck:
        with open(args.recheck, encoding="utf-8") as fh:
            cert = io.loads(fh.read())
        ok, msgs = V.recheck_certificate(cert, cfg)
        sys.stdout.write(io.dumps({"kind": "recheck", "agrees": ok, "messages": msgs}))
        return EXIT_OK if ok else EXIT_REFUTED
    spec = _system(args)
    if args.a is None or args.b is None:
        raise UsageError("certify needs --a and --b")
    g, s, cands = V._graph(spec, args.depth, args.t_edge, cfg)
    cand = V._attractor_for(g, cands, args.a)
    if cand is None:
        raise UsageError("--a does not lie in an attractor candidate")
    cert = certify_average_nonshadowing(spec, cand, args.b, args.eps0, args.depth, cfg, graph=g)
    _emit(args, "certificate.json", cert.to_dict())
    return EXIT_OK if cert.valid else EXIT_INCONCLUSIVE


# --------------------------------------------------------------------------
# chain

def _chain_graph(args, spec):
    cover = build_cover(spec.space, spec.region, args.depth)
    t_edge = V.default_t_edge(spec) if args.t_edge is None else args.t_edge
    return transition_graph(spec, cover, args.delta, t_edge, cfg=_cfg(args))


def cmd_chain(args):
    spec = _system(args)
    if args.action == "omega":
        cover = build_cover(spec.space, spec.region, args.depth)
        x0 = args.x0 or ((spec.region_lo + spec.region_hi) / 2).tolist()
        boxes = omega_limit(spec, np.asarray(x0, dtype=float), args.burn, args.t_max or 100.0, cover, _cfg(args))
        _emit(args, "omega.json", _report("omega_limit", args, spec, {"cover": cover.to_dict(), "boxes": boxes}))
        return EXIT_OK
    g = _chain_graph(args, spec)
    s = scc(g)
    if args.action == "graph":
        if args.out:
            _emit(args, "graph.json", _report("graph", args, spec, g.to_dict()), {"graph.txt": g.edge_list_text()})
        else:
            sys.stdout.write(g.edge_list_text())
        return EXIT_OK
    if args.action == "scc":
        body = {"cover": g.cover.to_dict(), "labels": s.labels, "recurrent": s.recurrent,
                "components": [c.tolist() for c in s.components], "dag_edges": s.dag_edges}
        _emit(args, "scc.json", _report("scc", args, spec, body))
        return EXIT_OK
    if args.action == "transitive":
        ct = chain_transitive(g, s)
        _emit(args, "chain_transitive.json",
              _report("chain_transitive", args, spec, ct.to_dict(), "holds" if ct.transitive else "refuted"))
        return EXIT_OK if ct.transitive else EXIT_REFUTED
    cands = find_attractors(g, s)
    if args.action == "attractors":
        _emit(args, "attractors.json", _report("attractors", args, spec, [c.to_dict() for c in cands]))
        return EXIT_OK
    # basin of the candidate holding --x0 (or every candidate)
    if args.x0:
        c = V._attractor_for(g, cands, args.x0)
        if c is None:
            raise UsageError("--x0 does not lie in an attractor candidate")
        cands = [c]
    body = [{"boxes": c.boxes, "basin": ancestors(g, c.boxes)} for c in cands]
    _emit(args, "basin.json", _report("basin", args, spec, body))
    return EXIT_OK


def cmd_transitive_test(args):
    spec = _system(args)
    g = _chain_graph(args, spec)
    rep = topologically_transitive(spec, g.cover, args.pairs, args.t_max or 600.0, _cfg(args), args.seed, graph=g)
    _emit(args, "transitivity.json", _report("transitivity", args, spec, rep.to_dict(), rep.verdict))
    return {"verified-for-samples": EXIT_OK, "refuted": EXIT_REFUTED}.get(rep.verdict, EXIT_INCONCLUSIVE)


# --------------------------------------------------------------------------
# verify

def cmd_verify(args):
    spec = _system(args)
    cfg = _cfg(args)
    tid = args.theorem
    depth = args.depth
    if tid == "prop3":
        rep = V.verify_prop3(spec, depth, cfg, args.t_edge)
    elif tid in ("thm_asp", "thm_aasp"):
        if args.a is None or args.b is None:
            raise UsageError(f"{tid} needs --a and --b")
        if tid == "thm_asp":
            rep = V.verify_thm_asp(spec, args.a, args.b, args.eps0, args.delta, args.half_len, cfg, depth,
                                   args.grid, args.t_edge)
        else:
            rep = V.verify_thm_aasp(spec, args.a, args.b, args.eps0, args.half_len, cfg, depth, args.grid, args.t_edge)
    elif tid == "lem_plsp":
        rep = V.verify_lemma_plsp(spec, args.x0 or ((spec.region_lo + spec.region_hi) / 2).tolist(),
                                  args.gap_k, cfg=cfg)
    elif tid == "lem_nonempty":
        if args.x is None or args.y is None:
            raise UsageError("lem_nonempty needs --x and --y")
        rep = V.verify_lemma_nonempty(spec, args.x, args.y, args.gap_n, args.grid, args.t_witness, cfg, depth,
                                      args.t_edge)
    elif tid == "thm_gap_noattractor":
        rep = V.verify_thm_gap_noattractor(spec, cfg, depth, args.grid, args.gap_n, args.t_witness, args.t_edge)
    elif tid == "lem_tt":
        rep = V.verify_lemma_tt(spec, cfg, depth, args.t_max or 600.0, args.pairs, args.seed, args.t_edge)
    elif tid == "prop_chain_limit_shadow":
        rep = V.verify_prop_chain_limit_shadow(spec, args.x0, cfg=cfg)
    else:
        rep = V.verify_thm_final(spec, cfg, args.depth if args.depth_given else None, args.grid, args.gap_n,
                                 args.t_witness, args.t_max or 600.0, args.pairs, args.seed, args.t_edge)
    d = rep.to_dict()
    d["run_config"] = _run_config(args, spec)
    _emit(args, f"verify_{tid}.json", d)
    return rep.exit_code


# --------------------------------------------------------------------------
# parser

def _common(p, system=True):
    g = p.add_argument_group("common")
    if system:
        g.add_argument("--system", help="catalog system id (see `sys list`)")
        g.add_argument("--file", help="system definition file")
        g.add_argument("--alpha", type=float, help="torus_linear frequency ratio")
    g.add_argument("--step", type=float, default=1e-3, help="RK4 step (default 1e-3)")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--jobs", type=int, default=1, help="worker cap for compiled kernels (default 1)")
    g.add_argument("--out", help="output directory; reports go to stdout when absent")


def _chain_opts(p, delta=True):
    p.add_argument("--depth", type=int, default=6, help="box cover depth, 2^depth boxes per axis (default 6)")
    if delta:
        p.add_argument("--delta", type=float, default=0.0, help="edge slack for delta-chain graphs (default 0)")
    p.add_argument("--t-edge", type=float, default=None,
                   help="edge time horizon (default 200 for torus_linear, else 2)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flowshadow", description=__doc__.strip().splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sys", help="catalog browsing")
    s2 = p.add_subparsers(dest="action", required=True)
    q = s2.add_parser("list", help="list catalog systems")
    q.set_defaults(func=cmd_sys_list)
    q = s2.add_parser("show", help="print a system definition")
    q.add_argument("name", nargs="?")
    _common(q)
    q.set_defaults(func=cmd_sys_show)

    p = sub.add_parser("integrate", help="integrate one trajectory and print it as CSV")
    _common(p)
    p.add_argument("--x0", type=_floats, help="initial point (default: region center)")
    p.add_argument("--t-max", type=float, default=10.0, help="time horizon (default 10)")
    p.add_argument("--dt", type=float, default=None, help="sample spacing (default: the integration step)")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("pseudo", help="pseudo-orbit generation and classification")
    s2 = p.add_subparsers(dest="action", required=True)
    q = s2.add_parser("gen", help="generate a pseudo-orbit file")
    _common(q)
    q.add_argument("--kind", choices=("concat_ab", "perturb", "orbit"), default="concat_ab")
    q.add_argument("--a", type=_floats, help="concat_ab: backward half lies on the orbit of a")
    q.add_argument("--b", type=_floats, help="concat_ab: forward half lies on the orbit of b")
    q.add_argument("--half-len", type=int, default=32, help="concat_ab window half length (default 32)")
    q.add_argument("--x0", type=_floats, help="perturb/orbit: initial point")
    q.add_argument("--n", type=int, default=20, help="perturb/orbit: number of steps (default 20)")
    q.add_argument("--noise", type=float, default=0.01, help="perturb: ball radius (default 0.01)")
    q.add_argument("--name", default="pseudo.po", help="file name inside --out (default pseudo.po)")
    q.set_defaults(func=cmd_pseudo_gen)
    q = s2.add_parser("classify", help="classify a pseudo-orbit")
    _common(q)
    q.add_argument("--po", required=True, help="pseudo-orbit file")
    q.add_argument("--kind", choices=KINDS, required=True)
    q.add_argument("--delta", type=float, default=None, help="threshold for delta kinds")
    q.add_argument("--tail-tol", type=float, default=1e-3, help="limit kinds: tail tolerance (default 1e-3)")
    q.set_defaults(func=cmd_pseudo_classify)

    p = sub.add_parser("shadow", help="shadowing search and certificates")
    s2 = p.add_subparsers(dest="action", required=True)
    q = s2.add_parser("search", help="search a shadowing orbit for a pseudo-orbit file")
    _common(q)
    _chain_opts(q)
    q.add_argument("--po", required=True, help="pseudo-orbit file")
    q.add_argument("--mode", choices=MODES, required=True)
    q.add_argument("--grid", type=int, default=4001, help="candidate points per axis (default 4001)")
    q.add_argument("--lam", type=float, default=1.0, help="reparameterization slope bound (default 1: h = id)")
    q.add_argument("--gap-n", type=float, default=4.0, help="gap mode: K range [-N, N] (default 4)")
    q.add_argument("--eps0", type=float, default=0.5, help="certificate level (default 0.5)")
    q.set_defaults(func=cmd_shadow_search)
    q = s2.add_parser("certify", help="average non-shadowing certificate, or re-check one")
    _common(q)
    _chain_opts(q)
    q.add_argument("--a", type=_floats, help="point of the attractor")
    q.add_argument("--b", type=_floats, help="point outside its basin")
    q.add_argument("--eps0", type=float, default=0.5, help="certificate level (default 0.5)")
    q.add_argument("--recheck", help="certificate file to replay instead")
    q.set_defaults(func=cmd_shadow_certify)

    p = sub.add_parser("chain", help="box cover transition graph analysis")
    p.add_argument("action", choices=("graph", "scc", "transitive", "attractors", "basin", "omega"))
    _common(p)
    _chain_opts(p)
    p.add_argument("--x0", type=_floats, help="basin: point in the attractor; omega: initial point")
    p.add_argument("--burn", type=float, default=50.0, help="omega: burn-in time (default 50)")
    p.add_argument("--t-max", type=float, default=None, help="omega: observation time (default 100)")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("transitive-test", help="sampled topological transitivity on box pairs")
    _common(p)
    _chain_opts(p)
    p.add_argument("--t-max", type=float, default=None, help="hitting time horizon (default 600)")
    p.add_argument("--pairs", type=int, default=20, help="random pair budget (default 20)")
    p.set_defaults(func=cmd_transitive_test)

    p = sub.add_parser("verify", help="run a theorem harness")
    p.add_argument("theorem", choices=V.THEOREMS)
    _common(p)
    _chain_opts(p, delta=False)
    p.add_argument("--delta", type=float, default=0.1, help="thm_asp: delta-average threshold (default 0.1)")
    p.add_argument("--a", type=_floats, help="thm_asp/thm_aasp: point of the attractor")
    p.add_argument("--b", type=_floats, help="thm_asp/thm_aasp: point outside its basin")
    p.add_argument("--x", type=_floats, help="lem_nonempty: x")
    p.add_argument("--y", type=_floats, help="lem_nonempty: y")
    p.add_argument("--x0", type=_floats, help="lem_plsp / prop_chain_limit_shadow: base point")
    p.add_argument("--eps0", type=float, default=0.5, help="certificate level (default 0.5)")
    p.add_argument("--half-len", type=int, default=32, help="concat_ab half length (default 32)")
    p.add_argument("--grid", type=int, default=4001, help="candidate points per axis (default 4001)")
    p.add_argument("--gap-n", type=float, default=4.0, help="K range [-N, N] (default 4)")
    p.add_argument("--gap-k", type=float, default=2.0, help="lem_plsp: true gap (default 2)")
    p.add_argument("--t-witness", type=float, default=20.0, help="witness horizon (default 20)")
    p.add_argument("--t-max", type=float, default=None, help="transitivity horizon (default 600)")
    p.add_argument("--pairs", type=int, default=20, help="transitivity pair budget (default 20)")
    p.set_defaults(func=cmd_verify)
    return ap


def _set_jobs(jobs: int) -> None:
    """Cap compiled-kernel threads; a no-op for the default single worker."""
    if jobs is None or jobs == 1:
        return
    if jobs < 1:
        raise UsageError("--jobs must be positive")
    import warnings

    import numba
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", numba.NumbaWarning)
        numba.set_num_threads(min(jobs, numba.config.NUMBA_NUM_THREADS))


def run(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR
    args.command_path = " ".join([args.command] + ([args.action] if getattr(args, "action", None) else []))
    args.depth_given = "--depth" in argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _set_jobs(getattr(args, "jobs", 1))
        return args.func(args)
    except (UsageError, ParseError, ValueError, KeyError, OSError, EscapeError) as e:
        sys.stderr.write(f"flowshadow: error: {e}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
