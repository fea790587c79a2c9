"""
Attractors, repellers and transitivity on the catalog systems.

Prints the recurrent structure of each box graph, whether it is chain
transitive, and a sampled topological transitivity check.
"""

from flowshadow import builtin
from flowshadow.chain import (build_cover, chain_transitive, find_attractors, scc, topologically_transitive,
                              transition_graph)

SYSTEMS = [("pitchfork1d", {}, 6, 2.0), ("circle_ns", {}, 6, 2.0), ("torus_linear", {"alpha": 2 ** 0.5}, 4, 200.0)]


def main():
    for name, params, depth, t_edge in SYSTEMS:
        spec = builtin(name, params)
        graph = transition_graph(spec, build_cover(spec.space, None, depth), 0.0, t_edge)
        comps = scc(graph)
        ct = chain_transitive(graph, comps)
        print(f"{name}: {graph.cover.n_boxes} boxes, {len(graph.edges)} edges, "
              f"{comps.n_components} components, chain transitive = {ct.transitive}")
        for cand in find_attractors(graph, comps):
            lo, hi = graph.cover.hull(cand.boxes)
            reps = [r.tolist()[:4] for r in cand.repellers]
            print(f"  attractor boxes {cand.boxes.size} in [{lo.round(3)}, {hi.round(3)}], "
                  f"proper = {cand.proper}, repellers {reps}")
        rep = topologically_transitive(spec, graph.cover, 10, 600.0, seed=0, graph=graph)
        print(f"  sampled transitivity: {rep.verdict} ({rep.n_verified}/{len(rep.pairs)} pairs hit)")


if __name__ == "__main__":
    main()
