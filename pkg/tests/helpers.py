"""Shared test utilities: brute-force search oracle and random graphs."""

import itertools

import numpy as np

from graphdigits.features import MidLevelFeatureClass
from graphdigits.graphs import PointGraph
from graphdigits.measurements import relation_fields, unary_fields
from graphdigits.recognizer import Detection, PrimitiveIndex, _bbox_of


def brute_force_instances(index: PrimitiveIndex,
                          cls: MidLevelFeatureClass) -> dict:
    """All member assignments by exhaustive enumeration, keyed like
    find_instances detections."""
    g = cls.graph
    n = len(g.types)
    pools = [index.by_kind.get(t, []) for t in g.types]
    out = {}
    for assignment in itertools.product(*pools):
        used = set()
        ok = True
        for p in assignment:
            if used & p.edges:
                ok = False
                break
            used |= p.edges
        if not ok:
            continue
        for j in range(n):
            meas = index.unary[assignment[j]]
            if not all(cls.ranges[("v", j, f)].contains(meas[f])
                       for f in unary_fields(g.types[j])):
                ok = False
                break
        if not ok:
            continue
        for a, b in sorted(g.edges):
            meas = index.relation(assignment[a], assignment[b])
            for f in relation_fields(g.types[a], g.types[b]):
                if not cls.ranges[("e", a, b, f)].contains(meas[f]):
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        cov = sum(index.graph.edge_length(e) for e in used) \
            / index.total_length
        if cov + 1e-12 < cls.min_coverage:
            continue
        det = Detection(cls.class_id, cls.label, tuple(assignment), cov,
                        _bbox_of(assignment), index.component_index)
        out.setdefault(det.key(), det)
    return out


def random_connected_graph(rng: np.random.Generator, max_edges: int = 8
                           ) -> PointGraph:
    """Random connected graph with at most ``max_edges`` edges."""
    n = int(rng.integers(3, max_edges + 1))
    pts = rng.uniform(0, 200, (n, 2))
    edges = set()
    order = rng.permutation(n)
    for a, b in zip(order, order[1:]):
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    while len(edges) < max_edges and rng.random() < 0.5:
        a, b = rng.integers(0, n, 2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return PointGraph(pts, edges)
