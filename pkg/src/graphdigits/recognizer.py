"""Searching simplified graphs for mid-level feature class instances and
classifying scenes.

The search assigns class-graph vertices to candidate primitives by
backtracking, pruning on unary measurement intervals at assignment time
and on relation intervals edge by edge.  It is complete up to the stated
budget; budget exhaustion is reported separately from "no instance".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import MidLevelFeatureClass
from .graphs import PointGraph, build_pixel_graph, simplify, split_components
from .measurements import measure_primitive, measure_relation, relation_fields, unary_fields
from .primitives import DecomposeConfig, Primitive, candidate_primitives
from .thinning import recurrent_filter, thin


@dataclass
class SearchBudget:
    max_walk_edges: int = 24
    max_loop_edges: int = 16
    node_limit: int = 1_000_000
    # components with more edges than this (dense webs from degenerate
    # masks) are not searched; reported as budget exhaustion
    max_component_edges: int = 300
    # scene components with less total ink length than this (pixels, after
    # upscaling) are specks, not objects, and are not searched
    min_component_length: float = 50.0


@dataclass(frozen=True)
class Detection:
    class_id: str
    label: int
    assignment: tuple[Primitive, ...]  # one primitive per class vertex
    coverage: float
    bbox: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    component_index: int = 0
    iteration: int = 0

    def key(self) -> tuple:
        return tuple(sorted(p.key() for p in self.assignment))

    def to_json(self) -> dict:
        return {"label": self.label, "class-id": self.class_id,
                "coverage": self.coverage, "bbox": list(self.bbox),
                "component": self.component_index,
                "iteration": self.iteration}


@dataclass
class SearchResult:
    detections: list[Detection]
    exhausted: bool = False


class PrimitiveIndex:
    """Candidate primitives of one simplified-graph component, with their
    unary measurements cached.  Reused across classes during search."""

    def __init__(self, graph: PointGraph, budget: SearchBudget | None = None,
                 line_threshold: float = 0.1, component_index: int = 0):
        budget = budget or SearchBudget()
        self.graph = graph
        self.component_index = component_index
        self.total_length = graph.total_length
        config = DecomposeConfig(line_threshold=line_threshold,
                                 max_walk_edges=budget.max_walk_edges,
                                 max_loop_edges=budget.max_loop_edges,
                                 max_cover_candidates=10**9)
        stats: dict = {}
        if len(graph.edges) > budget.max_component_edges:
            prims = []
            stats["truncated"] = True
        else:
            prims = candidate_primitives(graph, config, stats=stats)
        self.truncated = bool(stats.get("truncated"))
        self.by_kind: dict[str, list[Primitive]] = {}
        self.unary: dict[Primitive, dict] = {}
        for p in prims:
            self.by_kind.setdefault(p.kind, []).append(p)
            self.unary[p] = measure_primitive(p)
        for lst in self.by_kind.values():
            lst.sort(key=lambda p: (-p.length, p.verts))
        self._relation_cache: dict[tuple, dict] = {}

    def relation(self, p: Primitive, q: Primitive) -> dict:
        key = (p.kind, p.verts, q.kind, q.verts)
        out = self._relation_cache.get(key)
        if out is None:
            out = measure_relation(p, q, self.total_length)
            self._relation_cache[key] = out
        return out


def _bbox_of(assignment) -> tuple[float, float, float, float]:
    pts = np.vstack([np.asarray(p.coords) for p in assignment])
    return (float(pts[:, 0].min()), float(pts[:, 1].min()),
            float(pts[:, 0].max()), float(pts[:, 1].max()))


def find_instances(graph_or_index, cls: MidLevelFeatureClass,
                   budget: SearchBudget | None = None,
                   max_detections: int | None = None) -> SearchResult:
    """All member assignments of ``cls`` in one simplified graph.

    Detections differing only in walk orientation or in a permutation of
    same-type class vertices are reported once.  ``max_detections`` stops
    the search early once that many distinct detections exist; use it when
    only existence (or a sample) of instances is needed, not completeness.
    """
    budget = budget or SearchBudget()
    index = (graph_or_index if isinstance(graph_or_index, PrimitiveIndex)
             else PrimitiveIndex(graph_or_index, budget))
    g = cls.graph
    n = len(g.types)
    if index.total_length <= 0:
        return SearchResult([])

    # most constrained vertices first: descending measurement count
    def constraint_count(j):
        c = len(unary_fields(g.types[j]))
        for a, b in g.edges:
            if j in (a, b):
                c += len(relation_fields(g.types[a], g.types[b]))
        return c

    order = sorted(range(n), key=lambda j: (-constraint_count(j), j))
    edges_by_pos: list[list[tuple[int, int]]] = []
    for pos in range(n):
        j = order[pos]
        earlier = set(order[:pos])
        edges_by_pos.append([(a, b) for a, b in sorted(g.edges)
                             if (a == j and b in earlier)
                             or (b == j and a in earlier)])

    assigned: dict[int, Primitive] = {}
    used_edges: set[tuple[int, int]] = set()
    detections: dict[tuple, Detection] = {}
    nodes = 0
    exhausted = index.truncated
    capped = False

    def vertex_ok(j, p) -> bool:
        meas = index.unary[p]
        return all(cls.ranges[("v", j, f)].contains(meas[f])
                   for f in unary_fields(g.types[j]))

    def edges_ok(pos, p) -> bool:
        j = order[pos]
        for a, b in edges_by_pos[pos]:
            pa = p if a == j else assigned[a]
            pb = p if b == j else assigned[b]
            meas = index.relation(pa, pb)
            for f in relation_fields(g.types[a], g.types[b]):
                if not cls.ranges[("e", a, b, f)].contains(meas[f]):
                    return False
        return True

    def assign(pos):
        nonlocal nodes, exhausted, capped
        if exhausted or capped:
            return
        if pos == n:
            assignment = tuple(assigned[j] for j in range(n))
            cov = sum(index.graph.edge_length(e) for e in used_edges) \
                / index.total_length
            if cov + 1e-12 < cls.min_coverage:
                return
            det = Detection(cls.class_id, cls.label, assignment, cov,
                            _bbox_of(assignment), index.component_index)
            detections.setdefault(det.key(), det)
            if max_detections is not None \
                    and len(detections) >= max_detections:
                capped = True
            return
        j = order[pos]
        for p in index.by_kind.get(g.types[j], ()):
            nodes += 1
            if nodes > budget.node_limit:
                exhausted = True
                return
            if used_edges & p.edges:
                continue
            if not vertex_ok(j, p):
                continue
            if not edges_ok(pos, p):
                continue
            assigned[j] = p
            used_edges.update(p.edges)
            assign(pos + 1)
            used_edges.difference_update(p.edges)
            del assigned[j]

    assign(0)
    return SearchResult(sorted(detections.values(),
                               key=lambda d: (-d.coverage, d.key())),
                        exhausted)


@dataclass
class SceneResult:
    detections: list[Detection]
    exhausted: bool = False


def scene_components(mask: np.ndarray, line_threshold: float = 0.1,
                     budget: SearchBudget | None = None
                     ) -> list[PrimitiveIndex]:
    """Thin, build, simplify and split a binary scene into per-component
    primitive indexes."""
    budget = budget or SearchBudget()
    mask = np.asarray(mask, bool)
    if not mask.any():
        return []
    skeleton = thin(mask)
    graph = simplify(build_pixel_graph(skeleton), mask)
    comps = [c for c in split_components(graph)
             if c.edges and c.total_length >= budget.min_component_length]
    return [PrimitiveIndex(c, budget, line_threshold, component_index=i)
            for i, c in enumerate(comps)]


def classify_scene(mask: np.ndarray, model: list[MidLevelFeatureClass],
                   budget: SearchBudget | None = None,
                   line_threshold: float = 0.1) -> SceneResult:
    """Search every class in every connected component; per component the
    highest-coverage detection wins."""
    if not model:
        raise ValueError("model is empty")
    budget = budget or SearchBudget()
    winners: list[Detection] = []
    exhausted = False
    for index in scene_components(mask, line_threshold, budget):
        best: Detection | None = None
        for cls in model:
            result = find_instances(index, cls, budget)
            exhausted = exhausted or result.exhausted
            for det in result.detections[:1]:
                if best is None or det.coverage > best.coverage or (
                        det.coverage == best.coverage
                        and det.class_id < best.class_id):
                    best = det
        if best is not None:
            winners.append(best)
    return SceneResult(winners, exhausted)


def classify_single(mask: np.ndarray, model: list[MidLevelFeatureClass],
                    budget: SearchBudget | None = None,
                    line_threshold: float = 0.1) -> int | None:
    """Label of the maximum-coverage detection, or None when nothing
    fires."""
    result = classify_scene(mask, model, budget, line_threshold)
    if not result.detections:
        return None
    best = max(result.detections, key=lambda d: d.coverage)
    return best.label


def recognize_noisy(mask: np.ndarray, model: list[MidLevelFeatureClass],
                    kernel: int = 3, threshold: float = 0.25,
                    max_iterations: int = 10,
                    budget: SearchBudget | None = None,
                    line_threshold: float = 0.1
                    ) -> tuple[Detection | None, int | None]:
    """Search the raw input and each recurrent-filter iteration; return the
    first detection and the iteration it appeared at (0 = raw input)."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    stages = [np.asarray(mask, bool)]
    stages += recurrent_filter(mask, kernel, threshold, max_iterations)
    for iteration, img in enumerate(stages):
        if not img.any():
            continue
        result = classify_scene(img, model, budget, line_threshold)
        if result.detections:
            best = max(result.detections, key=lambda d: d.coverage)
            return (Detection(best.class_id, best.label, best.assignment,
                              best.coverage, best.bbox, best.component_index,
                              iteration), iteration)
    return None, None
