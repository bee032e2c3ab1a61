"""Mid-level feature classes: typed decomposition graphs, measurement
ranges, membership tests, range learning and informative-class selection.

A feature class pairs a typed graph (vertices = primitive kinds, edges =
measured pairwise relations) with closed intervals for every named
measurement.  A candidate belongs to the class when some type- and
adjacency-preserving bijection maps all its measurements into the
corresponding intervals.  Relation measurements are stored for the ordered
pair ``(j, k)`` with ``j < k`` in the class graph; the candidate side is
always measured in the mapped order.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .measurements import (ANGULAR_FIELDS, CIRCULAR_FIELDS, relation_fields,
                           unary_fields)


@dataclass(frozen=True)
class DecompositionGraph:
    types: tuple[str, ...]
    edges: frozenset[tuple[int, int]]  # j < k, no self-edges

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        norm = frozenset((min(j, k), max(j, k)) for j, k in self.edges)
        if any(j == k for j, k in norm):
            raise ValueError("self-edges are not allowed")
        if any(not 0 <= v < len(self.types) for e in norm for v in e):
            raise ValueError("edge references an unknown vertex")
        object.__setattr__(self, "edges", norm)

    @classmethod
    def complete(cls, types) -> "DecompositionGraph":
        n = len(types)
        return cls(tuple(types),
                   frozenset((j, k) for j in range(n) for k in range(j + 1, n)))

    def shape_key(self) -> tuple:
        """Isomorphism-invariant fingerprint: per-vertex (type, sorted
        neighbor types), sorted.  Sufficient for the tiny graphs used
        here."""
        profile = sorted(
            (self.types[v],
             tuple(sorted(self.types[u] for e in self.edges if v in e
                          for u in e if u != v)))
            for v in range(len(self.types)))
        return tuple(profile)


def equivalent_bijections(g1: DecompositionGraph, g2: DecompositionGraph):
    """Yield every type- and adjacency-preserving bijection g1 -> g2."""
    n = len(g1.types)
    if n != len(g2.types) or sorted(g1.types) != sorted(g2.types):
        return
    if len(g1.edges) != len(g2.edges):
        return
    for perm in itertools.permutations(range(n)):
        if any(g1.types[j] != g2.types[perm[j]] for j in range(n)):
            continue
        ok = all((min(perm[j], perm[k]), max(perm[j], perm[k])) in g2.edges
                 for j, k in g1.edges)
        if ok:
            yield perm


def graphs_equivalent(g1: DecompositionGraph,
                      g2: DecompositionGraph) -> tuple[int, ...] | None:
    return next(equivalent_bijections(g1, g2), None)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    circular: bool = False

    def __post_init__(self):
        if not self.circular and self.lo > self.hi:
            raise ValueError("lo must not exceed hi")
        if self.circular and self.width >= 360.0:
            raise ValueError("circular interval must span less than 360")

    @property
    def width(self) -> float:
        if self.circular:
            return (self.hi - self.lo) % 360.0
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        if self.circular:
            return ((x - self.lo) % 360.0) <= self.width + 1e-12
        return self.lo - 1e-12 <= x <= self.hi + 1e-12

    def widen(self, amount: float) -> "Interval":
        if self.circular:
            new_width = min(self.width + 2 * amount, 359.0)
            extra = (new_width - self.width) / 2.0
            return Interval((self.lo - extra) % 360.0,
                            (self.hi + extra) % 360.0, True)
        return Interval(self.lo - amount, self.hi + amount, False)


class WideCircularRangeError(ValueError):
    """Circular samples spread over at least 180 degrees: the minimal
    covering arc is ambiguous and the measurement uninformative."""


def circular_cover(samples) -> tuple[float, float]:
    """Smallest arc [lo, hi] (counterclockwise lo -> hi) containing all
    sample angles.  Raises when the spread reaches 180 degrees."""
    angles = sorted(a % 360.0 for a in samples)
    if len(angles) == 1:
        return angles[0], angles[0]
    gaps = [(angles[(i + 1) % len(angles)] - angles[i]) % 360.0
            for i in range(len(angles))]
    i_max = int(np.argmax(gaps))
    width = 360.0 - gaps[i_max]
    if width >= 180.0:
        raise WideCircularRangeError(f"sample spread {width:.1f} degrees")
    lo = angles[(i_max + 1) % len(angles)]
    hi = angles[i_max]
    return lo, hi


VKey = tuple[str, int, str]          # ("v", vertex, field)
EKey = tuple[str, int, int, str]     # ("e", j, k, field)


def measurement_keys(graph: DecompositionGraph) -> list[tuple]:
    keys: list[tuple] = []
    for j, t in enumerate(graph.types):
        for f in unary_fields(t):
            keys.append(("v", j, f))
    for j, k in sorted(graph.edges):
        for f in relation_fields(graph.types[j], graph.types[k]):
            keys.append(("e", j, k, f))
    return keys


@dataclass(frozen=True)
class MidLevelFeatureClass:
    """The learned quadruple: source feature, typed graph, reference
    measurements and per-measurement ranges."""

    class_id: str
    label: int
    graph: DecompositionGraph
    measurements: dict = field(compare=False)  # key -> reference scalar
    ranges: dict = field(compare=False)        # key -> Interval
    min_coverage: float = 0.0
    hit_rate: float = 0.0
    false_alarm_rate: float = 0.0
    source: dict = field(default_factory=dict, compare=False)

    def with_stats(self, hit: float, fa: float) -> "MidLevelFeatureClass":
        return replace(self, hit_rate=hit, false_alarm_rate=fa)


class _Unconstrained:
    """Range stand-in that accepts everything (structure-only search)."""

    circular = False
    lo = -np.inf
    hi = np.inf
    width = np.inf

    def contains(self, x) -> bool:
        return True


UNCONSTRAINED = _Unconstrained()


def structural_class(label: int, graph: DecompositionGraph,
                     min_coverage: float = 0.0,
                     class_id: str = "structural") -> MidLevelFeatureClass:
    """A class that constrains only the decomposition-graph structure."""
    ranges = {k: UNCONSTRAINED for k in measurement_keys(graph)}
    return MidLevelFeatureClass(class_id, label, graph, {}, ranges,
                                min_coverage=min_coverage)


def class_membership(candidate_graph: DecompositionGraph,
                     candidate_unary: list[dict],
                     candidate_relation, cls: MidLevelFeatureClass) -> bool:
    """True iff some bijection maps every candidate measurement into the
    class's interval.

    ``candidate_unary[i]`` holds the unary measurements of candidate
    vertex i; ``candidate_relation(a, b)`` returns the relation
    measurements for the ordered candidate pair (a, b).
    """
    for f in equivalent_bijections(cls.graph, candidate_graph):
        if _bijection_fits(cls, candidate_unary, candidate_relation, f):
            return True
    return False


def _bijection_fits(cls, cand_unary, cand_rel, f) -> bool:
    for j, t in enumerate(cls.graph.types):
        meas = cand_unary[f[j]]
        for name in unary_fields(t):
            if not cls.ranges[("v", j, name)].contains(meas[name]):
                return False
    for j, k in sorted(cls.graph.edges):
        meas = cand_rel(f[j], f[k])
        for name in relation_fields(cls.graph.types[j], cls.graph.types[k]):
            if not cls.ranges[("e", j, k, name)].contains(meas[name]):
                return False
    return True


def learn_class(label: int, graph: DecompositionGraph,
                examples: list[dict], reference: dict | None = None,
                slack: dict | float = 0.0, min_coverage: float = 0.0,
                class_id: str = "", source: dict | None = None,
                on_wide_circular: str = "error") -> MidLevelFeatureClass:
    """Learn closed per-measurement intervals from measured examples.

    Each example maps every measurement key of ``graph`` to a scalar.
    Scalar intervals are [min - a, max + a]; circular measurements use the
    smallest covering arc before widening.  ``slack`` is either one number
    or a per-key dict.  ``on_wide_circular``: "error" raises when circular
    samples spread over >= 180 degrees; "drop" replaces that measurement
    with an unconstrained range.
    """
    if not examples:
        raise ValueError("at least one example is required")
    keys = measurement_keys(graph)
    ranges: dict = {}
    for key in keys:
        name = key[-1]
        samples = [ex[key] for ex in examples]
        a = slack.get(key, 0.0) if isinstance(slack, dict) else float(slack)
        if name in CIRCULAR_FIELDS:
            try:
                lo, hi = circular_cover(samples)
            except WideCircularRangeError:
                if on_wide_circular == "drop":
                    ranges[key] = UNCONSTRAINED
                    continue
                raise
            ranges[key] = Interval(lo, hi, circular=True).widen(a)
        else:
            ranges[key] = Interval(min(samples), max(samples)).widen(a)
    reference = reference if reference is not None else examples[0]
    return MidLevelFeatureClass(class_id, label, graph, dict(reference),
                                ranges, min_coverage=min_coverage,
                                source=source or {})


def slack_for(graph: DecompositionGraph, examples: list[dict],
              fraction: float, min_angle_slack: float = 5.0) -> dict:
    """Per-measurement widening: ``fraction`` of the observed span, with a
    floor for angular measurements."""
    out = {}
    for key in measurement_keys(graph):
        name = key[-1]
        samples = [ex[key] for ex in examples]
        if name in CIRCULAR_FIELDS:
            try:
                lo, hi = circular_cover(samples)
                span = (hi - lo) % 360.0
            except WideCircularRangeError:
                span = 360.0
        else:
            span = max(samples) - min(samples)
        amount = fraction * span
        if fraction > 0 and name in ANGULAR_FIELDS:
            amount = max(amount, min_angle_slack)
        out[key] = amount
    return out


def select_informative(candidates: list[MidLevelFeatureClass],
                       validation: list[tuple[int, object]],
                       fa_ceiling: float = 0.01,
                       search=None) -> list[MidLevelFeatureClass]:
    """Keep classes with false-alarm rate <= ceiling and non-zero hit rate.

    ``validation`` is a list of (label, simplified graph or primitive
    index).  Among surviving widened variants of the same source feature,
    only the highest-hit-rate one is kept.
    """
    if search is None:
        from .recognizer import find_instances

        def search(graph, cls):
            return bool(find_instances(graph, cls).detections)

    survivors: dict[tuple, MidLevelFeatureClass] = {}
    for cls in candidates:
        hits = others = hit_n = fa_n = 0
        for label, graph in validation:
            found = search(graph, cls)
            if label == cls.label:
                hit_n += 1
                hits += bool(found)
            else:
                fa_n += 1
                others += bool(found)
        hit = hits / hit_n if hit_n else 0.0
        fa = others / fa_n if fa_n else 0.0
        # on validation sets too small for the ceiling to admit even one
        # false alarm, tolerate a single one rather than reject everything
        allowed = max(fa_ceiling, 1.0 / fa_n) if fa_n else fa_ceiling
        if fa > allowed or hit <= 0.0:
            continue
        scored = cls.with_stats(hit, fa)
        group = cls.source.get("feature_id", cls.class_id)
        prev = survivors.get(group)
        if prev is None or (scored.hit_rate, -scored.false_alarm_rate) > \
                (prev.hit_rate, -prev.false_alarm_rate):
            survivors[group] = scored
    return sorted(survivors.values(), key=lambda c: c.class_id)


# --- model serialization -------------------------------------------------

MODEL_VERSION = 1


def _key_to_json(key) -> list:
    return list(key)


def _key_from_json(item) -> tuple:
    return tuple(item)


def _interval_to_json(iv) -> dict | None:
    if iv is UNCONSTRAINED or isinstance(iv, _Unconstrained):
        return None
    return {"lo": iv.lo, "hi": iv.hi, "circular": iv.circular}


def _interval_from_json(obj):
    if obj is None:
        return UNCONSTRAINED
    return Interval(obj["lo"], obj["hi"], obj["circular"])


def class_to_json(cls: MidLevelFeatureClass) -> dict:
    return {
        "class-id": cls.class_id,
        "label": cls.label,
        "graph": {"types": list(cls.graph.types),
                  "edges": sorted([list(e) for e in cls.graph.edges])},
        "measurements": [[_key_to_json(k), v]
                         for k, v in sorted(cls.measurements.items())],
        "ranges": [[_key_to_json(k), _interval_to_json(v)]
                   for k, v in sorted(cls.ranges.items())],
        "min-coverage": cls.min_coverage,
        "hit-rate": cls.hit_rate,
        "false-alarm-rate": cls.false_alarm_rate,
        "source": cls.source,
    }


def class_from_json(obj: dict) -> MidLevelFeatureClass:
    graph = DecompositionGraph(tuple(obj["graph"]["types"]),
                               frozenset(tuple(e) for e in obj["graph"]["edges"]))
    return MidLevelFeatureClass(
        obj["class-id"], obj["label"], graph,
        {_key_from_json(k): v for k, v in obj["measurements"]},
        {_key_from_json(k): _interval_from_json(v) for k, v in obj["ranges"]},
        min_coverage=obj["min-coverage"],
        hit_rate=obj["hit-rate"],
        false_alarm_rate=obj["false-alarm-rate"],
        source=obj["source"])


def save_model(path, classes: list[MidLevelFeatureClass],
               config: dict | None = None) -> None:
    doc = {"version": MODEL_VERSION, "configuration": config or {},
           "classes": [class_to_json(c) for c in classes]}
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)


def load_model(path) -> tuple[list[MidLevelFeatureClass], dict]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    return [class_from_json(c) for c in doc["classes"]], doc["configuration"]
