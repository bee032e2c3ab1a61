"""Scalar measurements on primitives and primitive pairs.

Every value is either an angle in degrees or a dimensionless ratio, so all
measurements are invariant under translation and uniform scaling of the
source coordinates.  Angular directions live in [0, 360); signed angles
(turn sums, direction differences) in (-180, 180] or (-360, 360).
"""

from __future__ import annotations

import numpy as np

from .primitives import ARC_MINUS, ARC_PLUS, LINE, LOOP, Primitive, turn_angles

ARC_KINDS = (ARC_PLUS, ARC_MINUS)

ARC_FIELDS = ("overall_change", "chord_direction", "normal_direction",
              "first_edge_direction", "last_edge_direction")
LINE_FIELDS = ("direction",)
LOOP_FIELDS: tuple[str, ...] = ()

RELATION_BASE_FIELDS = ("length_ratio", "com_offset_direction",
                        "com_offset_over_l1", "com_offset_over_l2",
                        "com_offset_over_lg")

CIRCULAR_FIELDS = frozenset({
    "chord_direction", "normal_direction", "first_edge_direction",
    "last_edge_direction", "direction", "com_offset_direction",
    # signed difference of two directions lives on the circle too: -180
    # and +180 are the same configuration
    "direction_difference",
})

# fields that are angles (get the 5-degree minimum widening slack)
ANGULAR_FIELDS = CIRCULAR_FIELDS | {"overall_change"}


def unary_fields(kind: str) -> tuple[str, ...]:
    if kind in ARC_KINDS:
        return ARC_FIELDS
    if kind == LINE:
        return LINE_FIELDS
    return LOOP_FIELDS


def relation_fields(kind_a: str, kind_b: str) -> tuple[str, ...]:
    """Relation measurement names; depends only on the two primitive types."""
    fields = RELATION_BASE_FIELDS
    if kind_a in ARC_KINDS and kind_b in ARC_KINDS:
        fields = fields + ("change_ratio",)
    n_loops = (kind_a == LOOP) + (kind_b == LOOP)
    if n_loops == 1:
        fields = fields + ("connection_quarter",)
    if n_loops == 0:
        fields = fields + ("direction_difference",)
    return fields


def direction_of(v: np.ndarray) -> float:
    return float(np.degrees(np.arctan2(v[1], v[0])) % 360.0)


def signed_diff(a: float, b: float) -> float:
    """Circular difference a - b wrapped to (-180, 180]."""
    return -((b - a + 180.0) % 360.0 - 180.0)


def overall_change(p: Primitive) -> float:
    from .primitives import splice_collinear
    coords = splice_collinear(np.asarray(p.coords))
    return float(turn_angles(coords).sum())


def _chord_and_normal(p: Primitive) -> tuple[float, float]:
    pts = np.asarray(p.coords)
    com = p.centroid()
    chord = pts[-1] - pts[0]
    if np.hypot(*chord) < 1e-9:
        # closed arc: the only invariant direction is body-to-closure-point
        d = direction_of(pts[0] - com)
        return d, d
    d = direction_of(chord)
    mid = 0.5 * (pts[0] + pts[-1])
    away = mid - com
    # pick the perpendicular pointing away from the arc body
    for cand in (d + 90.0, d - 90.0):
        u = np.array([np.cos(np.radians(cand)), np.sin(np.radians(cand))])
        if float(u @ away) >= 0.0:
            return d, cand % 360.0
    return d, (d + 90.0) % 360.0


def measure_arc(p: Primitive) -> dict[str, float]:
    if p.kind not in ARC_KINDS:
        raise ValueError(f"not an arc: {p.kind}")
    pts = np.asarray(p.coords)
    chord_dir, normal_dir = _chord_and_normal(p)
    return {
        "overall_change": overall_change(p),
        "chord_direction": chord_dir,
        "normal_direction": normal_dir,
        "first_edge_direction": direction_of(pts[1] - pts[0]),
        "last_edge_direction": direction_of(pts[-1] - pts[-2]),
    }


def measure_line(p: Primitive) -> dict[str, float]:
    if p.kind != LINE:
        raise ValueError(f"not a line: {p.kind}")
    pts = np.asarray(p.coords)
    return {"direction": direction_of(pts[-1] - pts[0])}


def measure_primitive(p: Primitive) -> dict[str, float]:
    if p.kind in ARC_KINDS:
        return measure_arc(p)
    if p.kind == LINE:
        return measure_line(p)
    return {}


def _primary_direction(p: Primitive) -> float:
    if p.kind == LINE:
        pts = np.asarray(p.coords)
        return direction_of(pts[-1] - pts[0])
    return _chord_and_normal(p)[0]


def connection_quarter(loop: Primitive, other: Primitive) -> int:
    """Axis-aligned quadrant (1-4) of the shared vertex relative to the
    loop centroid; 0 when the primitives do not touch."""
    shared = [v for v in loop.verts if v in set(other.verts)]
    if not shared:
        return 0
    idx = loop.verts.index(shared[0])
    vx, vy = loop.coords[idx]
    cx, cy = loop.centroid()
    dx, dy = vx - cx, vy - cy
    if dx >= 0 and dy >= 0:
        return 1
    if dx < 0 and dy >= 0:
        return 2
    if dx < 0 and dy < 0:
        return 3
    return 4


def measure_relation(p: Primitive, q: Primitive,
                     graph_length: float) -> dict[str, float]:
    """All relation measurements applicable to the ordered pair (p, q)."""
    if graph_length <= 0:
        raise ValueError("graph_length must be positive")
    delta = q.centroid() - p.centroid()
    mag = float(np.hypot(*delta))
    out = {
        "length_ratio": p.length / q.length,
        "com_offset_direction": direction_of(delta) if mag > 1e-9 else 0.0,
        "com_offset_over_l1": mag / p.length,
        "com_offset_over_l2": mag / q.length,
        "com_offset_over_lg": mag / graph_length,
    }
    if p.kind in ARC_KINDS and q.kind in ARC_KINDS:
        cd1, cd2 = overall_change(p), overall_change(q)
        out["change_ratio"] = cd1 / cd2 if abs(cd2) > 1e-9 else 0.0
    n_loops = (p.kind == LOOP) + (q.kind == LOOP)
    if n_loops == 1:
        loop, other = (p, q) if p.kind == LOOP else (q, p)
        out["connection_quarter"] = float(connection_quarter(loop, other))
    if n_loops == 0:
        out["direction_difference"] = signed_diff(_primary_direction(p),
                                                  _primary_direction(q))
    return out


def coverage(feature_edges, g) -> float:
    """Length of the feature edges over the graph's total length."""
    feature_edges = {(min(i, j), max(i, j)) for i, j in feature_edges}
    if not feature_edges:
        raise ValueError("coverage undefined for an empty feature")
    if not feature_edges <= set(g.edges):
        raise ValueError("feature edges must belong to the graph")
    total = g.total_length
    if total <= 0:
        raise ValueError("graph has zero length")
    return sum(g.edge_length(e) for e in feature_edges) / total
