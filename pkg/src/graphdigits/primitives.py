"""Walk classification into primitives (arcs, lines, loops) and
decomposition of subgraphs into primitive covers.

Angle convention: directions are degrees counterclockwise from the
positive x axis in ``(x, y)`` coordinates.  Turns are signed, positive
when the walk bends counterclockwise in that frame (clockwise on screen,
where y grows downward).  Reversing a walk flips every turn sign, so
"arc+" and "arc-" are mirror kinds of each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .graphs import PointGraph

ARC_PLUS = "arc+"
ARC_MINUS = "arc-"
LINE = "line"
LOOP = "loop"

COLLINEAR_TOL_DEG = 1e-6
TURN_SUM_LIMIT_DEG = 360.0


@dataclass
class DecomposeConfig:
    line_threshold: float = 0.1
    max_walk_edges: int = 24
    max_loop_edges: int = 16
    max_decompositions: int = 10
    max_cover_candidates: int = 64
    # enumeration caps for degenerate dense graphs (e.g. skeletons of
    # heavily perforated masks); hitting one is reported as truncation
    max_path_candidates: int = 50_000
    max_loop_candidates: int = 5_000


@dataclass(frozen=True)
class Primitive:
    """A classified walk.  ``verts`` is the walk order (first == last for a
    closed arc; loops are stored without the repeated vertex)."""

    kind: str
    verts: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    coords: tuple[tuple[float, float], ...] = field(compare=False)
    length: float = field(compare=False)

    @property
    def closed(self) -> bool:
        return self.kind == LOOP or self.verts[0] == self.verts[-1]

    def centroid(self) -> np.ndarray:
        pts = np.asarray(self.coords, float)
        if self.kind != LOOP and self.verts[0] == self.verts[-1]:
            pts = pts[:-1]
        return pts.mean(axis=0)

    def key(self) -> tuple:
        """Identity of the underlying detection, ignoring walk orientation
        and loop rotation."""
        return (self.kind, self.edges)


def _walk_edges(verts) -> frozenset[tuple[int, int]]:
    return frozenset((min(a, b), max(a, b)) for a, b in zip(verts, verts[1:]))


def _make(kind: str, g: PointGraph, verts: tuple[int, ...],
          closing: bool = False) -> Primitive:
    vs = verts + (verts[0],) if closing else verts
    coords = tuple((float(g.vertices[v][0]), float(g.vertices[v][1]))
                   for v in vs)
    pts = np.asarray(coords)
    length = float(np.hypot(*np.diff(pts, axis=0).T).sum())
    return Primitive(kind, vs, _walk_edges(vs), coords, length)


def turn_angles(coords: np.ndarray) -> np.ndarray:
    """Signed interior turn angles of a polyline, degrees in (-180, 180]."""
    d = np.diff(np.asarray(coords, float), axis=0)
    a = np.degrees(np.arctan2(d[:, 1], d[:, 0]))
    turns = np.diff(a)
    return (turns + 180.0) % 360.0 - 180.0


def splice_collinear(coords: np.ndarray,
                     tol: float = COLLINEAR_TOL_DEG) -> np.ndarray:
    """Drop interior vertices whose turn is zero within tolerance."""
    coords = np.asarray(coords, float)
    while len(coords) > 2:
        turns = np.abs(turn_angles(coords))
        drop = np.nonzero(turns <= tol)[0]
        if len(drop) == 0:
            return coords
        coords = np.delete(coords, drop[0] + 1, axis=0)
    return coords


def classify_line(g: PointGraph, verts: tuple[int, ...],
                  threshold: float = 0.1) -> Primitive | None:
    """A walk is a line when every vertex stays within ``threshold`` times
    the walk length of the chord joining its endpoints."""
    if len(verts) < 2 or verts[0] == verts[-1]:
        return None
    p = _make(LINE, g, verts)
    pts = np.asarray(p.coords)
    chord = pts[-1] - pts[0]
    chord_len = np.hypot(*chord)
    if chord_len < 1e-12:
        return None
    # perpendicular distance of each vertex to the chord line
    rel = pts - pts[0]
    dev = np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0]) / chord_len
    if dev.max() / p.length < threshold:
        return p
    return None


def classify_arc(g: PointGraph, verts: tuple[int, ...]) -> Primitive | None:
    """A walk is an arc when all its turns share one sign and the total
    turn magnitude is at most 360 degrees.

    Closed walks (first == last) are accepted; their turns are taken at
    interior vertices only.  Exactly collinear interior vertices are
    spliced out before classification.
    """
    if len(verts) < 3:
        return None
    closed = verts[0] == verts[-1]
    kind = None  # decided by turn sign below
    p = _make(ARC_PLUS, g, verts)
    coords = splice_collinear(np.asarray(p.coords))
    if len(coords) < 3:
        return None
    turns = turn_angles(coords)
    if len(turns) == 0:
        return None
    if np.any(np.abs(turns) >= 180.0 - COLLINEAR_TOL_DEG):
        return None
    if np.all(turns > 0):
        kind = ARC_PLUS
    elif np.all(turns < 0):
        kind = ARC_MINUS
    else:
        return None
    if abs(turns.sum()) > TURN_SUM_LIMIT_DEG + COLLINEAR_TOL_DEG:
        return None
    if closed and len(verts) < 4:
        return None
    return Primitive(kind, p.verts, p.edges, p.coords, p.length)


def canonical_cycle(verts: tuple[int, ...]) -> tuple[int, ...]:
    """Rotate/reflect a cycle vertex sequence into canonical form."""
    n = len(verts)
    best = None
    for rot in range(n):
        for seq in (verts[rot:] + verts[:rot],
                    tuple(reversed(verts[rot:] + verts[:rot]))):
            if best is None or seq < best:
                best = seq
    return best


def find_loops(g: PointGraph, budget: int = 16,
               limit: int | None = None) -> list[Primitive]:
    """All simple cycles of up to ``budget`` edges, one per cycle up to
    rotation and reflection.  At most ``limit`` loops are returned."""
    G = nx.Graph()
    G.add_nodes_from(range(g.n_vertices))
    G.add_edges_from(g.edges)
    out = []
    seen = set()
    for cyc in nx.simple_cycles(G, length_bound=budget):
        if limit is not None and len(out) >= limit:
            break
        canon = canonical_cycle(tuple(cyc))
        if canon in seen:
            continue
        seen.add(canon)
        out.append(_make(LOOP, g, canon, closing=True))
    # strip the closing repeat: loops are stored without it
    fixed = []
    for p in out:
        fixed.append(Primitive(LOOP, p.verts[:-1], p.edges, p.coords[:-1],
                               p.length))
    return sorted(fixed, key=lambda p: p.verts)


class _EnumerationLimit(Exception):
    pass


def enumerate_open_paths(g: PointGraph, max_edges: int,
                         within: frozenset[tuple[int, int]] | None = None,
                         limit: int | None = None
                         ) -> list[tuple[int, ...]]:
    """All simple open paths with at most ``max_edges`` edges, one
    orientation each (smaller endpoint first).  At most ``limit`` paths
    are returned (dense degenerate graphs would otherwise explode)."""
    adj = g.neighbors()
    if within is not None:
        allowed = within
        adj = [[n for n in ns if (min(v, n), max(v, n)) in allowed]
               for v, ns in enumerate(adj)]
    paths = []

    def extend(path: list[int], used: set[int]):
        if len(path) >= 2 and path[0] <= path[-1]:
            if limit is not None and len(paths) >= limit:
                raise _EnumerationLimit
            paths.append(tuple(path))
        if len(path) - 1 >= max_edges:
            return
        for n in adj[path[-1]]:
            if n not in used:
                path.append(n)
                used.add(n)
                extend(path, used)
                used.remove(n)
                path.pop()

    try:
        for v in range(g.n_vertices):
            extend([v], {v})
    except _EnumerationLimit:
        pass
    return paths


def candidate_primitives(g: PointGraph, config: DecomposeConfig,
                         within: frozenset[tuple[int, int]] | None = None,
                         stats: dict | None = None) -> list[Primitive]:
    """Every primitive classification of every walk in the graph.

    Open paths are tried in both orientations (a line keeps a direction
    per orientation; a monotone-turn path yields one arc+ and one arc-).
    Cycles contribute a loop and, opened at each vertex in each direction,
    closed-arc candidates.
    """
    out: list[Primitive] = []
    seen: set[tuple] = set()

    def add(p: Primitive | None):
        if p is None:
            return
        ident = (p.kind, p.verts)
        if ident not in seen:
            seen.add(ident)
            out.append(p)

    paths = enumerate_open_paths(g, config.max_walk_edges, within,
                                 limit=config.max_path_candidates)
    loops = find_loops(g, config.max_loop_edges,
                       limit=config.max_loop_candidates)
    if stats is not None:
        stats["truncated"] = (len(paths) >= config.max_path_candidates
                              or len(loops) >= config.max_loop_candidates)
    for path in paths:
        for verts in (path, tuple(reversed(path))):
            add(classify_line(g, verts, config.line_threshold))
            add(classify_arc(g, verts))
    for loop in loops:
        if within is not None and not loop.edges <= within:
            continue
        add(loop)
        cyc = loop.verts
        n = len(cyc)
        for rot in range(n):
            rotated = cyc[rot:] + cyc[:rot]
            for verts in (rotated + (rotated[0],),
                          tuple(reversed(rotated + (rotated[0],)))):
                add(classify_arc(g, verts))
    return out


@dataclass(frozen=True)
class Decomposition:
    primitives: tuple[Primitive, ...]

    @property
    def covered_edges(self) -> frozenset[tuple[int, int]]:
        return frozenset().union(*(p.edges for p in self.primitives))

    def kinds(self) -> tuple[str, ...]:
        return tuple(p.kind for p in self.primitives)

    def key(self) -> frozenset:
        return frozenset((p.kind, p.edges) for p in self.primitives)


def decompose(g: PointGraph, edge_subset=None,
              config: DecomposeConfig | None = None) -> list[Decomposition]:
    """All partitions of the edge subset into disjoint valid primitives.

    Alternative decompositions of the same edges are all returned (up to
    the configured cap, preferring covers made of fewer, longer
    primitives).  Decompositions differing only in walk orientation or
    loop rotation are reported once.
    """
    config = config or DecomposeConfig()
    if edge_subset is None:
        edge_subset = frozenset(g.edges)
    else:
        edge_subset = frozenset((min(i, j), max(i, j)) for i, j in edge_subset)
    if not edge_subset:
        return []
    cands = [p for p in candidate_primitives(g, config, within=edge_subset)]
    # orientation variants cover the same edges; covers need one per key
    by_key: dict[tuple, Primitive] = {}
    for p in sorted(cands, key=lambda p: p.verts):
        by_key.setdefault(p.key(), p)
    # loops first so loop-preserving covers are found before the result cap
    pool = sorted(by_key.values(),
                  key=lambda p: (p.kind != LOOP, -p.length, p.verts))
    if len(pool) > config.max_cover_candidates:
        pool = pool[:config.max_cover_candidates]
    edge_order = sorted(edge_subset)
    by_edge: dict[tuple[int, int], list[Primitive]] = {e: [] for e in edge_order}
    for p in pool:
        for e in p.edges:
            if e in by_edge:
                by_edge[e].append(p)

    results: list[Decomposition] = []
    seen_keys: set[frozenset] = set()

    def search(uncovered: frozenset, chosen: list[Primitive]):
        if len(results) >= config.max_decompositions:
            return
        if not uncovered:
            d = Decomposition(tuple(sorted(chosen, key=lambda p: p.verts)))
            if d.key() not in seen_keys:
                seen_keys.add(d.key())
                results.append(d)
            return
        e = min(uncovered)
        for p in by_edge[e]:
            if p.edges <= uncovered:
                chosen.append(p)
                search(uncovered - p.edges, chosen)
                chosen.pop()

    # force loop-preserving covers first so the result cap cannot starve
    # them, then fill remaining slots with the general search
    for lp in pool:
        if lp.kind == LOOP:
            search(edge_subset - lp.edges, [lp])
    search(edge_subset, [])
    # prefer simple covers; among those, covers that keep loops intact
    results.sort(key=lambda d: (len(d.primitives),
                                -sum(p.kind == LOOP for p in d.primitives),
                                [-p.length for p in d.primitives]))
    return results


def decompose_bruteforce(g: PointGraph, edge_subset=None,
                         config: DecomposeConfig | None = None
                         ) -> set[frozenset]:
    """Oracle: enumerate every partition of the edge set and keep those
    whose blocks are all valid primitives.  Exponential; small graphs only.
    Returns decomposition keys for comparison with :func:`decompose`."""
    config = config or DecomposeConfig(max_decompositions=10**9,
                                       max_cover_candidates=10**9)
    if edge_subset is None:
        edge_subset = frozenset(g.edges)
    edges = sorted(edge_subset)
    valid = {p.key(): p for p in candidate_primitives(
        g, config, within=frozenset(edges))}
    valid_keys = {k for k in valid if k[0] != LINE or True}

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for n_more in range(len(rest) + 1):
            for extra in itertools.combinations(rest, n_more):
                block = frozenset((first,) + extra)
                remaining = [e for e in rest if e not in block]
                for tail in partitions(remaining):
                    yield [block] + tail

    out = set()
    for part in partitions(edges):
        assigned = []
        for block in part:
            kinds = [k for k in valid_keys if k[1] == block]
            if not kinds:
                assigned = None
                break
            assigned.append(kinds)
        if assigned is None:
            continue
        for combo in itertools.product(*assigned):
            out.add(frozenset(combo))
    return out
