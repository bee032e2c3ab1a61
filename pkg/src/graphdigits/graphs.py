"""Pixel graphs from skeletons, and their simplification.

A :class:`PointGraph` is an undirected graph whose vertices carry absolute
``(x, y)`` coordinates.  The same class represents both the raw pixel graph
(one vertex per skeleton pixel) and the simplified graph obtained by
collapsing degree-2 chains onto straight segments covered by the source
mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class PointGraph:
    vertices: np.ndarray  # (n, 2) float, columns (x, y)
    edges: set[tuple[int, int]] = field(default_factory=set)  # i < j

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        self.edges = {(min(i, j), max(i, j)) for i, j in self.edges}

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        for lst in adj:
            lst.sort()
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def edge_length(self, e: tuple[int, int]) -> float:
        i, j = e
        return float(np.hypot(*(self.vertices[i] - self.vertices[j])))

    @property
    def total_length(self) -> float:
        return sum(self.edge_length(e) for e in self.edges)

    def translate(self, dx: float, dy: float) -> "PointGraph":
        return PointGraph(self.vertices + np.array([dx, dy]), set(self.edges))

    def scale(self, s: float) -> "PointGraph":
        return PointGraph(self.vertices * s, set(self.edges))

    def to_json(self) -> dict:
        return {"vertices": [[float(x), float(y)] for x, y in self.vertices],
                "edges": sorted([list(e) for e in self.edges])}

    @classmethod
    def from_json(cls, obj: dict) -> "PointGraph":
        return cls(np.array(obj["vertices"], dtype=float).reshape(-1, 2),
                   {tuple(e) for e in obj["edges"]})


def build_pixel_graph(skeleton: np.ndarray) -> PointGraph:
    """Turn a unit-width skeleton into a pixel graph.

    Orthogonal neighbors are always connected.  Diagonal neighbors are
    connected only when neither of the two bridging orthogonal pixels is
    black, so no shortcut duplicates an orthogonal path.
    """
    skeleton = np.asarray(skeleton, bool)
    ys, xs = np.nonzero(skeleton)
    coords = np.column_stack([xs, ys]).astype(float)
    index = {(int(x), int(y)): k for k, (x, y) in enumerate(zip(xs, ys))}
    edges = set()
    for k, (x, y) in enumerate(zip(xs, ys)):
        x, y = int(x), int(y)
        for dx, dy in ((1, 0), (0, 1)):
            other = index.get((x + dx, y + dy))
            if other is not None:
                edges.add((min(k, other), max(k, other)))
        for dx, dy in ((1, 1), (-1, 1)):
            other = index.get((x + dx, y + dy))
            if other is None:
                continue
            if (x, y + dy) in index or (x + dx, y) in index:
                continue  # bridged by an orthogonal pixel
            edges.add((min(k, other), max(k, other)))
    return PointGraph(coords, edges)


def supercover_line(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """All integer grid cells the segment between two pixel centers passes
    through (conservative: corner touches include both neighboring cells)."""
    cells = [(x0, y0)]
    dx, dy = x1 - x0, y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    ix = iy = 0
    x, y = x0, y0
    while ix < nx or iy < ny:
        # compare (0.5 + ix) / nx with (0.5 + iy) / ny without division
        decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
        if decision == 0:
            # diagonal corner crossing: include both adjacent cells
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif decision < 0:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def segment_covered(mask: np.ndarray, p0, p1) -> bool:
    """True iff every cell the segment p0-p1 passes through is black."""
    h, w = mask.shape
    x0, y0 = int(round(p0[0])), int(round(p0[1]))
    x1, y1 = int(round(p1[0])), int(round(p1[1]))
    for x, y in supercover_line(x0, y0, x1, y1):
        if not (0 <= x < w and 0 <= y < h) or not mask[y, x]:
            return False
    return True


def _chains(g: PointGraph) -> list[list[int]]:
    """Maximal degree-2 chains, as vertex index sequences anchored at
    degree != 2 vertices.  Closed chains (cycles, including lollipops
    anchored at a single junction) are split into three parts so that a
    cycle can never collapse below a triangle."""
    adj = g.neighbors()
    deg = g.degrees()
    anchors = {v for v in range(g.n_vertices) if deg[v] != 2}
    chains = []
    seen_edges = set()

    def walk(start, first):
        chain = [start, first]
        seen_edges.add((min(start, first), max(start, first)))
        while chain[-1] not in anchors and chain[-1] != start:
            prev, cur = chain[-2], chain[-1]
            nxt = [n for n in adj[cur] if n != prev]
            if not nxt:
                break
            chain.append(nxt[0])
            seen_edges.add((min(cur, nxt[0]), max(cur, nxt[0])))
        return chain

    def emit(chain):
        if len(chain) >= 3 and chain[0] == chain[-1]:
            third = max(1, (len(chain) - 1) // 3)
            a, b = third, min(2 * third, len(chain) - 2)
            chains.append(chain[:a + 1])
            chains.append(chain[a:b + 1])
            chains.append(chain[b:])
        else:
            chains.append(chain)

    for a in sorted(anchors):
        for n in adj[a]:
            e = (min(a, n), max(a, n))
            if e not in seen_edges:
                emit(walk(a, n))
    # pure cycles (no anchor on them)
    for v in range(g.n_vertices):
        if deg[v] == 2 and not any(
                (min(v, n), max(v, n)) in seen_edges for n in adj[v]):
            emit(walk(v, adj[v][0]))
    return chains


def simplify(g: PointGraph, mask: np.ndarray,
             rng: np.random.Generator | None = None) -> PointGraph:
    """Collapse degree-2 chains onto straight segments covered by ``mask``.

    The default is a deterministic farthest-jump scan along each chain
    followed by single-vertex collapse passes to a fixed point.  Passing a
    seeded ``rng`` instead collapses randomly chosen eligible pairs, for
    robustness testing.
    """
    mask = np.asarray(mask, bool)
    new_edges = set(g.edges)

    for chain in _chains(g):
        for a, b in zip(chain, chain[1:]):
            new_edges.discard((min(a, b), max(a, b)))
        if rng is None:
            i = 0
            while i < len(chain) - 1:
                j = len(chain) - 1
                while j > i + 1 and (
                        chain[j] == chain[i]
                        or (min(chain[i], chain[j]), max(chain[i], chain[j]))
                        in new_edges
                        or not segment_covered(
                            mask, g.vertices[chain[i]], g.vertices[chain[j]])):
                    j -= 1
                new_edges.add((min(chain[i], chain[j]), max(chain[i], chain[j])))
                i = j
        else:
            breaks = list(range(len(chain)))  # indices of surviving vertices
            while True:
                eligible = [
                    k for k in range(1, len(breaks) - 1)
                    if chain[breaks[k - 1]] != chain[breaks[k + 1]]
                    and (min(chain[breaks[k - 1]], chain[breaks[k + 1]]),
                         max(chain[breaks[k - 1]], chain[breaks[k + 1]]))
                    not in new_edges
                    and segment_covered(mask, g.vertices[chain[breaks[k - 1]]],
                                        g.vertices[chain[breaks[k + 1]]])
                ]
                if not eligible:
                    break
                breaks.pop(int(rng.choice(eligible)))
            for a, b in zip(breaks, breaks[1:]):
                new_edges.add((min(chain[a], chain[b]), max(chain[a], chain[b])))

    pruned = PointGraph(g.vertices.copy(), new_edges)
    pruned = _collapse_fixed_point(pruned, mask)
    return _drop_isolated(pruned)


def _collapse_fixed_point(g: PointGraph, mask: np.ndarray) -> PointGraph:
    # Remove any remaining degree-2 vertex whose neighbor-to-neighbor
    # segment lies on the mask.  Guards keep loops intact: never collapse
    # onto an existing edge or a self-edge.
    edges = set(g.edges)
    changed = True
    while changed:
        changed = False
        adj: dict[int, list[int]] = {}
        for i, j in edges:
            adj.setdefault(i, []).append(j)
            adj.setdefault(j, []).append(i)
        for v in sorted(adj):
            ns = adj.get(v, [])
            if len(ns) != 2:
                continue
            a, b = ns
            if a == b:
                continue
            e_new = (min(a, b), max(a, b))
            if e_new in edges:
                continue
            if not segment_covered(mask, g.vertices[a], g.vertices[b]):
                continue
            edges.discard((min(v, a), max(v, a)))
            edges.discard((min(v, b), max(v, b)))
            edges.add(e_new)
            changed = True
            break
    return PointGraph(g.vertices.copy(), edges)


def _drop_isolated(g: PointGraph) -> PointGraph:
    used = sorted({v for e in g.edges for v in e})
    if not used and g.n_vertices:
        # keep single isolated vertices (a one-pixel component)
        used = [0] if g.n_vertices == 1 else used
    remap = {old: new for new, old in enumerate(used)}
    return PointGraph(g.vertices[used],
                      {(remap[i], remap[j]) for i, j in g.edges})


def split_components(g: PointGraph) -> list[PointGraph]:
    """Connected components, each keeping its absolute coordinates."""
    parent = list(range(g.n_vertices))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges:
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for v in range(g.n_vertices):
        groups.setdefault(find(v), []).append(v)
    out = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        members = sorted(groups[root])
        remap = {old: new for new, old in enumerate(members)}
        edges = {(remap[i], remap[j]) for i, j in g.edges
                 if find(i) == root}
        out.append(PointGraph(g.vertices[members], edges))
    return out
