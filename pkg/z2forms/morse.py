"""Discrete Morse functions on a cobordism (W, L1, L2).

The gradient is built by processing lower stars of a vertex function f0
with a two-queue lower-star matching, relative to the
lower boundary L1. Critical vertices and top cells are then cancelled
against critical edges and facets joined to them by a single gradient path,
and the middle indices are cancelled the same way afterwards.
"""
import heapq
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from topology.complex import faces
from topology.errors import InputError, MorseObstruction
from z2forms.hodge import dirichlet_extension

logger = logging.getLogger(__name__)

CANCEL_PASSES = 5


@dataclass
class DiscreteMorseFunction:
    values: Dict[int, float]
    pairs: Dict[Tuple[int, ...], Tuple[int, ...]]
    critical: List[Tuple[Tuple[int, ...], int]]
    dimension: int
    passes: int = 0
    cancelled: int = 0
    notes: List[str] = field(default_factory=list)

    def indices(self):
        counts = [0] * (self.dimension + 1)
        for _, index in self.critical:
            counts[index] += 1
        return counts

    @property
    def has_extremes(self):
        counts = self.indices()
        return counts[0] > 0 or counts[self.dimension] > 0

    def to_json(self):
        return {
            "critical": [{"cell": list(c), "index": i} for c, i in self.critical],
            "indices": self.indices(),
            "pairs": len(self.pairs),
            "passes": self.passes,
            "cancelled": self.cancelled,
            "notes": list(self.notes),
        }


def _all_faces(top_cells):
    cells = set()
    for t in top_cells:
        for k in range(1, len(t) + 1):
            cells.update(combinations(t, k))
    return cells


def boundary_facets(top_cells):
    count = defaultdict(int)
    for t in top_cells:
        for f in faces(t):
            count[f] += 1
    return sorted(f for f, n in count.items() if n == 1)


def _connected(vertices, edges):
    g = nx.Graph()
    g.add_nodes_from(vertices)
    g.add_edges_from(e for e in edges if e[0] in g and e[1] in g)
    return g.number_of_nodes() > 0 and nx.is_connected(g)


def check_cobordism(top_cells, low, high):
    """Validate that W is connected with boundary L1 + L2, both connected."""
    top_cells = [tuple(sorted(t)) for t in top_cells]
    low, high = set(low), set(high)
    if not top_cells:
        raise InputError("[error] Empty cobordism")
    if low & high:
        raise InputError("[error] The two boundary pieces share vertices")
    verts = {v for t in top_cells for v in t}
    edges = {e for t in top_cells for e in combinations(t, 2)}
    if not _connected(verts, edges):
        raise InputError("[error] Cobordism is disconnected")
    bdry = boundary_facets(top_cells)
    bverts = {v for f in bdry for v in f}
    if bverts != low | high:
        raise InputError("[error] Boundary of the cobordism is not L1 + L2")
    for f in bdry:
        if not (set(f) <= low or set(f) <= high):
            raise InputError(f"[error] Boundary facet {f} meets both boundary pieces")
    bedges = {e for f in bdry for e in combinations(f, 2)}
    for name, piece in (("L1", low), ("L2", high)):
        if not _connected(piece, [e for e in bedges if set(e) <= piece]):
            raise InputError(f"[error] Boundary piece {name} is disconnected")
    return bdry


class _LowerStarMatcher(object):
    def __init__(self, cells, key):
        self.key = key
        self.pairs = {}
        self.critical = []
        by_max = defaultdict(list)
        for c in cells:
            by_max[max(c, key=key)].append(c)
        self.by_max = by_max

    def cell_key(self, c):
        return sorted((self.key(v) for v in c), reverse=True)

    def run(self, vertex_order):
        for x in vertex_order:
            lower = self.by_max.get(x)
            if lower:
                self._process(x, set(lower))
        return self.pairs, self.critical

    def _process(self, x, star):
        done = set()
        cofaces = defaultdict(list)
        for c in star:
            if len(c) > 1:
                for f in faces(c):
                    if f in star:
                        cofaces[f].append(c)

        def unpaired(c):
            return [f for f in faces(c) if f in star and f not in done] if len(c) > 1 else []

        zero, one = [], []

        def push(queue, c):
            heapq.heappush(queue, (self.cell_key(c), c))

        if (x,) in star:
            if len(star) == 1:
                self.critical.append(((x,), 0))
                return
            edges = [c for c in star if len(c) == 2]
            delta = min(edges, key=self.cell_key)
            self.pairs[(x,)] = delta
            done |= {(x,), delta}
            for e in edges:
                if e != delta:
                    push(zero, e)
            for c in star:
                if c not in done and len(c) > 2 and len(unpaired(c)) == 1:
                    push(one, c)
        else:
            for c in star:
                n = len(unpaired(c))
                if n == 0:
                    push(zero, c)
                elif n == 1:
                    push(one, c)

        while one or zero:
            while one:
                _, alpha = heapq.heappop(one)
                if alpha in done:
                    continue
                free = unpaired(alpha)
                if not free:
                    push(zero, alpha)
                    continue
                face = free[0]
                self.pairs[face] = alpha
                done |= {face, alpha}
                for beta in cofaces[alpha] + cofaces[face]:
                    if beta not in done and len(unpaired(beta)) == 1:
                        push(one, beta)
            while zero:
                _, gamma = heapq.heappop(zero)
                if gamma in done:
                    continue
                if unpaired(gamma):
                    push(one, gamma)
                    continue
                self.critical.append((gamma, len(gamma) - 1))
                done.add(gamma)
                for beta in cofaces[gamma]:
                    if beta not in done and len(unpaired(beta)) == 1:
                        push(one, beta)
                break


def _descend(start, pairs, critical_vertices):
    """Follow the vertex-edge gradient path from a vertex; returns (end, path edges)."""
    path, v, seen = [], start, set()
    while v not in critical_vertices:
        edge = pairs.get((v,))
        if edge is None or v in seen:
            return None, path
        seen.add(v)
        path.append((v, edge))
        v = edge[0] if edge[1] == v else edge[1]
    return v, path


def _ascend(facet, start, pairs_down, cofaces, critical_tops):
    """Follow the facet-top gradient path from `facet` into top cell `start`."""
    path, top, seen = [], start, set()
    while top not in critical_tops:
        face = pairs_down.get(top)
        if face is None or top in seen:
            return None, path
        seen.add(top)
        path.append((face, top))
        nxt = [t for t in cofaces[face] if t != top]
        if not nxt:
            return None, path
        top = nxt[0]
    return top, path


def _cancel_minima(pairs, critical):
    crit_v = {c[0] for c, i in critical if i == 0}
    for edge, index in sorted(critical, key=lambda ci: ci[0]):
        if index != 1 or not crit_v:
            continue
        ends = [_descend(v, pairs, crit_v) for v in edge]
        hits = [(i, end, path) for i, (end, path) in enumerate(ends) if end is not None]
        if len(hits) != 1:
            continue
        i, end, path = hits[0]
        start = edge[i]
        # reverse the path: each vertex takes the edge before it
        chain = [edge] + [e for _, e in path]
        verts = [start] + [(e[0] if e[1] == v else e[1]) for v, e in path]
        for v, e in zip(verts, chain):
            pairs[(v,)] = e
        critical.remove((edge, 1))
        critical.remove(((end,), 0))
        return True
    return False


def _cancel_maxima(pairs, critical, top_cells, top):
    crit_t = {c for c, i in critical if i == top}
    if not crit_t:
        return False
    pairs_down = {c: f for f, c in pairs.items() if len(c) == top + 1}
    cofaces = defaultdict(list)
    for t in top_cells:
        for f in faces(t):
            cofaces[f].append(t)
    for facet, index in sorted(critical, key=lambda ci: ci[0]):
        if index != top - 1:
            continue
        ends = [_ascend(facet, t, pairs_down, cofaces, crit_t) for t in cofaces[facet]]
        hits = [(i, end, path) for i, (end, path) in enumerate(ends) if end is not None]
        if len(hits) != 1:
            continue
        _, end, path = hits[0]
        facets = [facet] + [f for f, _ in path]
        tops = [t for _, t in path] + [end]
        for f, t in zip(facets, tops):
            pairs[f] = t
        critical.remove((facet, top - 1))
        critical.remove((end, top))
        return True
    return False


def _cancel_unique(pairs, critical, cells, k):
    """Cancel a critical (k+1)-cell against a critical k-cell joined by exactly one gradient path."""
    crit_low = {c for c, i in critical if i == k}
    if not crit_low:
        return False
    for sigma in sorted(c for c, i in critical if i == k + 1):
        paths = nx.DiGraph()
        paths.add_node(sigma)
        stack, seen = [sigma], {sigma}
        while stack:
            c = stack.pop()
            for f in faces(c):
                if f not in cells or pairs.get(f) == c:
                    continue
                paths.add_edge(c, f)
                up = pairs.get(f)
                if f in crit_low or up is None or len(up) != k + 2:
                    continue
                paths.add_edge(f, up)
                if up not in seen:
                    seen.add(up)
                    stack.append(up)
        count = {sigma: 1}
        for node in nx.topological_sort(paths):
            for nxt in paths.successors(node):
                count[nxt] = count.get(nxt, 0) + count.get(node, 0)
        ends = sorted(t for t in crit_low if count.get(t) == 1)
        if not ends:
            continue
        tau = ends[0]
        lows, ups, node = [], [], tau
        while node != sigma:
            prev = [q for q in paths.predecessors(node) if count.get(q, 0) > 0]
            if len(node) == k + 1:
                lows.append(node)
            else:
                ups.append(node)
            node = prev[0]
        ups.append(sigma)
        for low, up in zip(lows, ups):
            pairs[low] = up
        critical.remove((sigma, k + 1))
        critical.remove((tau, k))
        return True
    return False


def discrete_morse_cobordism(complex, top_cells, low, high, values=None, passes=CANCEL_PASSES):
    """Acyclic matching on (W, L1) whose critical cells avoid index 0 and the top index.

    `values` defaults to the harmonic function equal to 1 on L1 and 2 on L2.
    Raises MorseObstruction when extreme critical cells survive `passes`
    cancellation rounds.
    """
    top_cells = sorted(tuple(sorted(t)) for t in top_cells)
    bdry = check_cobordism(top_cells, low, high)
    low, high = set(low), set(high)
    top = complex.dimension
    if values is None:
        edges = sorted({e for t in top_cells for e in combinations(t, 2)})
        fixed = {v: 1.0 for v in low}
        fixed.update({v: 2.0 for v in high})
        values = dirichlet_extension(complex.n_vertices, edges, fixed)
    values = {v: float(values[v]) for t in top_cells for v in t}

    def key(v):
        return (values[v], v)

    relative = {f for b in bdry if set(b) <= low for f in _all_faces([b])}
    cells = [c for c in _all_faces(top_cells) if c not in relative]
    order = sorted({v for t in top_cells for v in t}, key=key)
    matcher = _LowerStarMatcher(cells, key)
    pairs, critical = matcher.run(order)
    critical = sorted(critical)

    used, cancelled = 0, 0
    for _ in range(passes):
        if not any(i in (0, top) for _, i in critical):
            break
        used += 1
        progress = False
        while _cancel_minima(pairs, critical):
            cancelled += 1
            progress = True
        while _cancel_maxima(pairs, critical, top_cells, top):
            cancelled += 1
            progress = True
        if not progress:
            break

    cell_set = set(cells)
    while any(_cancel_unique(pairs, critical, cell_set, k) for k in range(1, top - 1)):
        cancelled += 1

    morse = DiscreteMorseFunction(values=values, pairs=pairs, critical=critical, dimension=top,
                                  passes=used, cancelled=cancelled)
    logger.info("morse: critical cells by index %s after %d passes", morse.indices(), used)
    if morse.has_extremes:
        raise MorseObstruction(
            f"[error] Critical cells of index 0 or {top} remain: "
            f"{[list(c) for c, i in critical if i in (0, top)]}")
    return morse


def check_acyclic(morse):
    """True when the gradient pairing has no closed V-path."""
    g = nx.DiGraph()
    for face, coface in morse.pairs.items():
        g.add_edge(("up", face), ("up", coface))
        for f in faces(coface):
            if f != face and len(f) == len(face) and f in morse.pairs:
                g.add_edge(("up", coface), ("up", f))
    return nx.is_directed_acyclic_graph(g)
