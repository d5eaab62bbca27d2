"""Leaf space of a rational two-valued form as a finite metric graph.

The lifted form on the cover integrates to a circle map u with du = mu v.
Levels of u at vertex values cut the cover into slabs; components of levels
become nodes and components of slabs become edges of length width / mu.
Dividing by the deck involution and merging regular nodes gives the leaf
graph on the base.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import reduce
from itertools import combinations
from typing import List, Optional

import networkx as nx
import numpy as np
import sympy
from networkx.utils import UnionFind

from topology.complex import Cochain, cocycle_basis, cycle_basis
from topology.cover import antiinvariant_project
from topology.errors import CriticalCollision, InputError, NotRational
from z2forms.hodge import edge_lengths

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-9
RATIONAL_TOL = 1e-6
UNRESOLVED = "UNRESOLVED"


def _cochain_values(form):
    if hasattr(form, "cochain"):
        return np.asarray(form.cochain, dtype=float)
    if isinstance(form, Cochain):
        return np.asarray(form.values, dtype=float)
    return np.asarray(form, dtype=float)


def oriented_value(complex, values, a, b):
    """Cochain value along a -> b."""
    e, sign = complex.edge_sign(a, b)
    return sign * values[e]


def integrate_increments(complex, increments):
    """Vertex potential with p(b) - p(a) = increment along a BFS forest, roots at 0."""
    nbrs = complex.vertex_neighbors()
    potential = np.zeros(complex.n_vertices)
    seen = np.zeros(complex.n_vertices, dtype=bool)
    for root in complex.vertices:
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in sorted(nbrs[v]):
                if not seen[w]:
                    seen[w] = True
                    potential[w] = potential[v] + oriented_value(complex, increments, v, w)
                    queue.append(w)
    return potential


@dataclass
class CircleMap:
    values: np.ndarray
    mu: sympy.Rational
    increments: np.ndarray
    circumference: float = 1.0
    exact: bool = False
    periods: List[int] = field(default_factory=list)
    snap: float = 0.0

    def check(self, cover, tol=1e-9):
        complex = cover.complex
        u = self.values
        a = np.array([e[0] for e in complex.edges])
        b = np.array([e[1] for e in complex.edges])
        gap = u[b] - u[a] - self.increments
        anti = u[cover.vertex_involution] + u
        if not self.exact:
            c = self.circumference
            gap = (gap + c / 2.0) % c - c / 2.0
            anti = (anti + c / 2.0) % c - c / 2.0
        if len(gap) and np.abs(gap).max() > tol:
            raise InputError(f"[error] Circle map misses the form by {np.abs(gap).max():.3e}")
        if np.abs(anti).max(initial=0.0) > tol:
            raise InputError("[error] Circle map is not anti-equivariant")
        return True

    def to_json(self):
        return {
            "values": [float(x) for x in self.values],
            "mu": str(self.mu),
            "circumference": None if self.exact else float(self.circumference),
            "exact": self.exact,
            "periods": [int(p) for p in self.periods],
        }


def rationalize(periods, denominator_cap):
    rationals = []
    for p in periods:
        r = sympy.Rational(float(p)).limit_denominator(denominator_cap)
        if abs(float(r) - p) > RATIONAL_TOL:
            raise NotRational(f"[error] Period {p:.12g} has no rational approximation with denominator <= {denominator_cap}")
        rationals.append(r)
    return rationals


def integrate_rational_class(form, cover, denominator_cap=64, cycles=None):
    complex = cover.complex
    v = _cochain_values(form)
    cycles = cycle_basis(complex) if cycles is None else cycles
    periods = np.array([float(np.dot(np.asarray(z, dtype=float), v)) for z in cycles])
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))

    if len(periods) == 0 or np.abs(periods).max() <= EXACT_TOL * scale:
        f = integrate_increments(complex, v)
        f = f - (f + f[cover.vertex_involution]) / 2.0
        logger.info("exact class: real-valued potential, range [%.6g, %.6g]", f.min(initial=0), f.max(initial=0))
        return CircleMap(values=f, mu=sympy.Integer(1), increments=v, circumference=np.inf, exact=True,
                         periods=[0] * len(periods))

    rationals = rationalize(periods, denominator_cap)
    # move the class onto the rational point, keeping it anti-invariant
    correction = np.zeros_like(v)
    for z, r, p in zip(cocycle_basis(complex), rationals, periods):
        correction = correction + (float(r) - p) * np.asarray(z, dtype=float)
    snapped = antiinvariant_project(cover, v + correction)
    rationals = rationalize([float(np.dot(np.asarray(z, dtype=float), snapped)) for z in cycles], denominator_cap)

    nums = [int(r.p) for r in rationals if r != 0]
    if not nums:
        raise NotRational("[error] Periods round to zero; integrate the form as an exact class")
    dens = [int(r.q) for r in rationals]
    mu = sympy.Rational(reduce(sympy.ilcm, dens, 1), reduce(sympy.igcd, nums, 0))
    increments = float(mu) * snapped
    u = integrate_increments(complex, increments)
    zverts = np.flatnonzero(cover.vertex_sheet < 0)
    if len(zverts):
        u = u - u[zverts[0]]
    else:
        u = u - (u[0] + u[cover.vertex_involution[0]]) / 2.0
    u = np.mod(u, 1.0)
    umap = CircleMap(values=u, mu=mu, increments=increments, circumference=1.0,
                     periods=[int(r * mu) for r in rationals], snap=float(np.abs(correction).max(initial=0.0)))
    logger.info("circle map: mu=%s, periods %s", mu, umap.periods)
    return umap


@dataclass
class ZeroEntry:
    cover_vertex: int
    base_vertex: int
    index: object
    magnitude: float

    def to_json(self):
        return {"cover_vertex": self.cover_vertex, "base_vertex": self.base_vertex,
                "index": self.index, "magnitude": self.magnitude}


@dataclass
class ZeroReport:
    zeros: List[ZeroEntry]
    threshold: float
    scale: float

    @property
    def transverse(self):
        return all(z.index != UNRESOLVED for z in self.zeros)

    def cover_vertices(self, cover):
        out = set()
        for z in self.zeros:
            out |= {z.cover_vertex, int(cover.vertex_involution[z.cover_vertex])}
        return out

    def to_json(self):
        return {"zeros": [z.to_json() for z in self.zeros], "transverse": self.transverse,
                "threshold": self.threshold, "scale": self.scale}


def _link_components(complex, x, members):
    link = nx.Graph()
    link.add_nodes_from(members)
    for t in complex.cells(complex.dimension):
        if x in t:
            for a, b in combinations([w for w in t if w != x], 2):
                if a in members and b in members:
                    link.add_edge(a, b)
    return nx.number_connected_components(link)


def classify_vertex(complex, values, x):
    """Morse index of a vertex from its lower and upper links, None when regular."""
    lower, upper = set(), set()
    for w in complex.vertex_neighbors()[x]:
        d = oriented_value(complex, values, x, w)
        if d < 0 or (d == 0 and w < x):
            lower.add(w)
        else:
            upper.add(w)
    nl = _link_components(complex, x, lower) if lower else 0
    nu = _link_components(complex, x, upper) if upper else 0
    top = complex.dimension
    if (nl, nu) == (1, 1):
        return None
    if nl == 0 and nu == 1:
        return 0
    if nu == 0 and nl == 1:
        return top
    if top == 2 and nl == nu == 2:
        return 1
    if top == 3 and (nl, nu) == (2, 1):
        return 1
    if top == 3 and (nl, nu) == (1, 2):
        return 2
    return UNRESOLVED


def detect_zeros(form, cover, threshold=1e-6):
    """Vertices whose incident edge values all fall below threshold times the mean incident edge length."""
    complex = cover.complex
    v = _cochain_values(form)
    magnitude = np.abs(v)
    lengths = edge_lengths(complex)
    star = [[] for _ in complex.vertices]
    for i, (a, b) in enumerate(complex.edges):
        star[a].append(i)
        star[b].append(i)
    zeros, scales = [], []
    for x in complex.vertices:
        if cover.vertex_sheet[x] < 0 or cover.vertex_involution[x] < x or not star[x]:
            continue
        scale = float(lengths[star[x]].mean())
        scales.append(scale)
        local = float(magnitude[star[x]].max())
        if not local < threshold * scale:
            continue
        index = classify_vertex(complex, v, x)
        if index is None:
            continue
        zeros.append(ZeroEntry(int(x), int(cover.vertex_projection[x]), index, local))
    scale = float(np.median(scales)) if scales else 1.0
    logger.info("zeros: %d candidates below %.3e x local edge length", len(zeros), threshold)
    return ZeroReport(zeros=zeros, threshold=threshold, scale=scale)


def cluster_levels(values, circumference, tol):
    """Snap vertex values to levels; returns (levels, level index per vertex).

    0 is always a level, and c/2 too on a circle, since the deck involution
    folds the graph there.
    """
    vals = np.asarray(values, dtype=float).copy()
    exact = not np.isfinite(circumference)
    extras = [0.0] if exact else [0.0, circumference / 2.0]
    if not exact:
        vals[vals > circumference - tol] -= circumference
    keys = np.concatenate([vals, extras])
    order = np.argsort(keys, kind="stable")
    clusters, current = [], [order[0]]
    for i in order[1:]:
        if keys[i] - keys[current[-1]] <= tol:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)

    levels, label = [], np.zeros(len(vals), dtype=np.int64)
    for k, members in enumerate(clusters):
        spread = keys[members[-1]] - keys[members[0]]
        if spread > 2 * tol:
            raise CriticalCollision(f"[error] Vertex values chain over {spread:.3e} near level {keys[members[0]]:.12g}")
        pinned = [keys[i] for i in members if i >= len(vals)]
        levels.append(pinned[0] if pinned else float(np.mean(keys[members])))
        for i in members:
            if i < len(vals):
                label[i] = k
    return np.array(levels), label


def _traverse(la, lb, delta, m, circle):
    """Slabs crossed by an edge running from level la to level lb."""
    if la == lb:
        return [], 1
    if delta > 0:
        steps = (lb - la) % m if circle else lb - la
        return [(la + s) % m for s in range(steps)], 1
    steps = (la - lb) % m if circle else la - lb
    return [(la - s) % m for s in range(1, steps + 1)], -1


@dataclass
class LeafGraph:
    graph: nx.MultiGraph
    mu: sympy.Rational
    circumference: float = 1.0
    non_generic: bool = False
    notes: List[str] = field(default_factory=list)
    # lengths sit on the 1/grid lattice; the fold at c/2 makes it 2 mu on a circle
    grid: Optional[sympy.Rational] = None

    @property
    def vertices(self):
        return sorted(self.graph.nodes)

    @property
    def edges(self):
        return sorted((min(a, b), max(a, b), d["length"]) for a, b, d in self.graph.edges(data=True))

    def payload(self, node):
        data = self.graph.nodes[node]
        return {"z": list(data["z"]), "zeros": list(data["zeros"])}

    @property
    def boundary_vertices(self):
        return [n for n in self.vertices if self.graph.degree(n) == 1]

    def node_with_component(self, label):
        for n in self.vertices:
            if label in self.graph.nodes[n]["z"]:
                return n
        return None

    def to_json(self):
        return {
            "vertices": [
                {
                    "id": n,
                    "level": self.graph.nodes[n]["level"],
                    "z": list(self.graph.nodes[n]["z"]),
                    "zeros": list(self.graph.nodes[n]["zeros"]),
                    "boundary": self.graph.degree(n) == 1,
                }
                for n in self.vertices
            ],
            "edges": [{"source": a, "target": b, "length": length} for a, b, length in self.edges],
            "mu": str(self.mu),
            "non_generic": self.non_generic,
            "notes": list(self.notes),
            "grid": None if self.grid is None else str(self.grid),
        }


def graph_betti(graph):
    g = graph.graph
    return g.number_of_edges() - g.number_of_nodes() + nx.number_connected_components(g)


def total_length(graph):
    return float(sum(d["length"] for _, _, d in graph.graph.edges(data=True)))


def check_tree(graph):
    g = graph.graph
    return g.number_of_nodes() > 0 and nx.is_connected(g) and g.number_of_edges() == g.number_of_nodes() - 1


def check_commensurable(graph, mu=None, tol=1e-6):
    if mu is None:
        mu = graph.mu if graph.grid is None else graph.grid
    scaled = [length * float(mu) for _, _, length in graph.edges]
    return all(abs(x - round(x)) <= tol for x in scaled)


def commensurability_scale(graph, denominator_cap=64):
    """Smallest rational s with every edge length times s an integer, or None."""
    try:
        lengths = rationalize([length for _, _, length in graph.edges], denominator_cap)
    except NotRational:
        return None
    nums = [int(r.p) for r in lengths if r != 0]
    if not nums:
        return None
    return sympy.Rational(reduce(sympy.ilcm, [int(r.q) for r in lengths], 1), reduce(sympy.igcd, nums, 0))


def dv_oracle(complex, form, x, y):
    """Dijkstra distance with edge weight |v|; bounds d_v from above on edge paths."""
    values = np.abs(_cochain_values(form))
    g = nx.Graph()
    g.add_nodes_from(complex.vertices)
    for i, (a, b) in enumerate(complex.edges):
        g.add_edge(a, b, weight=float(values[i]))
    return float(nx.dijkstra_path_length(g, x, y, weight="weight"))


def _mirror_levels(levels, circumference):
    exact = not np.isfinite(circumference)
    mirror = np.zeros(len(levels), dtype=np.int64)
    for i, lam in enumerate(levels):
        if exact:
            gap = np.abs(levels + lam)
        else:
            gap = np.abs((levels + lam + circumference / 2.0) % circumference - circumference / 2.0)
        mirror[i] = int(np.argmin(gap))
    return mirror


def _fold(level, circumference):
    if not np.isfinite(circumference):
        return abs(float(level))
    level = float(level) % circumference
    return min(level, circumference - level)


def leaf_graph(umap, cover, zeros=None, collision_tol=1e-9, symbolic_tiebreak=False):
    if zeros is not None and not zeros.transverse:
        raise InputError("[error] The leaf graph needs a transverse zero report")
    complex = cover.complex
    c = umap.circumference
    circle = not umap.exact
    levels, label = cluster_levels(umap.values, c, collision_tol)
    m = len(levels)
    widths = np.diff(levels)
    if circle:
        widths = np.append(widths, levels[0] + c - levels[-1])
    inc = umap.increments

    crossings, crossed = {}, {}
    for e, (a, b) in enumerate(complex.edges):
        slabs, direction = _traverse(label[a], label[b], inc[e], m, circle)
        travel = float(sum(widths[j] for j in slabs))
        if abs(travel - abs(inc[e])) > 4 * collision_tol + 1e-12:
            raise InputError(f"[error] Edge {(a, b)} does not run between its levels; refine the complex")
        crossings[e] = (slabs, direction)
        crossed[e] = [(j + 1) % m for j in slabs[:-1]] if direction > 0 else slabs[:-1]

    uf = UnionFind()
    for v in complex.vertices:
        uf[("L", int(label[v]), "v", v)]
    for t in complex.cells(complex.dimension):
        lifted = [0.0] + [oriented_value(complex, inc, t[0], w) for w in t[1:]]
        if circle and max(lifted) - min(lifted) >= c - 4 * collision_tol:
            raise InputError(f"[error] Top cell {t} wraps around the circle; refine the complex")
        at_level, in_slab = {}, {}
        for v in t:
            at_level.setdefault(int(label[v]), []).append(("L", int(label[v]), "v", v))
        for a, b in combinations(t, 2):
            e = complex.index(1, (a, b))
            for i in crossed[e]:
                at_level.setdefault(int(i), []).append(("L", int(i), "e", e))
            for j in crossings[e][0]:
                in_slab.setdefault(int(j), []).append(("S", int(j), e))
        for group in list(at_level.values()) + list(in_slab.values()):
            uf.union(*group)

    level_comps, slab_comps = [], []
    for s in uf.to_sets():
        members = sorted(s)
        (level_comps if members[0][0] == "L" else slab_comps).append(members)
    level_comps.sort()
    slab_comps.sort()
    node_of = {x: k for k, comp in enumerate(level_comps) for x in comp}
    slab_of = {x: k for k, comp in enumerate(slab_comps) for x in comp}

    def ends(j, e):
        a, b = complex.edges[e]
        j1 = (j + 1) % m
        if crossings[e][1] > 0:
            lower = ("L", j, "v", a) if j == label[a] else ("L", j, "e", e)
            upper = ("L", j1, "v", b) if j1 == label[b] else ("L", j1, "e", e)
        else:
            upper = ("L", j1, "v", a) if j1 == label[a] else ("L", j1, "e", e)
            lower = ("L", j, "v", b) if j == label[b] else ("L", j, "e", e)
        return node_of[lower], node_of[upper]

    cover_edges = []
    up = np.zeros(len(level_comps), dtype=np.int64)
    down = np.zeros(len(level_comps), dtype=np.int64)
    for comp in slab_comps:
        _, j, e = comp[0]
        lo, hi = ends(j, e)
        cover_edges.append((lo, hi, j))
        up[lo] += 1
        down[hi] += 1

    zlabel = {}
    for name, verts in zip(cover.locus.labels, cover.cover_locus_components()):
        zlabel.update({v: name for v in verts})
    zero_set = zeros.cover_vertices(cover) if zeros is not None else set()
    payload_z, payload_zeros = [], []
    for comp in level_comps:
        verts = [x[3] for x in comp if x[2] == "v"]
        payload_z.append({zlabel[v] for v in verts if v in zlabel})
        payload_zeros.append({int(cover.vertex_projection[v]) for v in verts if v in zero_set})
    singular = [bool(payload_z[k] or payload_zeros[k]) or (up[k], down[k]) != (1, 1)
                for k in range(len(level_comps))]

    # divide by the deck involution
    mirror = _mirror_levels(levels, c)
    tau_v, tau_e = cover.vertex_involution, cover.involution[1]

    def image(x):
        if x[0] == "S":
            return ("S", int(mirror[(x[1] + 1) % m]), int(tau_e[x[2]]))
        if x[2] == "v":
            w = int(tau_v[x[3]])
            return ("L", int(label[w]), "v", w)
        return ("L", int(mirror[x[1]]), "e", int(tau_e[x[3]]))

    node_uf, slab_uf = UnionFind(range(len(level_comps))), UnionFind(range(len(slab_comps)))
    try:
        for k, comp in enumerate(level_comps):
            node_uf.union(k, node_of[image(comp[0])])
        for k, comp in enumerate(slab_comps):
            partner = slab_of[image(comp[0])]
            if partner == k:
                raise InputError("[error] A slab is mapped to itself by the deck involution")
            slab_uf.union(k, partner)
    except KeyError:
        raise InputError("[error] The circle map is not anti-equivariant on the complex")

    orbits = sorted(sorted(s) for s in node_uf.to_sets())
    orbit = {k: q for q, s in enumerate(orbits) for k in s}
    g = nx.MultiGraph()
    for q, s in enumerate(orbits):
        g.add_node(q, level=min(_fold(levels[level_comps[k][0][1]], c) for k in s),
                   z=tuple(sorted(set().union(*[payload_z[k] for k in s]))),
                   zeros=tuple(sorted(set().union(*[payload_zeros[k] for k in s]))),
                   singular=any(singular[k] for k in s), first=s[0])
    for s in sorted(sorted(s) for s in slab_uf.to_sets()):
        lo, hi, j = cover_edges[s[0]]
        g.add_edge(orbit[lo], orbit[hi], length=float(widths[j] / float(umap.mu)))

    notes = []
    non_generic = False
    crowded = sorted((g.nodes[q]["level"], q) for q in g.nodes if g.nodes[q]["singular"])
    groups, current = [], crowded[:1]
    for item in crowded[1:]:
        if item[0] - current[-1][0] < collision_tol:
            current.append(item)
        else:
            groups.append(current)
            current = [item]
    if current:
        groups.append(current)
    for group in groups:
        if len(group) < 2:
            continue
        if not symbolic_tiebreak:
            raise CriticalCollision(
                f"[error] {len(group)} singular leaves at level {group[0][0]:.12g}; perturb or enable the tie-break")
        non_generic = True
        notes.append(f"{len(group)} singular leaves share level {group[0][0]:.12g}; separated by leaf index")

    changed = True
    while changed:
        changed = False
        for n in sorted(g.nodes):
            data = g.nodes[n]
            if data["z"] or data["zeros"] or g.degree(n) != 2:
                continue
            (_, a, _, da), (_, b, _, db) = list(g.edges(n, keys=True, data=True))
            if a == n or b == n or a == b:
                continue
            g.remove_node(n)
            g.add_edge(a, b, length=da["length"] + db["length"])
            changed = True

    order = sorted(g.nodes, key=lambda q: (g.nodes[q]["level"], g.nodes[q]["first"]))
    g = nx.relabel_nodes(g, {q: i for i, q in enumerate(order)})
    for n in g.nodes:
        del g.nodes[n]["first"]
        del g.nodes[n]["singular"]
    grid = umap.mu if umap.exact else 2 * umap.mu
    graph = LeafGraph(graph=g, mu=umap.mu, circumference=c, non_generic=non_generic, notes=notes, grid=grid)
    logger.info("leaf graph: %d vertices, %d edges, b1=%d", g.number_of_nodes(), g.number_of_edges(),
                graph_betti(graph))
    return graph
