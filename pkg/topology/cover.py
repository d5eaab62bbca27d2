"""Two-fold branched covers of a complex along a codimension-2 locus.

The cover doubles every cell disjoint from Z and keeps one copy of Z.
A base cell sigma splits as alpha * beta with alpha = sigma cap Z; its
lifts are alpha * (beta on sheet s) for s = 0, 1, where the sheets of the
other beta vertices follow the monodromy cocycle from the smallest one.
Cover vertex ids increase with the base vertex, so every cover edge is
oriented like its image.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import networkx as nx
import numpy as np
import sympy

from topology.complex import (
    CellComplex,
    Cochain,
    cocycle_basis,
    cycle_basis,
    homology,
    is_full_subcomplex,
)
from topology.errors import InputError, MonodromyError, NoLineBundle, ParseError

logger = logging.getLogger(__name__)


class SingularLocus(object):
    """Branch locus Z: edge loops of a 3-complex or vertices of a surface."""

    def __init__(self, complex, components):
        self.complex = complex
        comps = []
        for comp in components:
            cells = sorted({tuple(sorted(int(v) for v in c)) for c in comp})
            comps.append(tuple(cells))
        self.components = comps
        self._validate()

    @property
    def dimension(self):
        return self.complex.dimension

    @property
    def labels(self):
        return [f"S{i + 1}" for i in range(len(self.components))]

    @property
    def vertices(self):
        return frozenset(v for comp in self.components for c in comp for v in c)

    @property
    def edges(self):
        if self.dimension == 2:
            return frozenset()
        return frozenset(c for comp in self.components for c in comp)

    def component_vertices(self, i):
        return sorted({v for c in self.components[i] for v in c})

    def component_of_vertex(self):
        return {v: i for i in range(len(self.components)) for v in self.component_vertices(i)}

    def _validate(self):
        complex = self.complex
        seen = set()
        for i, comp in enumerate(self.components):
            if not comp:
                raise InputError(f"[error] Empty locus component {i}")
            if complex.dimension == 2:
                if len(comp) != 1 or len(comp[0]) != 1:
                    raise InputError("[error] A surface locus component is a single vertex")
                if not 0 <= comp[0][0] < complex.n_vertices:
                    raise InputError(f"[error] Unknown vertex {comp[0][0]}")
            else:
                degree = {}
                for e in comp:
                    if len(e) != 2 or e not in complex._index[1]:
                        raise InputError(f"[error] {e} is not an edge of the complex")
                    for v in e:
                        degree[v] = degree.get(v, 0) + 1
                if any(d != 2 for d in degree.values()):
                    raise InputError(f"[error] Locus component {i} is not a simple closed loop")
                if not self._connected(comp):
                    raise InputError(f"[error] Locus component {i} is disconnected")
            verts = {v for c in comp for v in c}
            if verts & seen:
                raise InputError("[error] Locus components must be disjoint")
            seen |= verts
        cells = [c for comp in self.components for c in comp]
        if not is_full_subcomplex(complex, seen, cells):
            raise InputError("[error] The locus must be a full subcomplex; subdivide the complex first")

    @staticmethod
    def _connected(edges):
        return nx.is_connected(nx.Graph(list(edges)))

    def to_json(self):
        if self.dimension == 2:
            return {"components": [[c[0] for c in comp] for comp in self.components]}
        return {"components": [[list(e) for e in comp] for comp in self.components]}

    @classmethod
    def from_json(cls, data, complex):
        try:
            raw = data["components"]
            components = []
            for comp in raw:
                cells = []
                for c in comp:
                    if isinstance(c, int):
                        cells.append((c,) if complex.dimension == 2 else complex.edges[c])
                    else:
                        cells.append(tuple(int(v) for v in c))
                components.append(cells)
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise ParseError(f"[error] Malformed locus JSON: {e}")
        return cls(complex, components)


def complement_edge_mask(complex, locus):
    """Edges disjoint from Z; M minus Z retracts onto the cells they span."""
    zset = locus.vertices
    return np.array([a not in zset and b not in zset for a, b in complex.edges], dtype=bool)


def meridian_loops(complex, locus):
    """One meridian per Z edge (3D) or Z vertex (2D): the edges of its link."""
    loops = []
    if complex.dimension == 3:
        for i, comp in enumerate(locus.components):
            for z1, z2 in comp:
                link = [tuple(v for v in t if v not in (z1, z2)) for t in complex.tets if z1 in t and z2 in t]
                loops.append((i, sorted(link)))
    else:
        for i, comp in enumerate(locus.components):
            z = comp[0][0]
            link = [tuple(v for v in t if v != z) for t in complex.triangles if z in t]
            loops.append((i, sorted(link)))
    return loops


def solve_gf2(rows, n):
    """Solve a linear system over Z/2 given as (bitmask, rhs) rows.

    Free variables are set to 0. Returns None when inconsistent.
    """
    pivots = {}
    for mask, rhs in rows:
        while mask:
            low = mask & -mask
            if low in pivots:
                pm, pr = pivots[low]
                mask ^= pm
                rhs ^= pr
            else:
                pivots[low] = (mask, rhs)
                break
        else:
            if rhs:
                return None
    x = [0] * n
    for low in sorted(pivots, reverse=True):
        mask, rhs = pivots[low]
        bit = low.bit_length() - 1
        rest = mask ^ low
        value = rhs
        while rest:
            b = rest & -rest
            value ^= x[b.bit_length() - 1]
            rest ^= b
        x[bit] = value
    return x


@dataclass
class MonodromyCocycle:
    values: np.ndarray
    support: np.ndarray

    def holonomy(self, complex, loop):
        return int(sum(self.values[complex.index(1, e)] for e in loop)) % 2

    def check(self, complex, locus):
        zset = locus.vertices
        for t in complex.triangles:
            if any(v in zset for v in t):
                continue
            if sum(self.values[complex.index(1, e)] for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2]))) % 2:
                raise InputError(f"[error] Monodromy cocycle is not closed on {t}")
        for i, loop in meridian_loops(complex, locus):
            if self.holonomy(complex, loop) != 1:
                raise InputError(f"[error] Meridian of component {i} has trivial monodromy")
        return True


def meridian_cocycle(complex, locus):
    mask = complement_edge_mask(complex, locus)
    var = {e: j for j, e in enumerate(np.flatnonzero(mask))}
    zset = locus.vertices
    rows = []
    for t in complex.triangles:
        if any(v in zset for v in t):
            continue
        m = 0
        for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            m ^= 1 << var[complex.index(1, e)]
        rows.append((m, 0))
    for _, loop in meridian_loops(complex, locus):
        m = 0
        for e in loop:
            m ^= 1 << var[complex.index(1, e)]
        rows.append((m, 1))
    x = solve_gf2(rows, len(var))
    if x is None:
        raise NoLineBundle("[error] No double cover with nontrivial monodromy around every locus component")
    values = np.zeros(complex.n_cells(1), dtype=np.int8)
    for e, j in var.items():
        values[e] = x[j]
    return MonodromyCocycle(values=values, support=mask)


@dataclass
class BranchedCover:
    complex: CellComplex
    base: CellComplex
    locus: SingularLocus
    cocycle: MonodromyCocycle
    vertex_projection: np.ndarray
    vertex_sheet: np.ndarray
    vertex_involution: np.ndarray
    projection: Dict[int, np.ndarray] = field(default_factory=dict)
    involution: Dict[int, np.ndarray] = field(default_factory=dict)
    branch_cells: Dict[int, List[int]] = field(default_factory=dict)
    edge_sheet: np.ndarray = None

    @property
    def tau_edge_sign(self):
        a = self.vertex_involution[[e[0] for e in self.complex.edges]]
        b = self.vertex_involution[[e[1] for e in self.complex.edges]]
        return np.where(a < b, 1, -1)

    def pullback_tau(self, cochain):
        """tau^* of a 1-cochain on the cover."""
        values = np.asarray(cochain)
        return self.tau_edge_sign * values[self.involution[1]]

    def lifts(self, k):
        out = [[] for _ in range(self.base.n_cells(k))]
        for i, b in enumerate(self.projection[k]):
            out[b].append(i)
        return out

    def check(self):
        base, cover = self.base, self.complex
        for k in range(cover.dimension + 1):
            proj, inv = self.projection[k], self.involution[k]
            if not np.array_equal(proj[inv], proj):
                raise InputError(f"[error] p o tau != p in degree {k}")
            if not np.array_equal(inv[inv], np.arange(len(inv))):
                raise InputError(f"[error] tau is not an involution in degree {k}")
            fixed = set(np.flatnonzero(inv == np.arange(len(inv))).tolist())
            if fixed != set(self.branch_cells[k]):
                raise InputError(f"[error] Fixed cells of tau differ from the branch cells in degree {k}")
            counts = np.bincount(proj, minlength=base.n_cells(k))
            zcells = {int(proj[i]) for i in self.branch_cells[k]}
            for b, n in enumerate(counts):
                if n != (1 if b in zcells else 2):
                    raise InputError(f"[error] Base cell {base.cells(k)[b]} has {n} preimages")
        chi_z = len(self.locus.vertices) - len(self.locus.edges)
        if cover.euler_characteristic() != 2 * base.euler_characteristic() - chi_z:
            raise InputError("[error] Euler characteristic of the cover is inconsistent")
        return True

    def cover_locus_components(self):
        """Cover vertex ids of each Z component."""
        out = [[] for _ in self.locus.components]
        owner = self.locus.component_of_vertex()
        for i, v in enumerate(self.vertex_projection):
            if self.vertex_sheet[i] < 0:
                out[owner[int(v)]].append(i)
        return out

    def to_json(self):
        return {
            "cover": self.complex.to_json(),
            "map": {
                "vertex_projection": self.vertex_projection.tolist(),
                "vertex_involution": self.vertex_involution.tolist(),
                "lifts": {str(k): self.lifts(k) for k in range(self.base.dimension + 1)},
            },
        }


def build_branched_cover(complex, locus, cocycle):
    zset = locus.vertices
    ids = {}
    n = 0
    for v in complex.vertices:
        if v in zset:
            ids[(v, 0)] = ids[(v, 1)] = n
            n += 1
        else:
            ids[(v, 0)], ids[(v, 1)] = n, n + 1
            n += 2
    vertex_projection = np.zeros(n, dtype=np.int64)
    vertex_sheet = np.zeros(n, dtype=np.int64)
    vertex_involution = np.zeros(n, dtype=np.int64)
    for (v, s), i in ids.items():
        vertex_projection[i] = v
        vertex_sheet[i] = -1 if v in zset else s
        vertex_involution[i] = ids[(v, 1 - s)]

    tops = []
    for cell in complex.cells(complex.dimension):
        alpha = [ids[(v, 0)] for v in cell if v in zset]
        beta = [v for v in cell if v not in zset]
        b0 = beta[0]
        for s in (0, 1):
            verts = list(alpha)
            for b in beta:
                sb = s if b == b0 else s ^ int(cocycle.values[complex.index(1, (b0, b))])
                verts.append(ids[(b, sb)])
            tops.append(tuple(verts))

    coordinates = None
    if complex.coordinates is not None:
        coordinates = complex.coordinates[vertex_projection]
    cover = CellComplex(complex.dimension, tops, n_vertices=n, coordinates=coordinates)
    cover.period = complex.period

    projection, involution, branch_cells = {}, {}, {}
    for k in range(complex.dimension + 1):
        cells = cover.cells(k)
        projection[k] = np.array(
            [complex.index(k, vertex_projection[list(c)]) for c in cells], dtype=np.int64)
        involution[k] = np.array(
            [cover.index(k, vertex_involution[list(c)]) for c in cells], dtype=np.int64)
        branch_cells[k] = np.flatnonzero(involution[k] == np.arange(len(cells))).tolist()
    if complex.lengths is not None:
        cover.lengths = np.asarray(complex.lengths, dtype=float)[projection[1]]

    edge_sheet = np.array(
        [next((int(vertex_sheet[v]) for v in e if vertex_sheet[v] >= 0), -1) for e in cover.edges],
        dtype=np.int64)
    result = BranchedCover(
        complex=cover, base=complex, locus=locus, cocycle=cocycle,
        vertex_projection=vertex_projection, vertex_sheet=vertex_sheet,
        vertex_involution=vertex_involution, projection=projection,
        involution=involution, branch_cells=branch_cells, edge_sheet=edge_sheet,
    )
    logger.info("cover: %d vertices, %d top cells, chi=%d",
                cover.n_vertices, cover.n_cells(cover.dimension), cover.euler_characteristic())
    return result


@dataclass
class TwoValuedForm:
    """Two-valued 1-form on the base, stored by its value on the sheet-0 lift of each edge.

    The sheet-0 lift of an edge is the one whose first vertex off Z lies on
    sheet 0. `cocycle` names the sheet labelling the values refer to; when
    it differs from the cover's by a coboundary, `lift` relabels the sheets.
    """
    values: np.ndarray
    cocycle: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.cocycle is not None:
            self.cocycle = np.asarray(self.cocycle, dtype=np.int8)

    def gauge(self, cover):
        """Sheet flips taking this form's labelling to the cover's, per base vertex."""
        base = cover.base
        flip = np.zeros(base.n_vertices, dtype=np.int64)
        if self.cocycle is None or np.array_equal(self.cocycle % 2, cover.cocycle.values % 2):
            return flip
        zset = cover.locus.vertices
        diff = (self.cocycle + cover.cocycle.values) % 2
        nbrs = base.vertex_neighbors()
        seen = np.zeros(base.n_vertices, dtype=bool)
        for root in base.vertices:
            if seen[root] or root in zset:
                continue
            seen[root] = True
            queue = deque([root])
            while queue:
                v = queue.popleft()
                for w in nbrs[v]:
                    if w in zset:
                        continue
                    want = flip[v] ^ int(diff[base.index(1, (v, w))])
                    if not seen[w]:
                        seen[w] = True
                        flip[w] = want
                        queue.append(w)
                    elif flip[w] != want:
                        raise MonodromyError("[error] Form and cover use inequivalent monodromy")
        return flip

    def lift(self, cover):
        flip = self.gauge(cover)
        first = np.array([next((v for v in e if v not in cover.locus.vertices), e[0]) for e in cover.base.edges])
        values = self.values * np.where(flip[first] == 1, -1.0, 1.0)
        sign = np.where(cover.edge_sheet == 1, -1.0, 1.0)
        sign[cover.edge_sheet < 0] = 0.0
        return sign * values[cover.projection[1]]

    @classmethod
    def descend(cls, cover, cochain):
        cochain = np.asarray(cochain, dtype=float)
        values = np.zeros(cover.base.n_cells(1))
        for i, b in enumerate(cover.projection[1]):
            if cover.edge_sheet[i] == 0:
                values[b] = cochain[i]
        return cls(values, cover.cocycle.values.copy())

    def to_json(self):
        data = {"edges": [float(x) for x in self.values]}
        if self.cocycle is not None:
            data["cocycle"] = [int(x) for x in self.cocycle]
        return data

    @classmethod
    def from_json(cls, data, complex):
        try:
            values = np.asarray(data["edges"], dtype=float)
            cocycle = data.get("cocycle")
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"[error] Malformed form JSON: {e}")
        if len(values) != complex.n_cells(1) or (cocycle is not None and len(cocycle) != len(values)):
            raise InputError("[error] Form values do not match the edges of the complex")
        return cls(values, cocycle)


def antiinvariant_project(cover, cochain):
    values = np.asarray(cochain, dtype=float)
    return (values - cover.pullback_tau(values)) / 2.0


def antiinvariant_cohomology(cover):
    """Closed anti-invariant real 1-cochains whose classes span H^1_-."""
    cocycles = cocycle_basis(cover.complex)
    if not cocycles:
        return []
    cycles = cycle_basis(cover.complex)
    doubled = [c.values - cover.pullback_tau(c.values) for c in cocycles]
    periods = sympy.Matrix([[int(np.dot(z.values, d)) for z in cycles] for d in doubled])
    _, pivots = periods.T.rref()
    return [Cochain(1, doubled[j] / 2.0) for j in pivots]


@dataclass
class ObstructionReport:
    b1_cover: int
    component_count: int
    passes: bool
    notes: str = ""


def haydys_obstruction(cover, locus, base_is_rhs):
    b1 = homology(cover.complex).betti[1]
    notes = []
    if base_is_rhs and len(locus.components) < 2:
        notes.append("single locus component on a rational homology sphere: no Z/2 harmonic form can branch here")
    if b1 == 0:
        notes.append("branched cover has vanishing first Betti number")
    return ObstructionReport(b1_cover=b1, component_count=len(locus.components), passes=b1 > 0,
                             notes="; ".join(notes))


def odd_distance_potential(cover, sources):
    """Odd cover function +-dist(., sources) with its zero set on the lifted sources.

    The base function is the graph distance to `sources`; its sign on each
    sheet is continued along edges away from the sources, which needs
    trivial monodromy on every loop avoiding them.
    """
    base = cover.base
    nbrs = base.vertex_neighbors()
    dist = np.full(base.n_vertices, -1, dtype=np.int64)
    queue = deque(sorted(sources))
    for v in queue:
        dist[v] = 0
    while queue:
        v = queue.popleft()
        for w in nbrs[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    if (dist < 0).any():
        raise InputError("[error] Sources do not reach every vertex")

    cocycle = cover.cocycle.values
    sign = np.zeros(base.n_vertices, dtype=np.int64)
    for root in range(base.n_vertices):
        if sign[root] or dist[root] == 0:
            continue
        sign[root] = 1
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for w in nbrs[v]:
                if dist[w] == 0:
                    continue
                want = sign[v] * (-1) ** int(cocycle[base.index(1, (v, w))])
                if sign[w] == 0:
                    sign[w] = want
                    queue.append(w)
                elif sign[w] != want:
                    raise MonodromyError("[error] Monodromy is nontrivial on a loop avoiding the sources")

    potential = np.zeros(cover.complex.n_vertices)
    for i, v in enumerate(cover.vertex_projection):
        s = cover.vertex_sheet[i]
        if s >= 0:
            potential[i] = (1 - 2 * s) * sign[v] * dist[v]
    return potential
