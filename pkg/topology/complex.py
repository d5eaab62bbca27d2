"""Oriented simplicial 2- and 3-complexes, integer boundary operators and homology.

Cells are stored as sorted vertex tuples. Edges and triangles of a
3-complex carry the lexicographic orientation; top cells carry an explicit
sign so that the fundamental cycle sum(sign * cell) has zero boundary.
"""
import json
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import List

import numpy as np
from scipy import sparse
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import invariant_factors

from topology.errors import (
    DegreeError,
    DimensionError,
    InputError,
    IoError,
    IntegerOverflowError,
    ManifoldError,
    ParseError,
)

logger = logging.getLogger(__name__)

INT64_MAX = 2 ** 63 - 1
CELL_KEYS = {0: None, 1: "edges", 2: "triangles", 3: "tets"}


def faces(cell):
    """Facets of a sorted cell; face i omits vertex i and enters the boundary with sign (-1)^i."""
    return [cell[:i] + cell[i + 1:] for i in range(len(cell))]


def permutation_sign(seq):
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class CellComplex(object):
    def __init__(self, dimension, top_cells, n_vertices=None, orientation=None, coordinates=None):
        if dimension not in (2, 3):
            raise DimensionError(f"[error] Unsupported dimension {dimension}!")
        self.dimension = dimension

        cells = [tuple(sorted(int(v) for v in c)) for c in top_cells]
        for c in cells:
            if len(c) != dimension + 1 or len(set(c)) != len(c):
                raise InputError(f"[error] Malformed top cell {c}")
        if len(set(cells)) != len(cells):
            raise ManifoldError("[error] Repeated top cell")
        if orientation is None:
            order = sorted(range(len(cells)), key=lambda j: cells[j])
        else:
            if len(orientation) != len(cells):
                raise InputError("[error] Orientation count does not match top cells")
            order = sorted(range(len(cells)), key=lambda j: cells[j])
            orientation = [int(orientation[j]) for j in order]
        top = [cells[j] for j in order]

        used = sorted({v for c in top for v in c})
        if n_vertices is None:
            n_vertices = used[-1] + 1 if used else 0
        if used != list(range(n_vertices)):
            raise ManifoldError("[error] Vertex set must be 0..N-1 with every vertex in a top cell")
        self.n_vertices = n_vertices

        self._cells = {0: [(v,) for v in range(n_vertices)], dimension: top}
        for k in range(dimension - 1, 0, -1):
            self._cells[k] = sorted({f for c in self._cells[k + 1] for f in faces(c)})
        self._index = {k: {c: i for i, c in enumerate(cs)} for k, cs in self._cells.items()}

        self.orientation = np.array(self._orient(orientation), dtype=np.int64)

        if coordinates is not None:
            coordinates = np.asarray(coordinates, dtype=float)
            if coordinates.shape[0] != n_vertices:
                raise InputError("[error] One coordinate row per vertex is required")
        self.coordinates = coordinates
        # translation periods for flat tori; edge vectors wrap when set
        self.period = None
        # intrinsic edge lengths of a flat metric without a global embedding
        self.lengths = None

    def _orient(self, orientation):
        top = self._cells[self.dimension]
        cofaces = defaultdict(list)
        for j, c in enumerate(top):
            for i, f in enumerate(faces(c)):
                cofaces[f].append((j, i))
        for f, cf in cofaces.items():
            if len(cf) != 2:
                raise ManifoldError(f"[error] Facet {f} bounds {len(cf)} top cells, expected 2")

        if orientation is not None:
            for f, ((j, i), (k, i2)) in cofaces.items():
                if orientation[j] * (-1) ** i + orientation[k] * (-1) ** i2 != 0:
                    raise ManifoldError(f"[error] Incoherent orientation across facet {f}")
            return orientation

        signs = [0] * len(top)
        for start in range(len(top)):
            if signs[start]:
                continue
            signs[start] = 1
            queue = deque([start])
            while queue:
                j = queue.popleft()
                for i, f in enumerate(faces(top[j])):
                    for k, i2 in cofaces[f]:
                        if k == j:
                            continue
                        want = -signs[j] * (-1) ** (i + i2)
                        if signs[k] == 0:
                            signs[k] = want
                            queue.append(k)
                        elif signs[k] != want:
                            raise ManifoldError("[error] Complex is not orientable")
        return signs

    @classmethod
    def from_oriented_cells(cls, dimension, cells, n_vertices=None, coordinates=None):
        """Top cells whose vertex order encodes their orientation."""
        return cls(
            dimension, cells, n_vertices=n_vertices,
            orientation=[permutation_sign(c) for c in cells],
            coordinates=coordinates,
        )

    @property
    def vertices(self):
        return range(self.n_vertices)

    @property
    def edges(self):
        return self._cells[1]

    @property
    def triangles(self):
        return self._cells[2]

    @property
    def tets(self):
        return self._cells.get(3, [])

    def cells(self, k):
        return self._cells.get(k, [])

    def n_cells(self, k):
        return len(self._cells.get(k, []))

    def index(self, k, cell):
        return self._index[k][tuple(sorted(cell))]

    def edge_sign(self, a, b):
        """Index and sign of the oriented edge a -> b."""
        return (self._index[1][(a, b)], 1) if a < b else (self._index[1][(b, a)], -1)

    def oriented_top_cells(self):
        out = []
        for c, s in zip(self._cells[self.dimension], self.orientation):
            out.append(c if s > 0 else (c[1], c[0]) + c[2:])
        return out

    def euler_characteristic(self):
        return sum((-1) ** k * self.n_cells(k) for k in range(self.dimension + 1))

    def vertex_neighbors(self):
        nbrs = [[] for _ in range(self.n_vertices)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return nbrs

    def to_json(self):
        data = {"dimension": self.dimension, "vertices": self.n_vertices}
        for k in (1, 2, 3):
            data[CELL_KEYS[k]] = [list(c) for c in self.cells(k)]
        data[CELL_KEYS[self.dimension]] = [list(c) for c in self.oriented_top_cells()]
        if self.coordinates is not None:
            data["coordinates"] = self.coordinates.tolist()
        return data

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            try:
                with open(data, "r") as f:
                    data = json.load(f)
            except json.JSONDecodeError as e:
                raise ParseError(f"[error] Malformed complex JSON: {e}")
            except OSError as e:
                raise IoError(f"[error] Cannot read {data}: {e}")
        try:
            dimension = int(data["dimension"])
            n_vertices = int(data["vertices"])
            top = [tuple(int(v) for v in c) for c in data[CELL_KEYS.get(dimension) or "tets"]]
            listed = {k: {tuple(sorted(int(v) for v in c)) for c in data.get(CELL_KEYS[k], [])}
                      for k in range(1, dimension)}
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"[error] Malformed complex JSON: {e}")
        if dimension not in (2, 3):
            raise DimensionError(f"[error] Unsupported dimension {dimension}!")
        complex = cls.from_oriented_cells(dimension, top, n_vertices=n_vertices,
                                          coordinates=data.get("coordinates"))
        for k, cells in listed.items():
            if cells != set(complex.cells(k)):
                raise InputError(f"[error] Listed {CELL_KEYS[k]} are not the faces of the top cells")
        return complex


@dataclass
class Cochain:
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def check(self, complex):
        if len(self.values) != complex.n_cells(self.degree):
            raise InputError(
                f"[error] {len(self.values)} values for {complex.n_cells(self.degree)} cells of degree {self.degree}")
        return self


@dataclass
class HomologySummary:
    betti: List[int]
    torsion: List[List[int]] = field(default_factory=list)


def boundary_matrix(complex, k):
    if not 1 <= k <= complex.dimension:
        raise DegreeError(f"[error] Boundary degree {k} outside 1..{complex.dimension}")
    rows, cols, vals = [], [], []
    index = complex._index[k - 1]
    top = k == complex.dimension
    for j, c in enumerate(complex.cells(k)):
        sign = int(complex.orientation[j]) if top else 1
        for i, f in enumerate(faces(c)):
            rows.append(index[f])
            cols.append(j)
            vals.append(sign * (-1) ** i)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(complex.n_cells(k - 1), complex.n_cells(k)), dtype=np.int64)


def coboundary(complex, cochain):
    values = np.asarray(cochain)
    degree = cochain.degree if isinstance(cochain, Cochain) else 1
    return Cochain(degree + 1, boundary_matrix(complex, degree + 1).T @ values)


def _to_rows(matrix):
    matrix = sparse.coo_matrix(matrix)
    rows = defaultdict(dict)
    cols = defaultdict(set)
    for r, c, v in zip(matrix.row, matrix.col, matrix.data):
        if v:
            rows[int(r)][int(c)] = rows[int(r)].get(int(c), 0) + int(v)
            cols[int(c)].add(int(r))
    return rows, cols


def _unit_eliminate(rows, cols, eliminated=None):
    """Pivot on +-1 entries until none remain, in place.

    Row operations only; each pivot (p, c) removes row p and column c.
    When `eliminated` is a list, the pivot row is recorded there as
    (c, {other column: coefficient}) with x_c = sum(coefficient * x_other).
    Returns the number of pivots.
    """
    rank = 0
    progress = True
    while progress:
        progress = False
        for c in sorted(cols):
            if c not in cols:
                continue
            candidates = [r for r in cols[c] if abs(rows[r][c]) == 1]
            if not candidates:
                continue
            p = min(candidates, key=lambda r: (len(rows[r]), r))
            pivot_row = rows.pop(p)
            pv = pivot_row[c]
            for r in sorted(cols[c]):
                if r == p:
                    continue
                row = rows[r]
                factor = row[c] * pv
                for cc, v in pivot_row.items():
                    nv = row.get(cc, 0) - factor * v
                    if nv:
                        row[cc] = nv
                        cols[cc].add(r)
                    else:
                        row.pop(cc, None)
                        cols[cc].discard(r)
                if not row:
                    del rows[r]
            for cc in pivot_row:
                cols[cc].discard(p)
            del cols[c]
            if eliminated is not None:
                eliminated.append((c, {cc: -pv * v for cc, v in pivot_row.items() if cc != c}))
            rank += 1
            progress = True
    return rank


def integer_rank_and_factors(matrix):
    """Rank and invariant factors > 1 of an integer matrix."""
    rows, cols = _to_rows(matrix)
    rank = _unit_eliminate(rows, cols)
    live_rows = sorted(r for r, row in rows.items() if row)
    live_cols = sorted(c for c, rs in cols.items() if rs)
    if not live_rows or not live_cols:
        return rank, []
    col_pos = {c: j for j, c in enumerate(live_cols)}
    dense = [[0] * len(live_cols) for _ in live_rows]
    for i, r in enumerate(live_rows):
        for c, v in rows[r].items():
            dense[i][col_pos[c]] = v
    logger.debug("dense remainder %d x %d", len(live_rows), len(live_cols))
    factors = [abs(int(f)) for f in invariant_factors(Matrix(dense), domain=ZZ) if f != 0]
    return rank + len(factors), sorted(f for f in factors if f > 1)


def homology(complex):
    d = complex.dimension
    ranks = {0: 0, d + 1: 0}
    factors = {d + 1: []}
    for k in range(1, d + 1):
        ranks[k], factors[k] = integer_rank_and_factors(boundary_matrix(complex, k))
    betti = [complex.n_cells(k) - ranks[k] - ranks[k + 1] for k in range(d + 1)]
    torsion = [factors[k + 1] for k in range(d + 1)]
    return HomologySummary(betti=betti, torsion=torsion)


def is_rational_homology_sphere(complex):
    if complex.dimension != 3:
        raise DimensionError("[error] Rational homology spheres are 3-dimensional here")
    return homology(complex).betti == [1, 0, 0, 1]


def spanning_forest(complex):
    """BFS forest of the 1-skeleton: (parent vertex, parent edge) per vertex, visit order."""
    nbrs = complex.vertex_neighbors()
    parent = [-1] * complex.n_vertices
    parent_edge = [-1] * complex.n_vertices
    seen = [False] * complex.n_vertices
    order = []
    for root in complex.vertices:
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in sorted(nbrs[v]):
                if not seen[w]:
                    seen[w] = True
                    parent[w] = v
                    parent_edge[w] = complex.index(1, (v, w))
                    queue.append(w)
    return parent, parent_edge, order


def _column_echelon(matrix, n):
    """Column-reduce a small integer matrix, tracking Q and its inverse.

    Returns (r, Q, Qinv) with matrix @ Q zero beyond its first r columns.
    """
    a = [list(row) for row in matrix]
    q = [[int(i == j) for j in range(n)] for i in range(n)]
    qinv = [[int(i == j) for j in range(n)] for i in range(n)]

    def swap(s, t):
        for row in a:
            row[s], row[t] = row[t], row[s]
        for row in q:
            row[s], row[t] = row[t], row[s]
        qinv[s], qinv[t] = qinv[t], qinv[s]

    def subtract(j, t, m):
        # col_j -= m * col_t
        for row in a:
            row[j] -= m * row[t]
        for row in q:
            row[j] -= m * row[t]
        qinv[t] = [x + m * y for x, y in zip(qinv[t], qinv[j])]

    t = 0
    for row in a:
        while t < n:
            nz = [j for j in range(t, n) if row[j]]
            if not nz:
                break
            j = min(nz, key=lambda j: (abs(row[j]), j))
            if j != t:
                swap(j, t)
            others = [j for j in range(t + 1, n) if row[j]]
            if not others:
                t += 1
                break
            for j in others:
                subtract(j, t, row[j] // row[t])
    return t, q, qinv


def _check_int64(values):
    if any(abs(int(v)) > INT64_MAX for v in values):
        raise IntegerOverflowError("[error] Integer cochain entry exceeds 64-bit range")
    return np.array([int(v) for v in values], dtype=np.int64)


def _cohomology_data(complex):
    parent, parent_edge, order = spanning_forest(complex)
    tree = set(e for e in parent_edge if e >= 0)
    gens = [e for e in range(complex.n_cells(1)) if e not in tree]
    gen_pos = {e: j for j, e in enumerate(gens)}

    rows, cols = defaultdict(dict), defaultdict(set)
    if complex.dimension >= 2:
        rel = boundary_matrix(complex, 2).T.tocoo()
        for r, c, v in zip(rel.row, rel.col, rel.data):
            if int(c) in gen_pos:
                j = gen_pos[int(c)]
                rows[int(r)][j] = int(v)
                cols[j].add(int(r))
    for j in range(len(gens)):
        cols.setdefault(j, set())
    eliminated = []
    _unit_eliminate(rows, cols, eliminated)

    free = sorted(cols)
    free_pos = {c: i for i, c in enumerate(free)}
    live_rows = sorted(r for r, row in rows.items() if row)
    dense = [[0] * len(free) for _ in live_rows]
    for i, r in enumerate(live_rows):
        for c, v in rows[r].items():
            dense[i][free_pos[c]] = v
    r, q, qinv = _column_echelon(dense, len(free))

    cocycles, cycles = [], []
    for j in range(r, len(free)):
        x = {c: q[free_pos[c]][j] for c in free}
        for c, expr in reversed(eliminated):
            x[c] = sum(coef * x[cc] for cc, coef in expr.items())
        values = [0] * complex.n_cells(1)
        for g, e in enumerate(gens):
            values[e] = x[g]
        cocycles.append(Cochain(1, _check_int64(values)))

        coeffs = {free[i]: qinv[j][i] for i in range(len(free)) if qinv[j][i]}
        cycles.append(Cochain(1, _check_int64(_fundamental_chain(complex, gens, coeffs, parent, parent_edge, order))))
    return cocycles, cycles


def _fundamental_chain(complex, gens, coeffs, parent, parent_edge, order):
    """Integer 1-chain sum(coeff * fundamental cycle of non-tree edge)."""
    chain = [0] * complex.n_cells(1)
    demand = [0] * complex.n_vertices
    for g, m in coeffs.items():
        e = gens[g]
        a, b = complex.edges[e]
        chain[e] += m
        demand[b] -= m
        demand[a] += m
    for v in reversed(order):
        u = parent[v]
        if u < 0:
            continue
        s = demand[v]
        if s:
            chain[parent_edge[v]] += s if u < v else -s
            demand[u] += s
            demand[v] = 0
    return chain


def cocycle_basis(complex):
    """Integer closed 1-cochains spanning H^1 modulo torsion.

    Their periods on `cycle_basis(complex)` form the identity matrix.
    """
    return _cohomology_data(complex)[0]


def cycle_basis(complex):
    return _cohomology_data(complex)[1]


def relabel(complex, perm):
    perm = list(perm)
    cells = [tuple(perm[v] for v in c) for c in complex.oriented_top_cells()]
    coordinates = None
    if complex.coordinates is not None:
        coordinates = np.empty_like(complex.coordinates)
        coordinates[perm] = complex.coordinates
    out = CellComplex.from_oriented_cells(complex.dimension, cells, complex.n_vertices, coordinates)
    out.period = complex.period
    return out


def barycentric_subdivision(complex):
    """First barycentric subdivision.

    Vertex v keeps its id; the barycenters of edges, triangles and tets
    follow in that order. Returns (subdivision, barycenter id per cell).
    """
    bary = {(v,): v for v in complex.vertices}
    next_id = complex.n_vertices
    for k in range(1, complex.dimension + 1):
        for c in complex.cells(k):
            bary[c] = next_id
            next_id += 1

    def flags(cell):
        if len(cell) == 1:
            return [[cell]]
        return [chain + [cell] for f in faces(cell) for chain in flags(f)]

    top = []
    for c in complex.cells(complex.dimension):
        for chain in flags(c):
            top.append(tuple(bary[s] for s in chain))

    coordinates = None
    if complex.coordinates is not None:
        coordinates = np.zeros((next_id, complex.coordinates.shape[1]))
        for cell, i in bary.items():
            coordinates[i] = complex.coordinates[list(cell)].mean(axis=0)
    return CellComplex(complex.dimension, top, n_vertices=next_id, coordinates=coordinates), bary


def is_full_subcomplex(complex, vertex_set, cells):
    """True when every simplex spanned by `vertex_set` lies in `cells`."""
    vertex_set = set(vertex_set)
    cells = set(tuple(sorted(c)) for c in cells) | {(v,) for v in vertex_set}
    for k in range(1, complex.dimension + 1):
        for c in complex.cells(k):
            if all(v in vertex_set for v in c) and c not in cells:
                return False
    return True


def skeleton_edges(cells):
    return sorted({e for c in cells for e in combinations(sorted(c), 2)})
