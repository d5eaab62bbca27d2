"""Explicit triangulations used by the presets and the test-suite.

Builders returning a singular locus give its components as lists of
sorted edges (3-complexes) or single vertices (surfaces).
"""
from itertools import combinations, product

import numpy as np

from topology.complex import CellComplex, barycentric_subdivision


def tetrahedron_boundary():
    return CellComplex(2, combinations(range(4), 3))


def boundary_4simplex():
    return CellComplex(3, combinations(range(5), 4))


def icosahedron():
    """Vertex 0 on top, 1..5 upper ring, 6..10 lower ring, 11 at the bottom."""
    tris = []
    for i in range(5):
        u, u1 = 1 + i, 1 + (i + 1) % 5
        l, l1 = 6 + i, 6 + (i + 1) % 5
        tris += [(0, u, u1), (11, l, l1), (u, l, u1), (u1, l, l1)]
    h = 1.0 / np.sqrt(5.0)
    r = 2.0 * h
    coords = [(0.0, 0.0, 1.0)]
    coords += [(r * np.cos(2 * np.pi * i / 5), r * np.sin(2 * np.pi * i / 5), h) for i in range(5)]
    coords += [(r * np.cos(2 * np.pi * (i + 0.5) / 5), r * np.sin(2 * np.pi * (i + 0.5) / 5), -h) for i in range(5)]
    coords += [(0.0, 0.0, -1.0)]
    return CellComplex(2, tris, coordinates=np.array(coords))


def torus7():
    """The 7-vertex torus."""
    tris = []
    for i in range(7):
        tris.append((i, (i + 1) % 7, (i + 3) % 7))
        tris.append((i, (i + 2) % 7, (i + 3) % 7))
    return CellComplex(2, tris)


def flat_torus(n):
    """n x n grid on the unit-square torus, squares split along the (1, 1) diagonal."""
    if n < 3:
        raise ValueError("[error] The flat torus grid needs n >= 3")

    def vid(i, j):
        return i % n + n * (j % n)

    tris = []
    for i, j in product(range(n), range(n)):
        tris.append((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)))
        tris.append((vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)))
    coords = np.array([(i / n, j / n) for j in range(n) for i in range(n)])
    complex = CellComplex(2, tris, coordinates=coords)
    complex.period = np.array([1.0, 1.0])
    return complex


def _prism_tets(tri, lo, hi, n_surface):
    a, b, c = sorted(tri)

    def vid(v, layer):
        return layer * n_surface + v

    return [
        (vid(a, lo), vid(a, hi), vid(b, hi), vid(c, hi)),
        (vid(a, lo), vid(b, lo), vid(b, hi), vid(c, hi)),
        (vid(a, lo), vid(b, lo), vid(c, lo), vid(c, hi)),
    ]


def surface_times_circle(surface, k=3):
    """Staircase prisms over surface x C_k; simplicial for k >= 3."""
    if k < 3:
        raise ValueError("[error] The circle factor needs k >= 3 layers")
    ns = surface.n_vertices
    tets = []
    for t in surface.triangles:
        for i in range(k):
            tets += _prism_tets(t, i, (i + 1) % k, ns)
    return CellComplex(3, tets, n_vertices=ns * k)


def s2_times_s1(k=3):
    return surface_times_circle(tetrahedron_boundary(), k)


def capped_cylinder(surface, length):
    """3-sphere as surface x [0, length] with a cone on each end (surface a 2-sphere).

    Vertex (v, layer) has id layer * |V| + v; the two cone points come last.
    """
    ns = surface.n_vertices
    tets = []
    for t in surface.triangles:
        for i in range(length):
            tets += _prism_tets(t, i, i + 1, ns)
    south, north = ns * (length + 1), ns * (length + 1) + 1
    for t in surface.triangles:
        tets.append((south,) + tuple(v for v in t))
        tets.append((north,) + tuple(length * ns + v for v in t))
    return CellComplex(3, tets, n_vertices=ns * (length + 1) + 2)


def cross_polytope_boundary():
    """Boundary of the 4-dimensional cross-polytope; +e_i has id 2i and -e_i has id 2i + 1."""
    tets = [tuple(2 * i + s for i, s in enumerate(signs)) for signs in product((0, 1), repeat=4)]
    return CellComplex(3, tets)


def _subdivided_loop(bary, loop):
    edges = []
    for a, b in zip(loop, loop[1:] + loop[:1]):
        m = bary[tuple(sorted((a, b)))]
        edges += [tuple(sorted((a, m))), tuple(sorted((m, b)))]
    return edges


def _plus(i):
    return 2 * (i - 1)


def _minus(i):
    return 2 * (i - 1) + 1


def s3_unknot():
    """Subdivided cross-polytope sphere with the square e1, e2, -e1, -e2 as locus."""
    sphere, bary = barycentric_subdivision(cross_polytope_boundary())
    loop = [_plus(1), _plus(2), _minus(1), _minus(2)]
    return sphere, [_subdivided_loop(bary, loop)]


def s3_hopf_link():
    """The two squares of the cross-polytope in the 12- and 34-planes form a Hopf link."""
    sphere, bary = barycentric_subdivision(cross_polytope_boundary())
    loops = [[_plus(1), _plus(2), _minus(1), _minus(2)], [_plus(3), _plus(4), _minus(3), _minus(4)]]
    return sphere, [_subdivided_loop(bary, loop) for loop in loops]


def s3_unlink():
    """Boundaries of the disjoint faces {e1, e2, e3} and {-e1, -e2, -e3}."""
    sphere, bary = barycentric_subdivision(cross_polytope_boundary())
    loops = [[_plus(1), _plus(2), _plus(3)], [_minus(1), _minus(2), _minus(3)]]
    return sphere, [_subdivided_loop(bary, loop) for loop in loops]


def lens_space_21():
    """L(2,1) as the antipodal quotient of the subdivided cross-polytope sphere."""
    polytope = cross_polytope_boundary()
    sphere, bary = barycentric_subdivision(polytope)
    antipode = {}
    for cell, i in bary.items():
        antipode[i] = bary[tuple(sorted(v ^ 1 for v in cell))]
    orbit = {}
    for v in sorted(antipode):
        if v not in orbit:
            orbit[v] = orbit[antipode[v]] = len(set(orbit.values()))
    tets = {tuple(sorted(orbit[v] for v in t)) for t in sphere.tets}
    return CellComplex(3, sorted(tets))


STAR_TREE_LAYERS = 8
STAR_TREE_DISKS = ((0, 1), (11, 4), (0, 7))


def star_tree_sphere(disks=STAR_TREE_DISKS):
    """3-sphere with a three-component unlink.

    Each component is the link of an icosahedron vertex p inside layer k of
    the capped cylinder over the icosahedron, for (p, k) in STAR_TREE_DISKS;
    it bounds the disk star(p) x {k}. Returns (complex, components, disks)
    with each disk given by its vertex set.
    """
    ico = icosahedron()
    ns = ico.n_vertices
    sphere = capped_cylinder(ico, STAR_TREE_LAYERS)
    components, spans = [], []
    for p, layer in disks:
        star = [t for t in ico.triangles if p in t]
        ring = sorted({e for t in star for e in combinations(t, 2) if p not in e})
        components.append([tuple(sorted((layer * ns + a, layer * ns + b))) for a, b in ring])
        spans.append(sorted({layer * ns + v for t in star for v in t}))
    return sphere, components, spans
