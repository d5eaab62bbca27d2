"""Simplicial complexes: boundary maps, integer homology and 1-cohomology bases."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology import builders
from topology.complex import (
    CellComplex,
    barycentric_subdivision,
    boundary_matrix,
    cocycle_basis,
    cycle_basis,
    homology,
    is_full_subcomplex,
    is_rational_homology_sphere,
    relabel,
)
from topology.errors import DegreeError, DimensionError, ParseError

DATA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data", "s2_two_points")


# ============================================================
# Homology
# ============================================================

@pytest.mark.parametrize("build, betti", [
    (builders.tetrahedron_boundary, [1, 0, 1]),
    (builders.torus7, [1, 2, 1]),
    (builders.icosahedron, [1, 0, 1]),
    (builders.boundary_4simplex, [1, 0, 0, 1]),
    (builders.s2_times_s1, [1, 1, 1, 1]),
])
def test_betti_numbers(build, betti):
    assert homology(build()).betti == betti


def test_boundary_of_boundary_vanishes():
    complex = builders.boundary_4simplex()
    for k in (2, 3):
        product = boundary_matrix(complex, k - 1) @ boundary_matrix(complex, k)
        assert abs(product).sum() == 0


def test_boundary_degree_out_of_range():
    with pytest.raises(DegreeError):
        boundary_matrix(builders.torus7(), 3)
    with pytest.raises(DegreeError):
        boundary_matrix(builders.torus7(), 0)


def test_rational_homology_sphere():
    assert is_rational_homology_sphere(builders.boundary_4simplex())
    assert not is_rational_homology_sphere(builders.s2_times_s1())
    with pytest.raises(DimensionError):
        is_rational_homology_sphere(builders.torus7())


def test_lens_space_has_two_torsion():
    space = builders.lens_space_21()
    summary = homology(space)
    assert summary.betti == [1, 0, 0, 1]
    assert summary.torsion[1] == [2]
    assert is_rational_homology_sphere(space)


@pytest.mark.parametrize("build", [
    builders.torus7, builders.icosahedron, builders.boundary_4simplex, builders.s2_times_s1,
    builders.lens_space_21,
])
def test_euler_characteristic_is_the_alternating_betti_sum(build):
    complex = build()
    betti = homology(complex).betti
    assert complex.euler_characteristic() == sum((-1) ** k * b for k, b in enumerate(betti))


@pytest.mark.parametrize("build", [builders.torus7, builders.s2_times_s1, builders.lens_space_21])
def test_homology_survives_relabeling(build):
    complex = build()
    perm = np.random.default_rng(3).permutation(complex.n_vertices)
    again = relabel(complex, perm)
    assert again.n_vertices == complex.n_vertices
    assert len(again.cells(complex.dimension)) == len(complex.cells(complex.dimension))
    assert homology(again).betti == homology(complex).betti
    assert homology(again).torsion == homology(complex).torsion


def test_capped_cylinder_is_a_sphere():
    sphere = builders.capped_cylinder(builders.tetrahedron_boundary(), 2)
    assert sphere.euler_characteristic() == 0
    assert homology(sphere).betti == [1, 0, 0, 1]


# ============================================================
# Cohomology bases
# ============================================================

def test_cocycles_are_closed_and_dual_to_cycles():
    torus = builders.torus7()
    cocycles = cocycle_basis(torus)
    cycles = cycle_basis(torus)
    assert len(cocycles) == len(cycles) == 2
    d1 = boundary_matrix(torus, 2)
    for c in cocycles:
        assert np.all(d1.T @ c.values == 0)
    pairing = np.array([[int(np.dot(z.values, c.values)) for z in cycles] for c in cocycles])
    assert np.array_equal(pairing, np.eye(2, dtype=int))


def test_cycles_are_closed():
    d0 = boundary_matrix(builders.torus7(), 1)
    for z in cycle_basis(builders.torus7()):
        assert np.all(d0 @ z.values == 0)


def test_sphere_has_no_cocycles():
    assert cocycle_basis(builders.tetrahedron_boundary()) == []


def test_single_cocycle_on_s2_times_s1():
    complex = builders.s2_times_s1()
    cocycles, cycles = cocycle_basis(complex), cycle_basis(complex)
    assert len(cocycles) == len(cycles) == 1
    assert np.all(boundary_matrix(complex, 2).T @ cocycles[0].values == 0)
    assert int(np.dot(cycles[0].values, cocycles[0].values)) == 1


# ============================================================
# Subdivision and subcomplexes
# ============================================================

def test_subdivision_keeps_euler_characteristic():
    torus = builders.torus7()
    sub, bary = barycentric_subdivision(torus)
    assert sub.euler_characteristic() == torus.euler_characteristic()
    assert sub.n_cells(2) == 6 * torus.n_cells(2)
    assert bary[(3,)] == 3


def test_full_subcomplex():
    sphere = builders.tetrahedron_boundary()
    assert is_full_subcomplex(sphere, [0, 1], [(0, 1)])
    assert not is_full_subcomplex(sphere, [0, 1], [])


# ============================================================
# JSON input
# ============================================================

def test_complex_from_json_file():
    complex = CellComplex.from_json(os.path.join(DATA, "complex.json"))
    assert complex.dimension == 2
    assert complex.n_vertices == 6
    assert homology(complex).betti == [1, 0, 1]


def test_complex_round_trip_keeps_orientation():
    torus = builders.torus7()
    again = CellComplex.from_json(torus.to_json())
    assert again.oriented_top_cells() == torus.oriented_top_cells()


def test_malformed_complex_json():
    with pytest.raises(ParseError):
        CellComplex.from_json(os.path.join(DATA, "malformed.json"))
    with pytest.raises(ParseError):
        CellComplex.from_json({"dimension": 2})


def test_sphere_boundary_matrix_rank():
    d2 = boundary_matrix(builders.tetrahedron_boundary(), 2)
    assert d2.shape == (6, 4)
    assert np.linalg.matrix_rank(d2.toarray()) == 3
