"""Branched double covers, two-valued forms and the first-Betti obstruction."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology import builders, registration
from topology.complex import homology
from topology.cover import (
    SingularLocus,
    TwoValuedForm,
    antiinvariant_cohomology,
    build_branched_cover,
    haydys_obstruction,
    meridian_cocycle,
    odd_distance_potential,
)
from topology.errors import InputError, NoLineBundle


def branched(complex, components):
    locus = SingularLocus(complex, components)
    return build_branched_cover(complex, locus, meridian_cocycle(complex, locus))


# ============================================================
# Euler characteristic of the cover
# ============================================================

@pytest.mark.parametrize("name", ["s2_two_points", "pillowcase", "s3_unknot", "s3_hopf", "s3_unlink", "star_pair"])
def test_cover_euler_characteristic(name):
    preset = registration.make(name)
    cover = branched(preset.complex, preset.locus.components)
    chi_z = len(preset.locus.vertices) - len(preset.locus.edges)
    assert cover.complex.euler_characteristic() == 2 * preset.complex.euler_characteristic() - chi_z
    assert cover.check()


def test_sphere_branched_at_two_points_is_a_sphere():
    cover = branched(builders.icosahedron(), [[(0,)], [(11,)]])
    assert cover.complex.n_vertices == 2 + 2 * 10
    assert homology(cover.complex).betti == [1, 0, 1]


def test_pillowcase_cover_is_a_torus():
    preset = registration.make("pillowcase")
    cover = branched(preset.complex, preset.locus.components)
    assert len(preset.locus.components) == 4
    assert homology(cover.complex).betti == [1, 2, 1]
    assert len(antiinvariant_cohomology(cover)) == 2


def test_deck_involution_fixes_only_the_locus():
    cover = branched(builders.icosahedron(), [[(0,)], [(11,)]])
    fixed = np.flatnonzero(cover.vertex_involution == np.arange(cover.complex.n_vertices))
    assert sorted(cover.vertex_projection[fixed].tolist()) == [0, 11]
    assert all(len(c) == 1 for c in cover.cover_locus_components())


# ============================================================
# Locus validation
# ============================================================

def test_odd_number_of_branch_points_has_no_cover():
    sphere = builders.tetrahedron_boundary()
    with pytest.raises(NoLineBundle):
        meridian_cocycle(sphere, SingularLocus(sphere, [[(0,)]]))


def test_locus_must_be_full():
    sphere = builders.boundary_4simplex()
    with pytest.raises(InputError):
        SingularLocus(sphere, [[(0, 1), (1, 2), (0, 2)]])


def test_locus_must_be_a_loop():
    sphere, components = builders.s3_unknot()
    with pytest.raises(InputError):
        SingularLocus(sphere, [components[0][:-1]])


def test_two_loops_in_one_component_are_disconnected():
    sphere, components = builders.s3_unlink()
    with pytest.raises(InputError) as info:
        SingularLocus(sphere, [components[0] + components[1]])
    assert "disconnected" in str(info.value)
    assert SingularLocus._connected(components[0])
    assert not SingularLocus._connected(components[0] + components[1])


def test_locus_components_must_be_disjoint():
    sphere = builders.tetrahedron_boundary()
    with pytest.raises(InputError):
        SingularLocus(sphere, [[(0,)], [(0,)]])


# ============================================================
# Obstruction
# ============================================================

@pytest.mark.parametrize("link, b1, passes", [
    ("hopf", 0, False),
    ("unlink", 1, True),
    ("unknot", 0, False),
])
def test_first_betti_obstruction(link, b1, passes):
    preset = registration.make("s3_" + link)
    cover = branched(preset.complex, preset.locus.components)
    report = haydys_obstruction(cover, preset.locus, base_is_rhs=True)
    assert report.b1_cover == b1
    assert report.passes is passes


def test_unknot_obstruction_names_the_single_component():
    preset = registration.make("s3_unknot")
    cover = branched(preset.complex, preset.locus.components)
    report = haydys_obstruction(cover, preset.locus, base_is_rhs=True)
    assert "single locus component" in report.notes


# ============================================================
# Two-valued forms
# ============================================================

def test_lifted_form_is_anti_invariant():
    preset = registration.make("pillowcase")
    cover = branched(preset.complex, preset.locus.components)
    lifted = preset.form.lift(cover)
    assert np.abs(lifted).max() > 0
    assert np.allclose(cover.pullback_tau(lifted), -lifted, atol=1e-12)


def test_descend_inverts_lift():
    preset = registration.make("pillowcase")
    cover = branched(preset.complex, preset.locus.components)
    lifted = preset.form.lift(cover)
    again = TwoValuedForm.descend(cover, lifted).lift(cover)
    assert np.allclose(again, lifted, atol=1e-12)


def test_odd_distance_potential():
    preset = registration.make("star_pair")
    cover = branched(preset.complex, preset.locus.components)
    sources = sorted(v for disk in preset.disks for v in disk)
    potential = odd_distance_potential(cover, sources)
    assert np.allclose(potential[cover.vertex_involution], -potential)
    zero_set = {int(cover.vertex_projection[i]) for i in np.flatnonzero(potential == 0)}
    assert zero_set == set(sources)


def test_star_tree_sphere_has_three_spanned_components():
    sphere, components, spans = builders.star_tree_sphere()
    assert len(components) == len(spans) == len(builders.STAR_TREE_DISKS) == 3
    assert all(len(comp) == 5 for comp in components)
    assert all(len(span) == 6 for span in spans)
    assert not set(spans[0]) & set(spans[1])
    locus = SingularLocus(sphere, components)
    assert len(locus.components) == 3
    pair_sphere, pair, _ = builders.star_tree_sphere(builders.STAR_TREE_DISKS[:2])
    assert len(pair) == 2


def test_hopf_cover_has_two_torsion():
    preset = registration.make("s3_hopf")
    cover = branched(preset.complex, preset.locus.components)
    assert homology(cover.complex).torsion[1] == [2]


def test_unlink_has_one_anti_invariant_class():
    preset = registration.make("s3_unlink")
    cover = branched(preset.complex, preset.locus.components)
    basis = antiinvariant_cohomology(cover)
    assert len(basis) == 1
    assert np.abs(basis[0].values + cover.pullback_tau(basis[0].values)).max() == 0
