"""Discrete Morse matchings on cobordisms."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology import builders
from topology.errors import InputError, MorseObstruction
from z2forms.morse import boundary_facets, check_acyclic, check_cobordism, discrete_morse_cobordism


def product_cobordism():
    """S^2 x [0, 1] inside the capped cylinder: layer 0 is L1, layer 1 is L2."""
    sphere = builders.capped_cylinder(builders.tetrahedron_boundary(), 1)
    top = [t for t in sphere.tets if max(t) < 8]
    return sphere, top, [0, 1, 2, 3], [4, 5, 6, 7]


def one_handle_cobordism(k=4):
    """Solid torus D x C_k minus the open star of an interior vertex, inside S^2 x S^1.

    L1 is the link of the removed vertex and L2 the boundary torus, so W is
    S^2 x I with a single 1-handle attached.
    """
    surface = builders.icosahedron()
    ring = {v for t in surface.triangles if 0 in t for v in t} - {0}
    disk = [t for t in surface.triangles if set(t) & (ring | {0})]
    rim = {v for t in disk for v in t} - ring - {0}
    space = builders.surface_times_circle(surface, k)
    ns = surface.n_vertices
    inside = {layer * ns + v for layer in range(k) for v in {v for t in disk for v in t}}
    solid = [t for t in space.tets if set(t) <= inside]
    star = [t for t in solid if 0 in t]
    top = [t for t in solid if 0 not in t]
    low = sorted({v for t in star for v in t} - {0})
    high = sorted(layer * ns + v for layer in range(k) for v in rim)
    return space, top, low, high


def test_product_boundary():
    _, top, low, high = product_cobordism()
    facets = boundary_facets(top)
    assert len(facets) == 8
    assert all(set(f) <= set(low) or set(f) <= set(high) for f in facets)
    assert check_cobordism(top, low, high) == facets


def test_product_has_no_extreme_critical_cells():
    sphere, top, low, high = product_cobordism()
    morse = discrete_morse_cobordism(sphere, top, low, high)
    counts = morse.indices()
    assert counts[0] == counts[3] == 0
    assert morse.critical == []
    assert check_acyclic(morse)
    assert morse.values[0] == 1.0 and morse.values[7] == 2.0


def test_reversed_function_keeps_a_minimum():
    sphere, top, low, high = product_cobordism()
    values = np.zeros(sphere.n_vertices)
    values[low] = 2.0
    values[high] = 1.0
    with pytest.raises(MorseObstruction) as info:
        discrete_morse_cobordism(sphere, top, low, high, values=values, passes=0)
    assert "index 0" in str(info.value)


def test_cobordism_validation():
    _, top, low, high = product_cobordism()
    with pytest.raises(InputError):
        check_cobordism([(0, 1, 2, 3), (4, 5, 6, 7)], [0, 1, 2, 3], [4, 5, 6, 7])
    with pytest.raises(InputError):
        check_cobordism(top, low, high + [3])
    with pytest.raises(InputError):
        check_cobordism(top, [0, 1], [2, 3] + high)
    with pytest.raises(InputError):
        check_cobordism([], low, high)


def test_one_handle_leaves_a_single_index_one_cell():
    space, top, low, high = one_handle_cobordism()
    morse = discrete_morse_cobordism(space, top, low, high)
    assert morse.indices() == [0, 1, 0, 0]
    assert len(morse.critical) == 1
    assert len(morse.critical[0][0]) == 2
    assert check_acyclic(morse)
