"""Positive digraphs, harmonic weights and pruning of the locus."""
import os
import sys

import networkx as nx
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology import builders, registration
from topology.complex import Cochain, coboundary
from topology.cover import TwoValuedForm, antiinvariant_cohomology, build_branched_cover, meridian_cocycle
from topology.errors import InputError, NeedsPerturbation, PruneFailed
from z2forms.hodge import MetricWeights, residual
from z2forms.intrinsic import (
    InfeasibleWeights,
    brute_force_transitive,
    digraph_transitivity,
    find_harmonic_weights,
    positive_digraph,
    prune,
    select_boundary_pair,
    transitivity_check,
)
from z2forms.leafspace import LeafGraph, detect_zeros, integrate_rational_class, leaf_graph


def preset_cover(name):
    preset = registration.make(name)
    cover = build_branched_cover(preset.complex, preset.locus, meridian_cocycle(preset.complex, preset.locus))
    return preset, cover


def leaf_path(payloads):
    """Path graph whose nodes carry the given locus labels."""
    g = nx.MultiGraph()
    for i, z in enumerate(payloads):
        g.add_node(i, level=float(i), z=tuple(z), zeros=())
    for i in range(len(payloads) - 1):
        g.add_edge(i, i + 1, length=1.0)
    return LeafGraph(graph=g, mu=1)


# ============================================================
# Transitivity
# ============================================================

def test_strong_components_agree_with_cycle_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        g = nx.DiGraph()
        g.add_nodes_from(range(n))
        for _ in range(int(rng.integers(0, 11))):
            a, b = rng.choice(n, size=2, replace=False)
            g.add_edge(int(a), int(b))
        assert digraph_transitivity(g).transitive == brute_force_transitive(g)


def test_directed_cycle_is_transitive():
    g = nx.DiGraph([(0, 1), (1, 2), (2, 3), (3, 0)])
    report = digraph_transitivity(g)
    assert report.transitive
    assert report.scc_count == 1
    for cycle in report.witness_cycles:
        assert cycle[0] == cycle[-1]
        assert all(g.has_edge(a, b) for a, b in zip(cycle, cycle[1:]))


def test_gradient_is_not_transitive():
    rng = np.random.default_rng(1)
    torus = builders.torus7()
    d = coboundary(torus, Cochain(0, rng.normal(size=torus.n_vertices))).values
    assert nx.is_directed_acyclic_graph(positive_digraph(torus, d))
    report = transitivity_check(torus, d)
    assert not report.transitive
    assert report.failing_arc is not None


def test_constant_form_is_transitive():
    torus = builders.flat_torus(4)
    dx = registration.make("flat_torus", n=4).form.values
    report = transitivity_check(torus, dx)
    assert report.transitive
    assert report.witness_cycles


# ============================================================
# Harmonic weights
# ============================================================

def test_constant_form_admits_weights():
    preset, cover = preset_cover("flat_torus")
    dx = preset.form.lift(cover)
    weights = find_harmonic_weights(cover, dx)
    assert isinstance(weights, MetricWeights)
    assert weights.kind == "harmonic-feasible"
    assert weights.edge_weights.min() >= 1e-6 - 1e-12
    assert np.allclose(weights.edge_weights[cover.involution[1]], weights.edge_weights)
    assert residual(dx, weights, cover.complex) <= 1e-8 * weights.edge_weights.max()


def test_exact_form_has_a_flux_certificate():
    rng = np.random.default_rng(2)
    _, cover = preset_cover("flat_torus")
    r = rng.normal(size=cover.complex.n_vertices)
    d = coboundary(cover.complex, Cochain(0, r - r[cover.vertex_involution])).values
    weights = find_harmonic_weights(cover, d)
    assert isinstance(weights, InfeasibleWeights)
    assert weights.status == "INFEASIBLE"
    assert weights.cut
    assert all(q in weights.cut and p not in weights.cut for p, q in weights.arcs)


# ============================================================
# Boundary pairs
# ============================================================

def test_select_boundary_pair():
    graph = leaf_path([["S2"], [], ["S1"]])
    assert select_boundary_pair(graph) == ("S1", "S2")
    assert select_boundary_pair(graph, ("S2", "S1")) == ("S2", "S1")
    with pytest.raises(NeedsPerturbation):
        select_boundary_pair(graph, ("S1", "S3"))


def test_crowded_boundary_needs_perturbation():
    with pytest.raises(NeedsPerturbation):
        select_boundary_pair(leaf_path([["S1", "S2"], [], ["S3"]]))


def test_boundary_pair_needs_a_tree():
    graph = leaf_path([["S1"], [], ["S2"]])
    graph.graph.add_edge(0, 2, length=1.0)
    with pytest.raises(InputError):
        select_boundary_pair(graph)


# ============================================================
# Pruning
# ============================================================

def star_tree_inputs():
    preset, cover = preset_cover("star_tree")
    form = preset.form.lift(cover)
    umap = integrate_rational_class(form, cover)
    graph = leaf_graph(umap, cover, detect_zeros(form, cover), symbolic_tiebreak=True)
    return cover, form, umap, graph


def test_prune_star_tree_to_an_interval():
    cover, form, umap, graph = star_tree_inputs()
    pair = select_boundary_pair(graph)
    assert pair == ("S1", "S2")
    result = prune(cover, form, graph, pair, umap=umap)
    assert len(result.new_locus.components) == 2
    assert result.kept == ("S1", "S2")
    assert result.leaf_graph.graph.number_of_nodes() == 2
    assert result.leaf_graph.graph.number_of_edges() == 1
    indices = result.morse_certificate.indices()
    assert indices[0] == indices[3] == 0
    assert result.transitivity.transitive
    assert result.transitivity.witness_cycles
    assert result.b1_cover > 0
    assert result.to_json()["kept"] == ["S1", "S2"]


def test_prune_witness_loop_crosses_both_sheets():
    cover, form, umap, graph = star_tree_inputs()
    result = prune(cover, form, graph, ("S1", "S2"), umap=umap)
    loop = result.witness_loop
    new = result.new_cover
    assert loop[0] == loop[-1]
    assert result.transitivity.witness_cycles[0] == loop
    digraph = positive_digraph(new.complex, result.new_form.lift(new))
    assert all(digraph.has_edge(a, b) for a, b in zip(loop, loop[1:]))
    assert {int(new.vertex_sheet[x]) for x in loop} >= {0, 1}
    assert int(new.vertex_involution[loop[0]]) in loop


def test_prune_rejects_unknown_components():
    cover, form, umap, graph = star_tree_inputs()
    with pytest.raises(InputError):
        prune(cover, form, graph, ("S1", "S7"), umap=umap)


def test_prune_needs_an_exact_class():
    preset, cover = preset_cover("s3_unlink")
    form = antiinvariant_cohomology(cover)[0].values
    with pytest.raises(PruneFailed):
        prune(cover, form, None, ("S1", "S2"))


def test_prune_needs_a_solid_base():
    preset, cover = preset_cover("pillowcase")
    with pytest.raises(InputError):
        prune(cover, preset.form.lift(cover), None, ("S1", "S2"))


def test_prune_star_pair_keeps_an_interval():
    preset, cover = preset_cover("star_pair")
    form = preset.form.lift(cover)
    umap = integrate_rational_class(form, cover)
    graph = leaf_graph(umap, cover, detect_zeros(form, cover), symbolic_tiebreak=True)
    assert select_boundary_pair(graph) == ("S1", "S2")
    result = prune(cover, form, graph, ("S1", "S2"), umap=umap)
    assert result.leaf_graph.graph.number_of_nodes() == 2
    assert result.leaf_graph.graph.number_of_edges() == 1
    assert result.transitivity.transitive
    assert result.witness_loop[0] == result.witness_loop[-1]


def test_pruned_collars_copy_the_input_form():
    cover, form, umap, graph = star_tree_inputs()
    result = prune(cover, form, graph, ("S1", "S2"), umap=umap)
    old = TwoValuedForm.descend(cover, form).values
    new = result.new_form.values
    assert result.collar_edges
    for e in result.collar_edges:
        assert abs(new[e]) == abs(old[e])


def test_pruned_form_is_antiinvariant():
    cover, form, umap, graph = star_tree_inputs()
    result = prune(cover, form, graph, ("S1", "S2"), umap=umap)
    new = result.new_cover
    lifted = result.new_form.lift(new)
    assert np.array_equal(lifted[new.involution[1]], -lifted)


@pytest.mark.parametrize("name", ["flat_torus", "s2_two_points"])
@pytest.mark.parametrize("seed", [3, 4, 5, 6, 7])
def test_non_transitive_forms_have_no_weights(name, seed):
    rng = np.random.default_rng(seed)
    _, cover = preset_cover(name)
    r = rng.normal(size=cover.complex.n_vertices)
    d = coboundary(cover.complex, Cochain(0, r - r[cover.vertex_involution])).values
    assert not transitivity_check(cover.complex, d).transitive
    weights = find_harmonic_weights(cover, d)
    assert isinstance(weights, InfeasibleWeights)
    assert weights.status == "INFEASIBLE"
