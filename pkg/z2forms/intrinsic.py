"""Intrinsic harmonicity: positive digraphs, feasibility of harmonic weights, pruning.

A closed cochain is harmonic for some positive metric exactly when every
edge it is positive on lies on a positive loop. The positive digraph
carries an arc a -> b for each edge with v(a -> b) above the threshold, and
the check reduces to strongly connected components.
"""
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from topology.complex import CellComplex, homology
from topology.cover import (
    MonodromyCocycle,
    SingularLocus,
    TwoValuedForm,
    build_branched_cover,
    complement_edge_mask,
)
from topology.errors import InputError, NeedsPerturbation, PruneFailed
from z2forms.hodge import MetricWeights, check_closed, dirichlet_extension
from z2forms.leafspace import (
    _cochain_values,
    check_tree,
    detect_zeros,
    integrate_rational_class,
    leaf_graph,
)
from z2forms.morse import CANCEL_PASSES, discrete_morse_cobordism

logger = logging.getLogger(__name__)

ARC_FACTOR = 1e-9
KAPPA = 1e6
MAX_WITNESSES = 8


def arc_threshold(values, factor=ARC_FACTOR):
    magnitude = np.abs(np.asarray(values, dtype=float))
    nonzero = magnitude[magnitude > 0]
    return factor * float(np.median(nonzero)) if len(nonzero) else 0.0


class PositiveDigraph(object):
    """Arcs a -> b of the edges a cochain is positive on."""

    def __init__(self, n_vertices, edges, values, threshold=None):
        values = np.asarray(values, dtype=float)
        self.threshold = arc_threshold(values) if threshold is None else threshold
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(range(n_vertices))
        for (a, b), x in zip(edges, values):
            if x > self.threshold:
                self.graph.add_edge(a, b)
            elif x < -self.threshold:
                self.graph.add_edge(b, a)

    @classmethod
    def of(cls, complex, cochain, threshold=None):
        return cls(complex.n_vertices, complex.edges, _cochain_values(cochain), threshold)

    @property
    def arcs(self):
        return sorted(self.graph.edges)


def positive_digraph(complex, cochain, threshold=None):
    return PositiveDigraph.of(complex, cochain, threshold).graph


@dataclass
class TransitivityReport:
    transitive: bool
    scc_count: int
    arcs: int
    witness_cycles: List[List[int]] = field(default_factory=list)
    failing_arc: Optional[tuple] = None

    def to_json(self):
        return {
            "transitive": self.transitive,
            "scc_count": self.scc_count,
            "arcs": self.arcs,
            "witness_cycles": [list(c) for c in self.witness_cycles],
            "failing_arc": list(self.failing_arc) if self.failing_arc else None,
        }


def digraph_transitivity(graph, max_witnesses=MAX_WITNESSES):
    """Every arc of `graph` lies on a directed cycle."""
    component = {}
    sccs = [c for c in nx.strongly_connected_components(graph) if len(c) > 1]
    for i, scc in enumerate(sccs):
        for v in scc:
            component[v] = i
    failing, witnesses = None, []
    for a, b in sorted(graph.edges):
        if component.get(a) is None or component.get(a) != component.get(b):
            failing = (a, b)
            break
        if len(witnesses) < max_witnesses:
            witnesses.append([a] + nx.shortest_path(graph, b, a))
    return TransitivityReport(transitive=failing is None, scc_count=len(sccs),
                              arcs=graph.number_of_edges(), witness_cycles=witnesses,
                              failing_arc=failing)


def brute_force_transitive(graph):
    """Reference check through explicit cycle enumeration; small graphs only."""
    on_cycle = set()
    for cycle in nx.simple_cycles(graph):
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            on_cycle.add((a, b))
    return all(arc in on_cycle for arc in graph.edges)


def transitivity_check(complex, cochain, threshold=None):
    if isinstance(complex, CellComplex):
        check_closed(complex, cochain)
    digraph = PositiveDigraph.of(complex, cochain, threshold)
    report = digraph_transitivity(digraph.graph)
    logger.info("transitivity: %s, %d arcs in %d strong components",
                report.transitive, report.arcs, report.scc_count)
    return report


@dataclass
class InfeasibleWeights:
    """No admissible weights; `cut` is a vertex set all positive flux enters."""
    status: str
    cut: List[int] = field(default_factory=list)
    arcs: List[tuple] = field(default_factory=list)

    def to_json(self):
        return {"status": self.status, "cut": list(self.cut), "arcs": [list(a) for a in self.arcs]}


def flux_certificate(graph, failing_arc):
    """Vertices reachable from the head of an arc on no cycle; every crossing arc points in."""
    a, b = failing_arc
    cut = nx.descendants(graph, b) | {b}
    crossing = sorted((p, q) for p, q in graph.edges if (p in cut) != (q in cut))
    return sorted(cut), crossing


def positive_loop(cover, cochain, low, high, threshold=None):
    """Closed positive loop crossing W on both sheets.

    Runs from the sheet-0 lift of an L1 vertex up to L2, over to the other
    sheet around the far collar, back down to L1 and over again around the
    near collar. Returns cover vertices with the start repeated at the end.
    """
    graph = PositiveDigraph.of(cover.complex, cochain, threshold).graph
    tau = cover.vertex_involution

    def lift0(v):
        return int(np.flatnonzero((cover.vertex_projection == v) & (cover.vertex_sheet == 0))[0])

    start = lift0(min(low))
    targets = {lift0(v) for v in high}
    try:
        reach = nx.shortest_path(graph, start)
        top = min((t for t in targets if t in reach), key=lambda t: (len(reach[t]), t))
        legs = [reach[top],
                nx.shortest_path(graph, top, int(tau[top])),
                nx.shortest_path(graph, int(tau[top]), int(tau[start])),
                nx.shortest_path(graph, int(tau[start]), start)]
    except (ValueError, nx.NetworkXNoPath):
        raise PruneFailed("[error] No positive loop runs through both collars")
    loop = list(legs[0])
    for leg in legs[1:]:
        loop += leg[1:]
    return loop


def find_harmonic_weights(cover, cochain, kappa=KAPPA, zeros=None, threshold=None):
    """Tau-invariant edge weights in [1/kappa, kappa] making `cochain` co-closed.

    Solved as a linear program maximizing the smallest weight. Balance is
    imposed at every vertex off the zero set.
    """
    complex = cover.complex
    v = _cochain_values(cochain)
    check_closed(complex, v)
    skip = set() if zeros is None else zeros.cover_vertices(cover)

    orbit = {}
    for e in range(complex.n_cells(1)):
        rep = min(e, int(cover.involution[1][e]))
        orbit.setdefault(rep, len(orbit))
    var = np.array([orbit[min(e, int(cover.involution[1][e]))] for e in range(complex.n_cells(1))])
    n = len(orbit)
    rows, cols, vals = [], [], []
    balance = [x for x in complex.vertices if x not in skip]
    slot = {x: i for i, x in enumerate(balance)}
    for e, (a, b) in enumerate(complex.edges):
        if v[e] == 0:
            continue
        for x, s in ((a, 1.0), (b, -1.0)):
            if x in slot:
                rows.append(slot[x])
                cols.append(var[e])
                vals.append(s * v[e])
    A_eq = sparse.csr_matrix((vals, (rows, cols)), shape=(len(balance), n + 1))
    # w_e - t >= 0
    A_ub = sparse.hstack([-sparse.identity(n), np.ones((n, 1))]).tocsr()
    bounds = [(1.0 / kappa, kappa)] * n + [(0.0, kappa)]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    result = linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=np.zeros(len(balance)),
                     bounds=bounds, method="highs")
    if result.status != 0:
        digraph = PositiveDigraph.of(complex, v, threshold)
        report = digraph_transitivity(digraph.graph)
        logger.warning("harmonic weights: linear program status %d (%s)", result.status, result.message)
        if report.failing_arc is None:
            return InfeasibleWeights(status="INFEASIBLE")
        cut, arcs = flux_certificate(digraph.graph, report.failing_arc)
        return InfeasibleWeights(status="INFEASIBLE", cut=cut, arcs=arcs)

    w = np.asarray(result.x[:n])[var]
    weights = MetricWeights(edge_weights=w, vertex_weights=np.ones(complex.n_vertices),
                            kind="harmonic-feasible", complex=complex)
    logger.info("harmonic weights: margin %.6g, range [%.3g, %.3g]", result.x[-1], w.min(), w.max())
    return weights


def _label_key(label):
    return int(label[1:]) if label[1:].isdigit() else label


def select_boundary_pair(graph, pair=None):
    """Two boundary vertices each carrying exactly one locus component and no zero."""
    if not check_tree(graph):
        raise InputError("[error] The leaf graph is not a tree")
    eligible = {}
    for node in graph.boundary_vertices:
        payload = graph.payload(node)
        if len(payload["z"]) == 1 and not payload["zeros"]:
            eligible[payload["z"][0]] = node
    if pair is not None:
        missing = [label for label in pair if label not in eligible]
        if len(pair) != 2 or pair[0] == pair[1] or missing:
            raise NeedsPerturbation(f"[error] Requested pair {list(pair)} is not a pair of clean boundary components")
        return tuple(pair)
    labels = sorted(eligible, key=_label_key)
    if len(labels) < 2:
        raise NeedsPerturbation(
            f"[error] Only {len(labels)} boundary vertices carry a single locus component; perturb the form")
    return labels[0], labels[1]


@dataclass
class PruneResult:
    new_locus: SingularLocus
    new_form: TwoValuedForm
    new_cover: object
    morse_certificate: object
    leaf_graph: object
    transitivity: TransitivityReport
    b1_cover: int
    kept: tuple
    weights: object = None
    witness_loop: List[int] = field(default_factory=list)
    # base edges whose values are copied from the input form
    collar_edges: List[int] = field(default_factory=list)

    def to_json(self):
        return {
            "kept": list(self.kept),
            "new_locus": self.new_locus.to_json(),
            "form": self.new_form.to_json(),
            "morse": self.morse_certificate.to_json(),
            "leaf_graph": self.leaf_graph.to_json(),
            "transitivity": self.transitivity.to_json(),
            "b1_cover": self.b1_cover,
            "witness_loop": list(self.witness_loop),
            "weights": None if self.weights is None else
            (self.weights.to_json() if isinstance(self.weights, InfeasibleWeights) else
             {"kind": self.weights.kind, "min": float(self.weights.edge_weights.min()),
              "max": float(self.weights.edge_weights.max())}),
        }


def _collar(base, disk):
    """Closed star of a disk: its top cells and the link vertices."""
    disk = set(disk)
    tops = [t for t in base.cells(base.dimension) if disk & set(t)]
    link = sorted({v for t in tops for v in t} - disk)
    return tops, link


def _level_disk(cover, umap, component):
    """Base vertices of the level-set component through a locus component."""
    zverts = cover.cover_locus_components()[component]
    u = umap.values
    level = u[zverts[0]]
    g = nx.Graph()
    members = [x for x in cover.complex.vertices if abs(u[x] - level) <= 1e-9]
    g.add_nodes_from(members)
    g.add_edges_from(e for e in cover.complex.edges if e[0] in g and e[1] in g)
    comp = nx.node_connected_component(g, zverts[0])
    return sorted({int(cover.vertex_projection[x]) for x in comp})


def prune(cover, form, graph, pair, umap=None, kappa=KAPPA, passes=CANCEL_PASSES):
    """Drop every locus component but `pair` and rebuild the form across the cobordism.

    The two kept components keep their collars (closed stars of their level
    disks) with the old values; the region in between carries the
    differential of the harmonic function equal to 1 and 2 on the collar
    boundaries. The result must have an interval leaf graph and a
    transitive positive digraph.
    """
    base = cover.base
    if base.dimension != 3:
        raise InputError("[error] Pruning needs a 3-dimensional base")
    labels = cover.locus.labels
    if len(pair) != 2 or any(label not in labels for label in pair):
        raise InputError(f"[error] Unknown locus components in {list(pair)}")
    kept = tuple(labels.index(label) for label in pair)
    v = _cochain_values(form)
    if umap is None:
        umap = integrate_rational_class(v, cover)
    if not umap.exact:
        raise PruneFailed("[error] Pruning needs an exact class with vertex-level disks")
    potential = umap.values
    # value of the sheet-0 lift at each base vertex
    lift0 = np.zeros(base.n_vertices)
    for i, x in enumerate(cover.vertex_projection):
        if cover.vertex_sheet[i] <= 0:
            lift0[x] = potential[i]

    collars, links, disks = [], [], []
    for k in kept:
        disk = _level_disk(cover, umap, k)
        tops, link = _collar(base, disk)
        collars.append(tops)
        links.append(link)
        disks.append(disk)
    if set(links[0]) & set(links[1]) or set(disks[0]) & {v for t in collars[1] for v in t}:
        raise PruneFailed("[error] Collars of the kept components overlap")

    # sheet flips putting the side facing W on sheet 0
    flip = np.zeros(base.n_vertices, dtype=np.int64)
    side = []
    for i, (tops, disk) in enumerate(zip(collars, disks)):
        want = 1.0 if i == 0 else -1.0
        for x in {x for t in tops for x in t} - set(disk):
            flip[x] = int(np.sign(lift0[x]) != want)
        g = want * np.abs(np.array([lift0[x] for x in links[i]]))
        side.append(dict(zip(links[i], g)))

    in_collar = set(map(tuple, collars[0])) | set(map(tuple, collars[1]))
    w_tops = [t for t in base.cells(base.dimension) if t not in in_collar]
    lo = max(side[0].values())
    shift = lo - min(side[1].values()) + 1.0
    fixed = dict(side[0])
    fixed.update({x: shift + g for x, g in side[1].items()})
    w_edges = sorted({e for t in w_tops for e in combinations(t, 2)})
    f0 = dirichlet_extension(base.n_vertices, w_edges, fixed)
    morse = discrete_morse_cobordism(base, w_tops, links[0], links[1], values=f0, passes=passes)

    collar_edges = {e for tops in collars for t in tops for e in combinations(t, 2)}
    old_cocycle = np.asarray(cover.cocycle.values, dtype=np.int64)
    zold = cover.locus.vertices
    values = np.zeros(base.n_cells(1))
    cocycle = np.zeros(base.n_cells(1), dtype=np.int8)
    w_edge_set = set(w_edges)
    old = TwoValuedForm.descend(cover, v).values
    for e, (a, b) in enumerate(base.edges):
        if (a, b) in collar_edges:
            first = a if a not in zold else b
            values[e] = old[e] * (-1.0 if flip[first] else 1.0)
            cocycle[e] = (old_cocycle[e] ^ flip[a] ^ flip[b]) % 2
        elif (a, b) in w_edge_set:
            values[e] = f0[b] - f0[a]
    new_locus = SingularLocus(base, [cover.locus.components[k] for k in kept])
    mask = complement_edge_mask(base, new_locus)
    cocycle[~mask] = 0
    new_cocycle = MonodromyCocycle(values=cocycle, support=mask)
    new_cocycle.check(base, new_locus)
    new_form = TwoValuedForm(values, cocycle)
    new_cover = build_branched_cover(base, new_locus, new_cocycle)
    lifted = new_form.lift(new_cover)

    b1 = homology(new_cover.complex).betti[1]
    report = transitivity_check(new_cover.complex, lifted)
    zeros = detect_zeros(lifted, new_cover)
    new_umap = integrate_rational_class(lifted, new_cover)
    new_graph = leaf_graph(new_umap, new_cover, zeros)
    if not report.transitive:
        raise PruneFailed(f"[error] Pruned form is not transitive; arc {report.failing_arc} lies on no positive loop")
    loop = positive_loop(new_cover, lifted, links[0], links[1])
    report.witness_cycles.insert(0, loop)
    boundary = new_graph.boundary_vertices
    if not check_tree(new_graph) or len(boundary) != 2 or new_graph.graph.number_of_nodes() != 2:
        raise PruneFailed(
            f"[error] Pruned leaf graph is not an interval: {new_graph.graph.number_of_nodes()} vertices, "
            f"{new_graph.graph.number_of_edges()} edges")
    logger.info("prune: kept %s, b1(cover)=%d, interval of length %.6g", pair, b1, new_graph.edges[0][2])
    weights = find_harmonic_weights(new_cover, lifted, kappa=kappa, zeros=zeros)
    return PruneResult(new_locus=new_locus, new_form=new_form, new_cover=new_cover, morse_certificate=morse,
                       leaf_graph=new_graph, transitivity=report, b1_cover=b1, kept=tuple(pair), weights=weights,
                       witness_loop=loop, collar_edges=sorted(base.index(1, e) for e in collar_edges))

