"""Discrete Hodge theory on a branched cover.

Inner products are diagonal: edge weights on 1-cochains, vertex weights on
0-cochains. With D the coboundary on 0-cochains, W and V the weight
matrices, the codifferential is V^-1 D^T W and

    residual(v) = || V^-1/2 D^T W v ||,

so multiplying every edge weight by s multiplies the squared residual by s^2.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from scipy import sparse
from scipy.sparse import csgraph

from topology.complex import Cochain, boundary_matrix, coboundary, cycle_basis
from topology.cover import antiinvariant_cohomology, antiinvariant_project
from topology.errors import ConvergenceError, InputError, NotClosed, ParseError
from z2forms.cg import cg, sparse_numpy_to_torch

logger = logging.getLogger(__name__)

CLOSED_TOL = 1e-9


@dataclass
class MetricWeights:
    edge_weights: np.ndarray
    vertex_weights: np.ndarray
    kind: str = "uniform"
    complex: Optional[object] = field(default=None, repr=False)

    def check(self, cover=None):
        if (self.edge_weights <= 0).any() or (self.vertex_weights <= 0).any():
            raise InputError("[error] Metric weights must be positive")
        if cover is not None:
            if not np.allclose(self.edge_weights[cover.involution[1]], self.edge_weights, rtol=0, atol=1e-12):
                raise InputError("[error] Edge weights are not tau-invariant")
            if not np.allclose(self.vertex_weights[cover.vertex_involution], self.vertex_weights, rtol=0, atol=1e-12):
                raise InputError("[error] Vertex weights are not tau-invariant")
        return self

    def to_json(self):
        return {"kind": self.kind, "edges": self.edge_weights.tolist(), "vertices": self.vertex_weights.tolist()}

    @classmethod
    def from_json(cls, data, complex):
        try:
            weights = cls(np.asarray(data["edges"], dtype=float), np.asarray(data["vertices"], dtype=float),
                          data.get("kind", "file"), complex)
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"[error] Malformed weights JSON: {e}")
        if len(weights.edge_weights) != complex.n_cells(1) or len(weights.vertex_weights) != complex.n_vertices:
            raise InputError("[error] Weight counts do not match the complex")
        return weights


def edge_vectors(complex):
    coords = complex.coordinates
    a = np.array([e[0] for e in complex.edges])
    b = np.array([e[1] for e in complex.edges])
    vec = coords[b] - coords[a]
    if complex.period is not None:
        vec = vec - np.round(vec / complex.period) * complex.period
    return vec


def _cell_vectors(complex, cell):
    """Vertex positions of a cell relative to its first vertex, unwrapped on tori."""
    coords = complex.coordinates
    vec = coords[list(cell[1:])] - coords[cell[0]]
    if complex.period is not None:
        vec = vec - np.round(vec / complex.period) * complex.period
    return np.vstack([np.zeros(coords.shape[1]), vec])


def edge_lengths(complex):
    if complex.lengths is not None:
        return np.asarray(complex.lengths, dtype=float)
    if complex.coordinates is None:
        return np.ones(complex.n_cells(1))
    return np.linalg.norm(edge_vectors(complex), axis=1)


def corner_angles(complex, lengths=None):
    """Interior angle at each vertex of each triangle, from edge lengths."""
    lengths = edge_lengths(complex) if lengths is None else lengths
    angles = {}
    for t in complex.triangles:
        for i in range(3):
            j, k = t[(i + 1) % 3], t[(i + 2) % 3]
            a = lengths[complex.index(1, (t[i], j))]
            b = lengths[complex.index(1, (t[i], k))]
            c = lengths[complex.index(1, (j, k))]
            cos = np.clip((a * a + b * b - c * c) / (2.0 * a * b), -1.0, 1.0)
            angles[(t, t[i])] = float(np.arccos(cos))
    return angles


def uniform_weights(complex):
    return MetricWeights(np.ones(complex.n_cells(1)), np.ones(complex.n_vertices), "uniform", complex)


def combinatorial_weights(complex):
    degree = np.zeros(complex.n_vertices)
    for a, b in complex.edges:
        degree[a] += 1
        degree[b] += 1
    return MetricWeights(np.ones(complex.n_cells(1)), degree / 2.0, "combinatorial", complex)


def _cotan_surface(complex):
    lengths = edge_lengths(complex)
    angles = corner_angles(complex, lengths)
    w = np.zeros(complex.n_cells(1))
    mass = np.zeros(complex.n_vertices)
    for t in complex.triangles:
        a, b, c = (lengths[complex.index(1, e)] for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])))
        s = (a + b + c) / 2.0
        area = np.sqrt(max(0.0, s * (s - a) * (s - b) * (s - c)))
        for i in range(3):
            j, k = t[(i + 1) % 3], t[(i + 2) % 3]
            w[complex.index(1, (j, k))] += 0.5 / np.tan(angles[(t, t[i])])
            mass[t[i]] += area / 3.0
    return w, mass


def _circumcentric_solid(complex):
    w = np.zeros(complex.n_cells(1))
    mass = np.zeros(complex.n_vertices)
    for cell in complex.tets:
        p = _cell_vectors(complex, cell)
        vol = abs(np.linalg.det(p[1:] - p[0])) / 6.0
        for i, j in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
            k, l = [m for m in range(4) if m not in (i, j)]
            n1 = np.cross(p[k] - p[i], p[k] - p[j])
            n2 = np.cross(p[l] - p[i], p[l] - p[j])
            # dihedral angle along the opposite edge kl
            cos_t = np.dot(n1, n2) / (np.linalg.norm(n1) * np.linalg.norm(n2))
            sin_t = np.sqrt(max(0.0, 1.0 - cos_t ** 2))
            cot = cos_t / sin_t if sin_t > 0 else 0.0
            w[complex.index(1, (cell[i], cell[j]))] += np.linalg.norm(p[l] - p[k]) * cot / 6.0
        for v in cell:
            mass[v] += vol / 4.0
    return w, mass


def cotan_weights(complex):
    """Cotangent weights on surfaces, circumcentric dual weights on 3-complexes.

    Falls back to combinatorial weights when a dual volume is not positive.
    """
    if complex.dimension == 2 and (complex.lengths is not None or complex.coordinates is not None):
        w, mass = _cotan_surface(complex)
    elif complex.dimension == 3 and complex.coordinates is not None:
        w, mass = _circumcentric_solid(complex)
    else:
        logger.info("no metric data, using combinatorial weights")
        return combinatorial_weights(complex)
    w[np.abs(w) < 1e-12] = 0.0
    if (w <= 0).any() or (mass <= 0).any():
        logger.info("non-positive dual volumes, falling back to combinatorial weights")
        weights = combinatorial_weights(complex)
        weights.kind = "combinatorial (cotan fallback)"
        return weights
    return MetricWeights(w, mass, "cotan", complex)


def metric_weights(cover, kind="uniform"):
    from z2forms import weights_class
    if kind not in weights_class:
        raise Exception(f"[error] Unknown weights {kind}!")
    weights = weights_class[kind](cover.complex)
    # tau-symmetrise
    weights.edge_weights = (weights.edge_weights + weights.edge_weights[cover.involution[1]]) / 2.0
    weights.vertex_weights = (weights.vertex_weights + weights.vertex_weights[cover.vertex_involution]) / 2.0
    return weights.check(cover)


def divergence(complex, cochain, weights):
    """D^T W v: weighted flux out of every vertex, with a minus sign."""
    return boundary_matrix(complex, 1) @ (weights.edge_weights * np.asarray(cochain, dtype=float))


def residual(cochain, weights, complex=None):
    complex = complex if complex is not None else weights.complex
    div = divergence(complex, cochain, weights)
    return float(np.sqrt(np.sum(div ** 2 / weights.vertex_weights)))


def energy(cochain, weights):
    values = np.asarray(cochain, dtype=float)
    return float(np.sum(weights.edge_weights * values ** 2))


def check_closed(complex, cochain):
    values = np.asarray(cochain, dtype=float)
    if complex.dimension < 2:
        return
    d = coboundary(complex, Cochain(1, values)).values
    scale = max(1.0, float(np.abs(values).max()) if len(values) else 1.0)
    if len(d) and np.abs(d).max() > CLOSED_TOL * scale:
        raise NotClosed(f"[error] Cochain is not closed (max coboundary {np.abs(d).max():.3e})")


def periods(cochain, cycles, complex=None):
    if complex is not None:
        check_closed(complex, cochain)
    values = np.asarray(cochain, dtype=float)
    return np.array([float(np.dot(np.asarray(z, dtype=float), values)) for z in cycles])


@dataclass
class HarmonicForm:
    cochain: np.ndarray
    residual: float
    periods: np.ndarray
    class_id: str
    info: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "edges": [float(x) for x in self.cochain],
            "residual": float(self.residual),
            "periods": [float(x) for x in self.periods],
            "class_id": self.class_id,
            "weights": self.info.get("weights"),
        }


def class_cochain(cover, klass):
    """Resolve a class given as anti-invariant basis coefficients or as a cochain."""
    klass = np.asarray(klass.values if isinstance(klass, Cochain) else klass, dtype=float)
    if len(klass) == cover.complex.n_cells(1):
        return klass, "cochain"
    basis = antiinvariant_cohomology(cover)
    if len(klass) != len(basis):
        raise InputError(f"[error] {len(klass)} class coefficients for an anti-invariant basis of size {len(basis)}")
    sigma = np.zeros(cover.complex.n_cells(1))
    for c, b in zip(klass, basis):
        sigma = sigma + c * b.values
    return sigma, "coefficients:" + ",".join(f"{c:g}" for c in klass)


def harmonic_representative(cover, weights, klass, x0=None, tol=1e-10, maxiter_factor=10):
    complex = cover.complex
    sigma, class_id = class_cochain(cover, klass)
    check_closed(complex, sigma)
    if np.abs(sigma + cover.pullback_tau(sigma)).max(initial=0.0) > 1e-12 * max(1.0, np.abs(sigma).max(initial=0.0)):
        raise InputError("[error] Class representative is not anti-invariant")

    D = boundary_matrix(complex, 1).T.astype(float)
    W = sparse.diags(weights.edge_weights)
    L = (D.T @ W @ D).tocsr()
    b = -(D.T @ (weights.edge_weights * sigma))
    # the kernel is the constants on each component; drop their share of b
    _, labels = csgraph.connected_components(L, directed=False)
    b = b - (np.bincount(labels, weights=b) / np.bincount(labels))[labels]
    diag = L.diagonal()
    M = sparse.diags(np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 0.0))

    n = complex.n_vertices
    if x0 is None:
        x0 = np.zeros(n)
    x0 = (np.asarray(x0, dtype=float) - np.asarray(x0, dtype=float)[cover.vertex_involution]) / 2.0
    X, info = cg(
        sparse_numpy_to_torch(L),
        torch.as_tensor(b, dtype=torch.float64).reshape(-1, 1),
        sparse_numpy_to_torch(M),
        X0=torch.as_tensor(x0, dtype=torch.float64).reshape(-1, 1),
        tol=tol,
        maxiter=maxiter_factor * n,
        atol=1e-300,
    )
    phi = X.numpy().reshape(-1)
    phi = (phi - phi[cover.vertex_involution]) / 2.0
    v = antiinvariant_project(cover, sigma + D @ phi)
    r = residual(v, weights, complex)
    logger.debug("harmonic solve: niter=%d |R|=%.3e", info["niter"], info["|R|"])
    if not info["optimal"]:
        raise ConvergenceError(
            f"[error] CG did not converge in {info['niter']} iterations (residual {r:.3e})",
            residual=r, niter=info["niter"])
    return HarmonicForm(
        cochain=v,
        residual=r,
        periods=periods(v, cycle_basis(complex)),
        class_id=class_id,
        info={"niter": info["niter"], "weights": weights.kind},
    )


def dirichlet_extension(n_vertices, edges, fixed, edge_weights=None, tol=1e-12):
    """Weighted-harmonic extension of `fixed` ({vertex: value}) over the vertices spanned by `edges`."""
    edges = [tuple(e) for e in edges]
    verts = sorted({v for e in edges for v in e})
    free = [v for v in verts if v not in fixed]
    value = np.zeros(n_vertices)
    for v, x in fixed.items():
        value[v] = x
    if not free:
        return value
    slot = {v: i for i, v in enumerate(free)}
    w = np.ones(len(edges)) if edge_weights is None else np.asarray(edge_weights, dtype=float)
    rows, cols, vals = [], [], []
    b = np.zeros(len(free))
    for (p, q), we in zip(edges, w):
        for s, t in ((p, q), (q, p)):
            if s not in slot:
                continue
            rows.append(slot[s])
            cols.append(slot[s])
            vals.append(we)
            if t in slot:
                rows.append(slot[s])
                cols.append(slot[t])
                vals.append(-we)
            else:
                b[slot[s]] += we * value[t]
    L = sparse.csr_matrix((vals, (rows, cols)), shape=(len(free), len(free)))
    M = sparse.diags(1.0 / L.diagonal())
    X, info = cg(sparse_numpy_to_torch(L), torch.as_tensor(b, dtype=torch.float64).reshape(-1, 1),
                 sparse_numpy_to_torch(M), tol=tol, maxiter=10 * len(free) + 100)
    if not info["optimal"]:
        raise ConvergenceError(f"[error] Dirichlet solve did not converge ({info['|R|']:.3e})",
                               residual=info["|R|"], niter=info["niter"])
    value[free] = X.numpy().reshape(-1)
    return value
