"""Local model of a Z/2 harmonic function near the branch locus.

Near Z a two-valued potential looks like Re(A zeta^1/2 + B zeta^3/2) plus
a tail of order r^5/2, where zeta is a complex normal coordinate and the
sign of the square root is the sheet.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from topology.complex import CellComplex
from topology.cover import MonodromyCocycle, SingularLocus, TwoValuedForm, complement_edge_mask
from topology.errors import DegenerateSamples, InputError, MonodromyError
from z2forms.hodge import corner_angles, edge_lengths

logger = logging.getLogger(__name__)

NONDEGENERATE = "NONDEGENERATE"
DEGENERATE_A = "DEGENERATE_A"
VANISHING_B = "VANISHING_B"

# spoke points sampled per link vertex, as fractions of the edge length
RING_FRACTIONS = (1.0, 0.5)


@dataclass
class SampleSet:
    zeta: np.ndarray
    station: np.ndarray
    sheet: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=complex)
        self.station = np.asarray(self.station, dtype=float)
        self.sheet = np.asarray(self.sheet, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)

    def stations(self):
        return np.unique(self.station)

    def subset(self, station):
        mask = self.station == station
        return SampleSet(self.zeta[mask], self.station[mask], self.sheet[mask], self.values[mask])

    def antisymmetry_defect(self):
        """Largest |f(zeta, +) + f(zeta, -)| over points sampled on both sheets."""
        plus = {}
        for z, t, s, f in zip(self.zeta, self.station, self.sheet, self.values):
            if s > 0:
                plus[(z, t)] = f
        defect = 0.0
        for z, t, s, f in zip(self.zeta, self.station, self.sheet, self.values):
            if s < 0 and (z, t) in plus:
                defect = max(defect, abs(plus[(z, t)] + f))
        return defect


@dataclass
class LeadingCoefficients:
    component: str
    stations: np.ndarray
    A: np.ndarray
    B: np.ndarray
    fit_residual: float
    notes: str = ""

    @property
    def max_abs_a(self):
        return float(np.abs(self.A).max())

    @property
    def min_abs_b(self):
        return float(np.abs(self.B).min())

    def to_json(self):
        return {
            "component": self.component,
            "stations": [float(t) for t in self.stations],
            "A": [[float(a.real), float(a.imag)] for a in self.A],
            "B": [[float(b.real), float(b.imag)] for b in self.B],
            "fit_residual": float(self.fit_residual),
            "notes": self.notes,
        }


@dataclass
class ComponentVerdict:
    component: str
    verdict: str
    station: Optional[float] = None
    max_abs_a: float = 0.0
    min_abs_b: float = 0.0

    def to_json(self):
        return {
            "component": self.component,
            "verdict": self.verdict,
            "station": self.station,
            "max_abs_a": self.max_abs_a,
            "min_abs_b": self.min_abs_b,
        }


def flat_model(A, B, zeta, tail=0.0):
    """Re(A zeta^1/2 + B zeta^3/2 + tail zeta^5/2) on the principal branch."""
    zeta = np.asarray(zeta, dtype=complex)
    root = np.sqrt(zeta)
    return (A * root + B * zeta * root + tail * zeta * zeta * root).real


def sample_flat_model(A, B, grid, station=0.0, tail=0.0):
    grid = np.asarray(grid, dtype=complex).reshape(-1)
    n = len(grid)
    value = flat_model(A, B, grid, tail)
    return SampleSet(
        zeta=np.concatenate([grid, grid]),
        station=np.full(2 * n, station, dtype=float),
        sheet=np.concatenate([np.ones(n, dtype=np.int64), -np.ones(n, dtype=np.int64)]),
        values=np.concatenate([value, -value]),
    )


def design_matrix(zeta, sheet):
    root = np.sqrt(np.asarray(zeta, dtype=complex))
    three = zeta * root
    sheet = np.asarray(sheet, dtype=float)
    return sheet[:, None] * np.stack([root.real, -root.imag, three.real, -three.imag], axis=1)


def fit_leading_coefficients(samples, component="S1"):
    stations = samples.stations()
    if len(stations) == 0:
        raise DegenerateSamples("[error] No samples to fit")
    A, B = [], []
    misfit = []
    for t in stations:
        part = samples.subset(t)
        nonzero = np.abs(part.zeta) > 0
        radii = np.unique(np.round(np.abs(part.zeta[nonzero]), 12))
        angles = np.unique(np.round(np.angle(part.zeta[nonzero]), 12))
        if len(part) < 4 or len(radii) < 2 or len(angles) < 3:
            raise DegenerateSamples(
                f"[error] Station {t:g}: {len(part)} samples on {len(radii)} radii and {len(angles)} angles")
        X = design_matrix(part.zeta, part.sheet)
        if np.linalg.matrix_rank(X) < 4:
            raise DegenerateSamples(f"[error] Rank-deficient design matrix at station {t:g}")
        coef, _, _, _ = np.linalg.lstsq(X, part.values, rcond=None)
        A.append(complex(coef[0], coef[1]))
        B.append(complex(coef[2], coef[3]))
        misfit.append(part.values - X @ coef)
    misfit = np.concatenate(misfit)
    return LeadingCoefficients(
        component=component,
        stations=stations,
        A=np.array(A),
        B=np.array(B),
        fit_residual=float(np.sqrt(np.mean(misfit ** 2))),
    )


def default_tolerances(scale, tol_a_factor=1e-3, tol_b_factor=1e-2):
    return tol_a_factor * scale, tol_b_factor * scale


def nondegeneracy_test(coeffs, tol_a, tol_b):
    verdicts = []
    for c in coeffs:
        abs_a, abs_b = np.abs(c.A), np.abs(c.B)
        verdict = ComponentVerdict(c.component, NONDEGENERATE,
                                   max_abs_a=float(abs_a.max()), min_abs_b=float(abs_b.min()))
        if abs_a.max() > tol_a:
            verdict.verdict = DEGENERATE_A
            verdict.station = float(c.stations[int(np.argmax(abs_a))])
        elif abs_b.min() < tol_b:
            verdict.verdict = VANISHING_B
            verdict.station = float(c.stations[int(np.argmin(abs_b))])
        verdicts.append(verdict)
    return verdicts


def coefficient_table(coeffs, verdicts=None):
    by_component = {v.component: v.verdict for v in verdicts or []}
    header = f"{'component':<10} {'station':>8} {'|A|':>12} {'|B|':>12} {'arg B':>8} {'residual':>12}  verdict"
    lines = [header, "-" * len(header)]
    for c in coeffs:
        for t, a, b in zip(c.stations, c.A, c.B):
            lines.append(f"{c.component:<10} {t:>8g} {abs(a):>12.4e} {abs(b):>12.4e} "
                         f"{np.angle(b):>8.3f} {c.fit_residual:>12.4e}  {by_component.get(c.component, '')}")
    return "\n".join(lines)


def _link_walk(complex, z):
    """Link vertices of a surface vertex in cyclic order, with the triangle between consecutive ones."""
    nbrs = {}
    for t in complex.triangles:
        if z in t:
            a, b = [v for v in t if v != z]
            nbrs.setdefault(a, []).append((b, t))
            nbrs.setdefault(b, []).append((a, t))
    start = min(nbrs)
    walk, wedges = [start], []
    prev, cur = None, start
    while True:
        options = sorted(nbrs[cur])
        nxt, tri = options[0] if options[0][0] != prev else options[1]
        wedges.append(tri)
        if nxt == start:
            break
        if len(wedges) > len(nbrs):
            raise InputError(f"[error] Link of vertex {z} is not a single cycle")
        walk.append(nxt)
        prev, cur = cur, nxt
    if len(walk) != len(nbrs):
        raise InputError(f"[error] Link of vertex {z} is not a single cycle")
    return walk, wedges


def sample_component_stations(form, cover, radius=None):
    """Samples of the cover potential near every branch vertex of a surface.

    zeta = r exp(i phi) with r the edge length to the link vertex and phi the
    accumulated corner angle rescaled so that one turn around the base is 2 pi.
    Each spoke is sampled twice, at its link vertex and at its midpoint, where
    the piecewise linear potential takes half the edge value. Returns
    {component label: SampleSet} and the magnitude scale, the median of |v|
    on the sampled edges.
    """
    if cover.base.dimension != 2:
        raise InputError("[error] Coefficient stations are sampled on surfaces only")
    complex = cover.complex
    lifted = form.lift(cover) if isinstance(form, TwoValuedForm) else np.asarray(form, dtype=float)
    lengths = edge_lengths(complex)
    angles = corner_angles(complex, lengths)
    out, magnitudes = {}, []
    for label, verts in zip(cover.locus.labels, cover.cover_locus_components()):
        zeta, station, sheet, values = [], [], [], []
        for z in verts:
            walk, wedges = _link_walk(complex, z)
            turn = np.cumsum([0.0] + [angles[(t, z)] for t in wedges[:-1]])
            total = sum(angles[(t, z)] for t in wedges)
            for u, phi in zip(walk, 4.0 * np.pi * turn / total):
                e = complex.index(1, (z, u))
                r = lengths[e] if radius is None else radius * lengths[e] / lengths.max()
                f = lifted[e] if z < u else -lifted[e]
                magnitudes.append(abs(lifted[e]) / lengths[e])
                for frac in RING_FRACTIONS:
                    w = frac * r * np.exp(1j * phi)
                    branch = np.sqrt(frac * r) * np.exp(0.5j * phi)
                    zeta.append(w)
                    station.append(float(cover.vertex_projection[z]))
                    sheet.append(1 if (np.conj(np.sqrt(w)) * branch).real > 0 else -1)
                    values.append(frac * f)
        out[label] = SampleSet(zeta, station, sheet, values)
    scale = float(np.median(magnitudes)) if magnitudes else 1.0
    return out, scale


@dataclass
class TranslationSurface:
    """Triangles with a planar chart each; charts agree up to translation.

    With `involution` set, the surface is divided by a vertex involution
    acting as z -> -z + c in the charts, giving a half-translation surface.
    """
    triangles: List[tuple]
    charts: List[tuple]
    involution: Optional[np.ndarray] = None
    name: str = ""
    extras: dict = field(default_factory=dict)


def pillowcase_surface(n):
    """Unit-square torus on an n x n grid with the involution z -> -z."""
    if n < 4 or n % 2:
        raise InputError("[error] The pillowcase needs an even grid size n >= 4")

    def vid(i, j):
        return i % n + n * (j % n)

    triangles, charts = [], []
    for i in range(n):
        for j in range(n):
            for corners in (((i, j), (i + 1, j), (i + 1, j + 1)), ((i, j), (i + 1, j + 1), (i, j + 1))):
                triangles.append(tuple(vid(a, b) for a, b in corners))
                charts.append(tuple(complex(a, b) / n for a, b in corners))
    involution = np.array([vid(-(v % n), -(v // n)) for v in range(n * n)], dtype=np.int64)
    return TranslationSurface(triangles, charts, involution, name=f"pillowcase_{n}")


def octagon_surface():
    """Regular octagon with opposite sides glued: genus 2, all corners one point.

    Each side is cut in three; the corner is vertex 0, the side points are
    1..8, an inner ring at half size 9..32 and the center 33.
    """
    corners = [np.exp(1j * (np.pi / 8 + np.pi * k / 4)) for k in range(8)]
    boundary, ids = [], []
    for k in range(8):
        p, q = corners[k], corners[(k + 1) % 8]
        boundary += [p, p + (q - p) / 3.0, p + 2.0 * (q - p) / 3.0]
        # the second cut point of side k is the first one of side k + 4
        ids += [0, 1 + k, 1 + (k + 4) % 8]
    triangles, charts = [], []
    for m in range(24):
        m1 = (m + 1) % 24
        inner, inner1 = boundary[m] / 2.0, boundary[m1] / 2.0
        triangles += [(33, 9 + m, 9 + m1), (9 + m, 9 + m1, ids[m1]), (9 + m, ids[m1], ids[m])]
        charts += [(0j, inner, inner1), (inner, inner1, boundary[m1]), (inner, boundary[m1], boundary[m])]
    return TranslationSurface(triangles, charts, name="octagon")


def _register_edge(table, edge, value, length, cocycle):
    if edge in table:
        v0, l0, c0 = table[edge]
        if abs(v0 - value) > 1e-9 or abs(l0 - length) > 1e-9 or c0 != cocycle:
            raise MonodromyError(f"[error] Inconsistent sheet assignment along edge {edge}")
    else:
        table[edge] = (value, length, cocycle)


def cone_angles(complex):
    total = np.zeros(complex.n_vertices)
    for (t, v), angle in corner_angles(complex).items():
        total[v] += angle
    return total


def singularity_orders(complex):
    """Order of q = (dz)^2 at each vertex from its cone angle (k + 2) pi; -1 is a simple pole."""
    return np.rint(cone_angles(complex) / np.pi).astype(np.int64) - 2


def quadratic_differential_form(surface):
    """Triangulated base, branch locus and Re sqrt(q) for q = (dz)^2 on `surface`."""
    triangles, charts = surface.triangles, surface.charts
    if surface.involution is None:
        base_of = {v: v for t in triangles for v in t}
        sheet_of = {v: 0 for v in base_of}
        fixed = set()
    else:
        inv = surface.involution
        verts = sorted({v for t in triangles for v in t})
        reps = sorted({min(v, int(inv[v])) for v in verts})
        rank = {r: i for i, r in enumerate(reps)}
        base_of = {v: rank[min(v, int(inv[v]))] for v in verts}
        sheet_of = {v: 0 if v <= inv[v] else 1 for v in verts}
        fixed = {base_of[v] for v in verts if inv[v] == v}

    table, tops = {}, {}
    for tri, chart in zip(triangles, charts):
        key = tuple(sorted(base_of[v] for v in tri))
        if len(set(key)) < 3:
            raise InputError(f"[error] Triangle {tri} degenerates in the quotient")
        tops.setdefault(key, tri)
        pos = dict(zip(tri, chart))
        for u, w in ((tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])):
            a, b = base_of[u], base_of[w]
            if a > b:
                u, w, a, b = w, u, b, a
            delta = pos[w] - pos[u]
            first = u if a not in fixed else w
            sign = -1.0 if sheet_of[first] else 1.0
            c = 0 if a in fixed or b in fixed else sheet_of[u] ^ sheet_of[w]
            _register_edge(table, (a, b), sign * delta.real, abs(delta), c)

    complex = CellComplex(2, sorted(tops))
    complex.lengths = np.array([table[e][1] for e in complex.edges])
    values = np.array([table[e][0] for e in complex.edges])
    cocycle = np.array([table[e][2] for e in complex.edges], dtype=np.int8)

    orders = singularity_orders(complex)
    if surface.involution is None:
        zset = sorted(int(v) for v in np.flatnonzero(orders > 0))
    else:
        zset = sorted(fixed)
    locus = SingularLocus(complex, [[(z,)] for z in zset])
    if surface.involution is not None:
        MonodromyCocycle(cocycle, complement_edge_mask(complex, locus)).check(complex, locus)
    logger.info("%s: %d vertices, Z = %s, q orders %s", surface.name or "surface", complex.n_vertices,
                zset, [int(orders[z]) for z in zset])
    return complex, locus, TwoValuedForm(values, cocycle)
