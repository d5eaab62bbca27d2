"""Shipped presets: a base complex, its locus and, where one is known, a form."""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from topology import builders
from topology.complex import Cochain, coboundary
from topology.cover import (
    SingularLocus,
    TwoValuedForm,
    build_branched_cover,
    meridian_cocycle,
    odd_distance_potential,
)
from topology.errors import InputError
from z2forms.flatmodel import pillowcase_surface, quadratic_differential_form
from z2forms.hodge import edge_vectors


@dataclass
class Preset:
    name: str
    complex: object
    locus: SingularLocus
    form: Optional[TwoValuedForm] = None
    class_coefficients: Optional[List[float]] = None
    disks: List[List[int]] = field(default_factory=list)
    description: str = ""


def s2_two_points():
    sphere = builders.icosahedron()
    return Preset("s2_two_points", sphere, SingularLocus(sphere, [[(0,)], [(11,)]]),
                  description="2-sphere branched at two points; the cover is a sphere")


def pillowcase(n=8):
    complex, locus, form = quadratic_differential_form(pillowcase_surface(n))
    return Preset("pillowcase", complex, locus, form=form,
                  description=f"flat torus on a {n}x{n} grid divided by z -> -z; q has 4 simple poles")


def flat_torus(n=8):
    torus = builders.flat_torus(n)
    locus = SingularLocus(torus, [])
    values = edge_vectors(torus)[:, 0]
    form = TwoValuedForm(values, np.zeros(len(values), dtype=np.int8))
    return Preset("flat_torus", torus, locus, form=form,
                  description="single-valued dx on the flat torus, unbranched")


def s3_link(link="unlink"):
    build = {"unknot": builders.s3_unknot, "hopf": builders.s3_hopf_link, "unlink": builders.s3_unlink}
    if link not in build:
        raise InputError(f"[error] Unknown link {link}")
    sphere, components = build[link]()
    locus = SingularLocus(sphere, components)
    return Preset(f"s3_{link}", sphere, locus, class_coefficients=[1.0] if link == "unlink" else None,
                  description=f"subdivided cross-polytope 3-sphere branched along the {link}")


def star_tree(disks=3):
    """Unlink whose spanning disks give the odd distance function a star-shaped leaf tree."""
    sphere, components, spans = builders.star_tree_sphere(builders.STAR_TREE_DISKS[:disks])
    locus = SingularLocus(sphere, components)
    cover = build_branched_cover(sphere, locus, meridian_cocycle(sphere, locus))
    sources = sorted(v for disk in spans for v in disk)
    potential = odd_distance_potential(cover, sources)
    cochain = coboundary(cover.complex, Cochain(0, potential)).values
    form = TwoValuedForm.descend(cover, cochain)
    return Preset("star_tree" if disks == 3 else "star_pair", sphere, locus, form=form, disks=spans,
                  description=f"3-sphere with a {disks}-component unlink and the distance to its disks")


def lens_space():
    space = builders.lens_space_21()
    return Preset("lens_space_21", space, SingularLocus(space, []),
                  description="L(2,1) with an empty locus; H1 is Z/2, so no anti-invariant class exists")
