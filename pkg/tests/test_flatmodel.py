"""Leading-coefficient fit near the branch locus and the shipped flat surfaces."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from topology import registration
from topology.complex import homology
from topology.cover import build_branched_cover, meridian_cocycle
from topology.errors import DegenerateSamples, NoLineBundle
from z2forms.flatmodel import (
    DEGENERATE_A,
    NONDEGENERATE,
    VANISHING_B,
    LeadingCoefficients,
    coefficient_table,
    default_tolerances,
    design_matrix,
    fit_leading_coefficients,
    nondegeneracy_test,
    octagon_surface,
    quadratic_differential_form,
    sample_component_stations,
    sample_flat_model,
    singularity_orders,
)

A0 = 0.7 - 0.4j
B0 = 1.3 + 0.25j


def polar_grid(radii=(0.05, 0.1), n_angles=8):
    phi = -np.pi + 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    return np.array([r * np.exp(1j * p) for r in radii for p in phi])


# ============================================================
# Fitting
# ============================================================

def test_noiseless_recovery():
    samples = sample_flat_model(A0, B0, polar_grid())
    fit = fit_leading_coefficients(samples)
    assert abs(fit.A[0] - A0) <= 1e-10
    assert abs(fit.B[0] - B0) <= 1e-10
    assert fit.fit_residual <= 1e-12


def test_noisy_recovery():
    rng = np.random.default_rng(11)
    grid = polar_grid()
    for _ in range(100):
        samples = sample_flat_model(A0, B0, grid)
        samples.values = samples.values + 1e-6 * rng.normal(size=len(samples))
        fit = fit_leading_coefficients(samples)
        assert abs(fit.A[0] - A0) <= 1e-3
        assert abs(fit.B[0] - B0) <= 1e-3


def test_higher_order_tail_leaves_b():
    samples = sample_flat_model(A0, B0, polar_grid(), tail=1.0)
    fit = fit_leading_coefficients(samples)
    assert abs(fit.B[0] - B0) <= 5e-3


def test_stations_are_fitted_separately():
    first = sample_flat_model(0.0, 1.0, polar_grid(), station=0.0)
    second = sample_flat_model(0.0, 2.0j, polar_grid(), station=1.0)
    merged = type(first)(
        np.concatenate([first.zeta, second.zeta]),
        np.concatenate([first.station, second.station]),
        np.concatenate([first.sheet, second.sheet]),
        np.concatenate([first.values, second.values]),
    )
    fit = fit_leading_coefficients(merged, component="S2")
    assert fit.component == "S2"
    assert np.allclose(fit.B, [1.0, 2.0j], atol=1e-10)
    assert np.allclose(fit.A, 0.0, atol=1e-10)


def test_samples_are_odd_under_sheet_swap():
    assert sample_flat_model(A0, B0, polar_grid()).antisymmetry_defect() == 0.0


def test_single_radius_is_degenerate():
    with pytest.raises(DegenerateSamples):
        fit_leading_coefficients(sample_flat_model(A0, B0, polar_grid(radii=(0.1,))))


def test_too_few_angles_is_degenerate():
    with pytest.raises(DegenerateSamples):
        fit_leading_coefficients(sample_flat_model(A0, B0, polar_grid(n_angles=2)))


# ============================================================
# Verdicts
# ============================================================

def coefficients(A, B):
    return LeadingCoefficients("S1", np.array([0.0]), np.array([A]), np.array([B]), 0.0)


@pytest.mark.parametrize("A, B, verdict", [
    (0.0, 1.0, NONDEGENERATE),
    (0.5, 1.0, DEGENERATE_A),
    (0.0, 1e-4, VANISHING_B),
])
def test_nondegeneracy_verdicts(A, B, verdict):
    tol_a, tol_b = default_tolerances(1.0)
    assert nondegeneracy_test([coefficients(A, B)], tol_a, tol_b)[0].verdict == verdict


def test_coefficient_table_lists_every_station():
    fit = fit_leading_coefficients(sample_flat_model(A0, B0, polar_grid()))
    verdicts = nondegeneracy_test([fit], *default_tolerances(1.0))
    table = coefficient_table([fit], verdicts)
    assert len(table.splitlines()) == 3
    assert DEGENERATE_A in table


# ============================================================
# Flat surfaces
# ============================================================

def test_pillowcase_corners_are_simple_poles():
    preset = registration.make("pillowcase")
    orders = singularity_orders(preset.complex)
    corners = [comp[0][0] for comp in preset.locus.components]
    assert len(corners) == 4
    assert all(orders[z] == -1 for z in corners)
    assert sum(orders) == -4


def test_pillowcase_fit_sees_the_poles():
    preset = registration.make("pillowcase")
    cover = build_branched_cover(preset.complex, preset.locus, meridian_cocycle(preset.complex, preset.locus))
    samples, scale = sample_component_stations(preset.form, cover)
    assert sorted(samples) == ["S1", "S2", "S3", "S4"]
    tol_a, tol_b = default_tolerances(scale)
    for label, part in samples.items():
        assert len(part) == 12
        assert len(np.unique(np.round(np.abs(part.zeta), 12))) >= 2
        assert np.linalg.matrix_rank(design_matrix(part.zeta, part.sheet)) == 4
        fit = fit_leading_coefficients(part, component=label)
        assert nondegeneracy_test([fit], tol_a, tol_b)[0].verdict == DEGENERATE_A


def test_octagon_is_unbranched_genus_two():
    complex, locus, form = quadratic_differential_form(octagon_surface())
    assert homology(complex).betti == [1, 4, 1]
    assert [comp[0][0] for comp in locus.components] == [0]
    assert singularity_orders(complex)[0] == 4
    assert not form.cocycle.any()
    with pytest.raises(NoLineBundle):
        meridian_cocycle(complex, locus)
