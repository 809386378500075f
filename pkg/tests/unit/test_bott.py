import math

import numpy as np
import pytest

from qrep.bott import (
    CALIBRATION_DIM,
    AlmostProjection,
    SurfacePullback,
    Z2Bott,
    bott_almost_projection,
    bott_f,
    bott_g,
    bott_h,
    calibrate_orientation,
    commutator_image,
    compare_representatives,
    k_invariant,
    push_k_class,
    representatives_agree,
    verify_index_formula,
    z2_representatives,
)
from qrep.config import DEFAULT_TOLERANCES
from qrep.errors import DefectTooLarge, DimensionMismatch, PresentationMismatch
from qrep.examples import (
    PerturbationSpec,
    genuine_representation,
    perturb,
    pullback,
    surface_pullback_images,
    voiculescu_pair,
    voiculescu_quasi_rep,
)
from qrep.matcore import Unitary, adjoint, group_commutator
from qrep.testing import parametrize_voiculescu
from qrep.words import CommutatorDatum, Presentation


def circle(samples: int = 1001) -> np.ndarray:
    return np.exp(2j * math.pi * np.linspace(0.0, 1.0, samples))


def test_circle_functions_satisfy_bott_relations():
    z = circle()
    f, g, h = bott_f(z), bott_g(z), bott_h(z)
    np.testing.assert_allclose(g * g + h * h, f - f * f, atol=1e-12)
    np.testing.assert_allclose(g * h, 0.0, atol=1e-15)
    assert np.all((f >= 0.0) & (f <= 1.0))
    assert bott_f(np.array([1.0 + 0j]))[0] == pytest.approx(1.0)
    assert bott_f(np.array([-1.0 + 0j]))[0] == pytest.approx(0.0)


def test_almost_projection_symmetrizes():
    e = AlmostProjection.from_matrix(np.array([[1.0, 1e-3], [0.0, 0.0]]), base_dim=1)
    assert np.array_equal(e.e, adjoint(e.e))
    assert e.defect < 1e-3


def test_orientation_is_calibrated_once():
    first = calibrate_orientation()
    assert first in (1, -1)
    assert calibrate_orientation() == first
    assert calibrate_orientation.cache_info().hits >= 1


def test_k_of_voiculescu_pair_matches_winding_number_of_reversed_commutator():
    u, v = voiculescu_pair(CALIBRATION_DIM)
    report = k_invariant(u, v)
    assert report.rounded == 1
    assert report.defect_data["e_defect"] < DEFAULT_TOLERANCES.bott_defect
    assert report.defect_data["gap"] >= DEFAULT_TOLERANCES.spectral_gap
    assert report.defect_data["commutator_defect"] == pytest.approx(
        2 * math.sin(math.pi / CALIBRATION_DIM)
    )


def test_k_changes_sign_with_orientation():
    u, v = voiculescu_pair(CALIBRATION_DIM)
    orientation = calibrate_orientation()
    assert k_invariant(u, v, -orientation).rounded == -k_invariant(u, v, orientation).rounded


def test_bott_defect_decreases_with_dimension():
    defects = []
    for n in (16, 32, 64):
        u, v = voiculescu_pair(n)
        defects.append(bott_almost_projection(u, v).defect)
    assert defects[0] > defects[1] > defects[2]
    assert defects[2] < 1 / 8


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_k_is_locally_constant(seed):
    # ||exp(K) - 1|| = 0.0099 gives ||K|| = 2 asin(0.00495) < 0.01
    qr = perturb(voiculescu_quasi_rep(64), PerturbationSpec(radius=0.0099, seed=seed))
    assert k_invariant(qr.images["a"], qr.images["b"]).rounded == 1


def test_k_of_commuting_pair_is_zero():
    qr = genuine_representation(12, seed=4)
    report = k_invariant(qr.images["a"], qr.images["b"])
    assert report.rounded == 0
    assert report.defect_data["e_defect"] <= 1e-8


def test_push_k_class_requires_small_defect():
    u, v = voiculescu_pair(16)
    e = bott_almost_projection(u, v)
    with pytest.raises(DefectTooLarge) as excinfo:
        push_k_class(e, DEFAULT_TOLERANCES.replace(bott_defect=1e-6))
    assert excinfo.value.limit == 1e-6


def test_bott_almost_projection_checks_pair():
    with pytest.raises(DimensionMismatch):
        bott_almost_projection(Unitary.identity(2), Unitary.identity(3))
    with pytest.raises(ValueError):
        bott_almost_projection(Unitary.identity(2), Unitary.identity(2), orientation=0)


def test_index_formula_for_z2():
    qr = voiculescu_quasi_rep(64)
    report = verify_index_formula(Z2Bott(), qr, CommutatorDatum.fundamental(qr.presentation))
    assert report.case == "z2_bott"
    assert report.class_degree == 1
    assert report.lhs_k == report.rhs_wn.rounded == report.rhs_kappa.rounded == 1
    assert report.equal
    assert report.trace_equal
    assert report.normalized_lhs == pytest.approx(1 / 64)
    assert report.rhs_surface == pytest.approx(1.0, abs=1e-6)
    document = report.to_json()
    assert document["equal"] is True
    assert document["orientation"] in ("+1", "-1")
    assert document["defects"]["relator_defect"] == pytest.approx(2 * math.sin(math.pi / 64))


def test_index_formula_for_reversed_datum():
    qr = voiculescu_quasi_rep(64)
    datum = CommutatorDatum.from_text([("b", "a")], qr.presentation)
    report = verify_index_formula(Z2Bott(), qr, datum)
    assert report.class_degree == -1
    assert report.lhs_k == report.rhs_kappa.rounded == -1
    assert report.equal


@pytest.mark.parametrize("genus, swap, expected", [(1, False, 1), (2, False, 1), (3, True, -1)])
def test_index_formula_for_surface_pullback(genus, swap, expected):
    qr = voiculescu_quasi_rep(64)
    images = surface_pullback_images(genus, swap=swap)
    case = SurfacePullback(genus=genus, generator_images=images)
    datum = CommutatorDatum.fundamental(Presentation.surface(genus))
    report = verify_index_formula(case, qr, datum)
    assert report.case == f"surface_pullback(g={genus})"
    assert report.class_degree == expected
    assert report.lhs_k == report.rhs_wn.rounded == report.rhs_kappa.rounded == expected
    assert report.equal


def test_index_formula_rejects_mismatched_inputs():
    qr = voiculescu_quasi_rep(8)
    surface = pullback(qr, surface_pullback_images(2))
    datum = CommutatorDatum.fundamental(Presentation.z2())
    with pytest.raises(PresentationMismatch):
        verify_index_formula(Z2Bott(), surface, datum)
    case = SurfacePullback(genus=2, generator_images=surface_pullback_images(2))
    with pytest.raises(PresentationMismatch):
        verify_index_formula(case, qr, datum)


def test_surface_pullback_case_validates_images():
    with pytest.raises(ValueError):
        SurfacePullback(genus=2, generator_images=surface_pullback_images(1))


def test_commutator_image_order():
    qr = voiculescu_quasi_rep(8)
    datum = CommutatorDatum.fundamental(qr.presentation)
    u, v = qr.images["a"].m, qr.images["b"].m
    np.testing.assert_allclose(commutator_image(qr, datum), group_commutator(v, u), atol=1e-14)
    np.testing.assert_allclose(
        commutator_image(qr, datum, reverse=False), group_commutator(u, v), atol=1e-14
    )


@parametrize_voiculescu(16, 64)
def test_representatives_of_fundamental_class_agree(voiculescu):
    reports = compare_representatives(voiculescu)
    assert set(reports) == {"plain", "conjugated", "padded"}
    assert representatives_agree(reports)
    assert reports["plain"].rounded == 1


def test_representatives_require_z2():
    surface = pullback(voiculescu_quasi_rep(4), surface_pullback_images(2))
    with pytest.raises(PresentationMismatch):
        z2_representatives(surface)


def test_representatives_of_commuting_pair():
    reports = compare_representatives(genuine_representation(6, seed=2))
    assert representatives_agree(reports)
    assert reports["padded"].rounded == 0
