import numpy as np
import pytest

from calabi_lab.core.geometry.differences import central_gradient, curl_residual
from calabi_lab.core.geometry.fields import Autonomous, PlateauBump
from calabi_lab.core.geometry.forms import OneForm, gauge_shift, liouville, primitive, primitive_residual
from calabi_lab.core.geometry.symplectic import (
    half_dimension,
    hamiltonian_vector_field,
    omega_matrix,
    omega_pairing,
    symplectic_defect,
    vector_field_from_gradient,
)
from calabi_lab.models.configs import PrimitiveKind
from calabi_lab.models.geometry import Box
from calabi_lab.utils.exceptions import DimensionMismatchError, ValidationError


def test_omega_matrix_is_a_complex_structure():
    for n in (1, 2, 3):
        omega = omega_matrix(n)
        assert omega.shape == (2 * n, 2 * n)
        np.testing.assert_array_equal(omega.T, -omega)
        np.testing.assert_array_equal(omega @ omega, -np.eye(2 * n))


def test_omega_matrix_rejects_nonpositive_dimension():
    with pytest.raises(DimensionMismatchError):
        omega_matrix(0)


def test_omega_pairing_of_conjugate_pair():
    assert omega_pairing(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
    assert omega_pairing(np.array([0.0, 1.0]), np.array([1.0, 0.0])) == -1.0


def test_omega_pairing_batches(rng):
    u = rng.normal(size=(5, 4))
    v = rng.normal(size=(5, 4))
    expected = np.einsum("ni,ij,nj->n", u, omega_matrix(2), v)
    np.testing.assert_allclose(omega_pairing(u, v), expected)


def test_mismatched_lengths_raise():
    with pytest.raises(DimensionMismatchError):
        omega_pairing(np.zeros(2), np.zeros(4))
    with pytest.raises(DimensionMismatchError):
        half_dimension(np.zeros(3))


def test_vector_field_sign_convention():
    # H = x on R^2: X_H = (H_y, -H_x) = (0, -1)
    np.testing.assert_array_equal(vector_field_from_gradient(np.array([1.0, 0.0])), [0.0, -1.0])


def test_hamiltonian_vector_field_of_rotation_well(well):
    # on the plateau H = 0.2 |z|^2, so X = 0.4 (y, -x)
    field = hamiltonian_vector_field(well, 0.3, np.array([0.2, 0.1]))
    np.testing.assert_allclose(field, [0.04, -0.08], atol=1e-12)


def test_hamiltonian_vector_field_checks_dimension(well):
    with pytest.raises(DimensionMismatchError):
        hamiltonian_vector_field(well, 0.0, np.zeros(4))


def test_symplectic_defect():
    theta = 0.7
    rotation = np.array([[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]])
    assert symplectic_defect(rotation) < 1e-14
    # M^T Omega M = det(M) Omega in two dimensions
    assert symplectic_defect(np.diag([2.0, 1.0])) == pytest.approx(1.0)


def test_builtin_primitives():
    p = np.array([1.0, 2.0])
    np.testing.assert_array_equal(liouville("radial", p), [-1.0, 0.5])
    np.testing.assert_array_equal(liouville("xdy", p), [0.0, 1.0])


@pytest.mark.parametrize("kind", ["radial", "xdy"])
def test_primitives_are_liouville(kind, rng):
    points = rng.uniform(-2.0, 2.0, size=(20, 4))
    assert primitive_residual(primitive(kind), points) < 1e-6


def test_gauge_shift_is_still_a_primitive(rng):
    g = PlateauBump(Box.cube(-1.0, 1.0), 0.25, 0.5)
    form = gauge_shift(PrimitiveKind.RADIAL, g)
    points = rng.uniform(-1.2, 1.2, size=(20, 2))

    assert form.kind is PrimitiveKind.CUSTOM
    assert form.base is PrimitiveKind.RADIAL
    assert form.label == "custom(radial)"
    assert primitive_residual(form, points) < 1e-6


def test_wrong_primitive_is_detected(rng):
    doubled = OneForm(PrimitiveKind.RADIAL, lambda points: 2.0 * liouville("radial", points))
    assert primitive_residual(doubled, rng.uniform(-1.0, 1.0, size=(5, 2))) == pytest.approx(1.0, abs=1e-6)


def test_custom_primitive_needs_a_gauge():
    with pytest.raises(ValidationError):
        primitive("custom")


def test_central_gradient_of_quadratic(rng):
    points = rng.normal(size=(6, 4))
    gradient = central_gradient(lambda z: np.sum(z ** 2, axis=1), points)
    np.testing.assert_allclose(gradient, 2.0 * points, atol=1e-8)


def test_exact_forms_are_closed(rng):
    # d of a gradient field vanishes
    points = rng.normal(size=(6, 2))
    assert curl_residual(lambda z: np.stack([z[:, 1], z[:, 0]], axis=1), points) < 1e-8


def test_omega_matrix_is_nondegenerate():
    for n in (1, 2, 3):
        assert abs(np.linalg.det(omega_matrix(n))) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2])
def test_vector_field_pairs_to_the_differential(n, rng):
    H = Autonomous(PlateauBump(Box.cube(-1.0, 1.0, n=n), 0.2, 0.7))
    probes = H.support.sample(rng, 10)
    directions = rng.normal(size=probes.shape)

    field = hamiltonian_vector_field(H, 0.5, probes)
    differential = central_gradient(lambda z: H.value(0.5, z), probes)

    np.testing.assert_allclose(
        omega_pairing(field, directions),
        np.sum(differential * directions, axis=1),
        atol=1e-7,
    )


def test_grid_needs_two_points_per_axis():
    with pytest.raises(ValidationError):
        Box.cube(-1.0, 1.0).grid(1)
