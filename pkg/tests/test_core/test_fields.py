import numpy as np
import pytest

from calabi_lab.core.geometry.differences import central_gradient, central_jacobian
from calabi_lab.core.geometry.fields import (
    Autonomous,
    CallableField,
    Concatenation,
    Modulated,
    PlateauBump,
    QuadraticWell,
    Superposition,
    TiledPlateauField,
    ZeroHamiltonian,
    feasible_plateau_fraction,
    max_plateau_fraction,
    sampled_hessian_bound,
    smooth_step,
)
from calabi_lab.core.calabi.quadrature import integrate_box
from calabi_lab.models.configs import QuadratureConfig
from calabi_lab.models.geometry import Box, TimeProfile
from calabi_lab.utils.exceptions import PlateauInfeasibleError, ValidationError


def test_smooth_step_is_a_transition():
    s, s1, s2 = smooth_step(np.array([-0.5, 0.0, 0.5, 1.0, 1.5]))
    np.testing.assert_array_equal(s[[0, 1]], [0.0, 0.0])
    np.testing.assert_array_equal(s[[3, 4]], [1.0, 1.0])
    assert s[2] == pytest.approx(0.5)
    np.testing.assert_array_equal(s1[[0, 4]], [0.0, 0.0])
    np.testing.assert_array_equal(s2[[0, 4]], [0.0, 0.0])


def test_plateau_bump_shape(unit_box):
    bump = PlateauBump(unit_box, 0.25, 0.3)
    plateau = bump.plateau

    assert plateau.volume / unit_box.volume == pytest.approx(0.25)
    assert bump.value(np.array([0.0, 0.0])) == 0.3
    assert bump.value(np.array([0.45, -0.45])) == 0.3
    assert bump.value(np.array([1.2, 0.0])) == 0.0
    assert bump.value(np.array([-1.0, 0.3])) == 0.0
    assert 0.0 < bump.value(np.array([0.75, 0.0])) < 0.3


def test_plateau_bump_derivatives_are_analytic(unit_box, rng):
    bump = PlateauBump(unit_box, 0.25, 0.3)
    points = rng.uniform(-1.0, 1.0, size=(30, 2))

    np.testing.assert_allclose(bump.gradient(points), central_gradient(bump._value, points), atol=1e-7)
    np.testing.assert_allclose(bump.hessian(points), central_jacobian(bump._gradient, points), atol=1e-5)


def test_hessian_bound_dominates_samples(unit_box):
    H = Autonomous(PlateauBump(unit_box, 0.25, 0.3))
    points, _ = unit_box.grid(40)
    assert sampled_hessian_bound(H, points, [0.5]) <= H.hessian_bound()


def test_infeasible_plateau_fraction(unit_box):
    assert max_plateau_fraction(0.02, 2) == pytest.approx(0.96 ** 2)
    with pytest.raises(PlateauInfeasibleError) as excinfo:
        PlateauBump(unit_box, 0.99, smoothing_floor=0.02)
    assert excinfo.value.achievable == pytest.approx(0.96 ** 2)


def test_plateau_fraction_policy():
    assert feasible_plateau_fraction(0.3, 0.2, 2) == 0.3
    assert feasible_plateau_fraction(0.75, 0.2, 2) == pytest.approx(0.36)
    with pytest.raises(PlateauInfeasibleError):
        feasible_plateau_fraction(0.75, 0.2, 2, policy="strict")
    with pytest.raises(ValidationError):
        feasible_plateau_fraction(1.0, 0.2, 2)


def test_tiled_field_has_one_plateau_per_subcube():
    box = Box.cube(0.0, 1.0)
    field = TiledPlateauField(box, 2, 0.3, 1.0, 0.2)
    centers = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])

    np.testing.assert_array_equal(field.value(centers), np.ones(4))
    np.testing.assert_array_equal(field.value(np.array([[0.5, 0.25], [0.0, 0.6], [1.2, 0.5]])), np.zeros(3))
    np.testing.assert_array_equal(field.cell_index(centers), [[0, 0], [1, 0], [0, 1], [1, 1]])


def test_tiled_field_rejects_bad_subdivision():
    with pytest.raises(ValidationError):
        TiledPlateauField(Box.cube(0.0, 1.0), 0, 0.3)


def test_autonomous_needs_compact_support():
    with pytest.raises(ValidationError):
        Autonomous(QuadraticWell([0.0, 0.0]))


def test_hamiltonian_vanishes_outside_unit_time(bump):
    z = np.array([0.0, 0.0])
    assert bump.value(0.5, z) == 0.3
    assert bump.value(1.5, z) == 0.0
    np.testing.assert_array_equal(bump.gradient(-0.1, np.array([0.7, 0.0])), [0.0, 0.0])


def test_modulated_amplitude(unit_box):
    H = Modulated(PlateauBump(unit_box, 0.25, 1.0), TimeProfile(poly=(0.2, 0.3)))
    assert not H.autonomous
    assert H.value(0.5, np.zeros(2)) == pytest.approx(0.35)
    assert TimeProfile(poly=(2.0,)).is_constant
    assert TimeProfile(poly=(0.0,), sines=((1.0, 1.0),))(0.25) == pytest.approx(1.0)


def test_scaling_and_superposition(bump, unit_box):
    other = Autonomous(PlateauBump(Box.from_pairs((0.0, 2.0), (0.0, 2.0)), 0.25, -0.1))
    total = bump + other
    z = np.array([0.2, 0.2])

    assert isinstance(total, Superposition)
    assert total.support == Box.cube(-1.0, 2.0)
    assert total.value(0.5, z) == pytest.approx(bump.value(0.5, z) + other.value(0.5, z))
    assert (2.0 * bump).value(0.5, z) == pytest.approx(0.6)
    assert (0.0 * bump).is_zero


def test_concatenation_runs_first_factor_at_double_speed(bump, unit_box):
    other = Autonomous(PlateauBump(unit_box, 0.25, -0.2))
    joined = Concatenation(other, bump)
    z = np.zeros(2)

    assert joined.breakpoints == (0.5,)
    assert joined.value(0.25, z) == pytest.approx(-0.4)
    assert joined.value(0.75, z) == pytest.approx(0.6)


def test_smooth_concatenation_is_flat_at_the_ends(bump):
    joined = Concatenation(bump, bump, smooth=True)
    z = np.zeros(2)
    assert joined.value(0.0, z) == 0.0
    assert joined.value(0.5, z) == 0.0
    assert joined.value(0.25, z) == pytest.approx(0.6 * 2.0)


def test_zero_hamiltonian(unit_box):
    H = ZeroHamiltonian(unit_box)
    assert H.is_zero and H.autonomous
    assert H.hessian_bound() == 0.0
    assert H.value(0.5, np.array([0.1, 0.2])) == 0.0


def test_callable_field_is_cut_off_outside_its_box():
    box = Box.cube(-1.0, 1.0)
    field = CallableField(lambda z: 1.0 + z[:, 0], box)
    values = field.value(np.array([[0.5, 0.0], [1.5, 0.0]]))
    np.testing.assert_array_equal(values, [1.5, 0.0])
    np.testing.assert_allclose(field.gradient(np.array([0.0, 0.0])), [1.0, 0.0], atol=1e-8)


@pytest.mark.parametrize("n,rho,height", [(1, 0.25, 0.3), (1, 0.6, -1.5), (2, 0.3, 2.0)])
def test_plateau_bump_integral_lies_between_plateau_and_box(n, rho, height):
    box = Box.cube(-1.0, 1.0, n=n)
    bump = PlateauBump(box, rho, height)
    integral = integrate_box(bump.value, box, QuadratureConfig(spatial_nodes_per_axis=24))

    low, high = sorted([rho * height * box.volume, height * box.volume])
    assert low < integral < high
