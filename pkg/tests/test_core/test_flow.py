import numpy as np
import pytest

from calabi_lab.core.calabi.invariant import cal_from_hamiltonian, potential_gradient_residual
from calabi_lab.core.geometry.differences import central_jacobian
from calabi_lab.core.geometry.fields import Autonomous, PlateauBump, ZeroHamiltonian, rotation_well
from calabi_lab.core.geometry.forms import gauge_shift
from calabi_lab.core.geometry.symplectic import symplectic_defect
from calabi_lab.core.flow.integrator import (
    FlowMap,
    integrate_batch,
    integrate_flow,
    realize_time_one,
    stiffness_steps,
    time_segments,
)
from calabi_lab.core.flow.operations import (
    c0_distance_to_identity,
    c0_uniform_distance,
    concatenate,
)
from calabi_lab.models.configs import IntegratorConfig, PrimitiveKind, QuadratureConfig, Scheme
from calabi_lab.models.geometry import Box
from calabi_lab.utils.exceptions import DimensionMismatchError, IntegrationError, ValidationError


def test_rotation_on_the_plateau(well):
    cfg = IntegratorConfig(steps=200)
    z0 = np.array([0.2, 0.1])
    # x' = c y, y' = -c x with c = 0.4
    c = 0.4
    expected = np.array([
        z0[0] * np.cos(c) + z0[1] * np.sin(c),
        -z0[0] * np.sin(c) + z0[1] * np.cos(c),
    ])
    np.testing.assert_allclose(integrate_flow(well, z0, cfg), expected, atol=1e-5)


def test_flow_is_identity_outside_the_support(bump, integrator):
    outside = np.array([[1.5, 0.0], [-2.0, 3.0], [0.0, -1.01]])
    np.testing.assert_array_equal(realize_time_one(bump, integrator)(outside), outside)


def test_time_one_jacobian_is_symplectic(bump, integrator, rng):
    phi = realize_time_one(bump, integrator)
    probes = bump.support.sample(rng, 20)
    assert symplectic_defect(phi.jacobian(probes)) < 1e-9


def test_jacobian_matches_finite_differences(bump, integrator, rng):
    phi = realize_time_one(bump, integrator)
    probes = bump.support.sample(rng, 8, margin=0.05)
    np.testing.assert_allclose(phi.jacobian(probes), central_jacobian(phi.forward, probes, 1e-6), atol=1e-5)


def test_rk4_agrees_with_midpoint(bump, rng):
    probes = bump.support.sample(rng, 10)
    midpoint = integrate_flow(bump, probes, IntegratorConfig(steps=400))
    rk4 = integrate_flow(bump, probes, IntegratorConfig(scheme=Scheme.RK4, steps=400))
    np.testing.assert_allclose(midpoint, rk4, atol=1e-3)


def test_zero_hamiltonian_flow(unit_box, integrator, rng):
    H = ZeroHamiltonian(unit_box)
    points = unit_box.sample(rng, 5)
    sample = integrate_batch(H, points, integrator, with_jacobian=True, kinds=[PrimitiveKind.RADIAL])

    np.testing.assert_array_equal(sample.points, points)
    np.testing.assert_array_equal(sample.jacobians, np.broadcast_to(np.eye(2), (5, 2, 2)))
    np.testing.assert_array_equal(sample.potentials["radial"], np.zeros(5))
    assert c0_distance_to_identity(realize_time_one(H, integrator), 5).value == 0.0


def test_invalid_inputs(bump, integrator):
    with pytest.raises(ValidationError):
        integrate_batch(bump, np.zeros((1, 2)), integrator, t_final=1.5)
    with pytest.raises(DimensionMismatchError):
        integrate_batch(bump, np.zeros((1, 4)), integrator)
    with pytest.raises(ValidationError):
        integrate_batch(bump, np.zeros((1, 2)), integrator, kinds=[PrimitiveKind.CUSTOM])


def test_newton_failure_raises(unit_box):
    H = Autonomous(PlateauBump(unit_box, 0.25, 50.0))
    cfg = IntegratorConfig(steps=1, newton_max_iter=1, newton_tol=1e-15)
    points, _ = unit_box.grid(8)
    with pytest.raises(IntegrationError) as excinfo:
        integrate_flow(H, points, cfg)
    assert excinfo.value.step == 0


def test_stiffness_raises_step_count(unit_box):
    H = Autonomous(PlateauBump(unit_box, 0.25, 3.0))
    cfg = IntegratorConfig(steps=10)
    raised = stiffness_steps(H, cfg, 1.5)
    assert raised.steps >= H.hessian_bound() / 1.5
    assert stiffness_steps(H, IntegratorConfig(steps=10_000), 1.5).steps == 10_000


def test_time_segments_split_at_breakpoints(bump):
    joined = concatenate(bump, bump)
    assert time_segments(joined, 10, 1.0) == [(0.0, 0.5, 5), (0.5, 1.0, 5)]
    assert time_segments(bump, 10, 1.0) == [(0.0, 1.0, 10)]


def test_concatenation_composes_time_one_maps(bump, well, rng):
    cfg = IntegratorConfig(steps=120)
    half = IntegratorConfig(steps=60)
    points = bump.support.sample(rng, 10)

    composed = integrate_flow(concatenate(bump, well), points, cfg)
    sequential = integrate_flow(bump, integrate_flow(well, points, half), half)
    np.testing.assert_allclose(composed, sequential, atol=1e-9)


def test_smooth_concatenation_keeps_the_space_time_integral(bump, well):
    quadrature = QuadratureConfig(spatial_nodes_per_axis=24, time_nodes=32)
    joined = concatenate(bump, well, smooth=True)
    expected = cal_from_hamiltonian(bump, quadrature) + cal_from_hamiltonian(well, quadrature)
    assert cal_from_hamiltonian(joined, quadrature) == pytest.approx(expected, abs=1e-8)


def test_uniform_displacement_dominates_time_one(bump, integrator):
    phi = realize_time_one(bump, integrator)
    assert c0_uniform_distance(phi, 9).value >= c0_distance_to_identity(phi, 9).value > 0.0


def test_region_tracking(bump, integrator):
    points = np.array([[0.1, 0.1], [0.8, 0.0]])
    sample = FlowMap(bump, integrator).evaluate(points, region=lambda z: np.atleast_2d(z) > 0.0)
    assert sample.confined.shape == (2,)
    assert sample.confined[0]


@pytest.mark.parametrize("kind", [PrimitiveKind.RADIAL, PrimitiveKind.XDY])
def test_potential_differential(bump, integrator, rng, kind):
    phi = realize_time_one(bump, integrator)
    probes = bump.support.sample(rng, 8)
    assert potential_gradient_residual(phi, kind, probes) < 1e-4


def test_gauge_shifted_potential(bump, integrator, rng):
    g = PlateauBump(Box.cube(-1.5, 1.5), 0.25, 0.4)
    form = gauge_shift("radial", g)
    phi = realize_time_one(bump, integrator)
    x = bump.support.sample(rng, 6)

    shifted = phi.potential(form, x)
    expected = phi.potential("radial", x) + g.value(phi(x)) - g.value(x)
    np.testing.assert_allclose(shifted, expected, atol=1e-12)
    assert potential_gradient_residual(phi, form, x) < 1e-4


def test_rotation_well_jacobian_is_the_rotation_on_the_plateau(well):
    cfg = IntegratorConfig(steps=200)
    # includes the stationary center, where the gradient vanishes but the Hessian does not
    points = np.array([[0.0, 0.0], [0.3, -0.2], [-0.25, 0.4], [1e-9, 0.0]])
    c = 0.4
    rotation = np.array([[np.cos(c), np.sin(c)], [-np.sin(c), np.cos(c)]])

    jacobians = realize_time_one(well, cfg).jacobian(points)

    for jac in jacobians:
        np.testing.assert_allclose(jac, rotation, atol=1e-6)


def test_stationary_center_of_a_fast_well():
    well = Autonomous(rotation_well(Box.cube(-1.0, 1.0), 0.36, 3.0))
    phi = realize_time_one(well, IntegratorConfig(steps=400))
    center, nearby = phi.jacobian(np.array([[0.0, 0.0], [1e-9, 0.0]]))

    np.testing.assert_array_equal(phi.forward(np.zeros(2)), np.zeros(2))
    np.testing.assert_allclose(center, nearby, atol=1e-6)
    assert center[0, 0] == pytest.approx(np.cos(3.0), abs=1e-4)


def test_midpoint_self_convergence(bump, rng):
    points = bump.support.sample(rng, 12)
    reference = integrate_flow(bump, points, IntegratorConfig(steps=1600))
    coarse = np.max(np.abs(integrate_flow(bump, points, IntegratorConfig(steps=50)) - reference))
    fine = np.max(np.abs(integrate_flow(bump, points, IntegratorConfig(steps=100)) - reference))

    assert fine > 0.0
    assert coarse >= 3.0 * fine


def test_c0_estimate_grows_with_resolution(bump, integrator):
    phi = realize_time_one(bump, integrator)
    coarse = c0_distance_to_identity(phi, 8)
    fine = c0_distance_to_identity(phi, 16)

    assert fine.spacing < coarse.spacing
    assert fine.value >= coarse.value - 1e-12
