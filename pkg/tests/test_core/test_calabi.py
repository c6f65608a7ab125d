import numpy as np
import pytest

from calabi_lab.core.calabi.invariant import (
    cal_from_hamiltonian,
    cal_from_potential,
    calabi_report,
    f_potential,
    l1inf_norm,
    volume_factor,
)
from calabi_lab.core.calabi.quadrature import integrate_box, interval_rule, spatial_rule, time_rule
from calabi_lab.core.geometry.fields import Modulated, PlateauBump, ZeroHamiltonian
from calabi_lab.core.geometry.forms import gauge_shift
from calabi_lab.core.flow.integrator import realize_time_one
from calabi_lab.models.configs import IntegratorConfig, QuadratureConfig, QuadratureRule
from calabi_lab.models.geometry import Box, TimeProfile
from calabi_lab.utils.exceptions import ValidationError


def test_volume_factor():
    assert [volume_factor(n) for n in (1, 2, 3)] == [1.0, 2.0, 6.0]


def test_composite_gauss_rule_is_exact_for_cubics():
    nodes, weights = interval_rule(0.0, 2.0, 2, QuadratureRule.GAUSS_LEGENDRE, panels=3)
    assert len(nodes) == 6
    assert np.dot(weights, nodes ** 3) == pytest.approx(4.0)


def test_midpoint_rule_integrates_linear_functions():
    nodes, weights = interval_rule(-1.0, 3.0, 5, QuadratureRule.MIDPOINT)
    assert np.dot(weights, 2.0 * nodes + 1.0) == pytest.approx(12.0)


def test_spatial_rule_integrates_volume():
    box = Box.from_pairs((0.0, 2.0), (-1.0, 0.5), n=2)
    nodes, weights = spatial_rule(box, QuadratureConfig(spatial_nodes_per_axis=3))
    assert nodes.shape == (81, 4)
    assert weights.sum() == pytest.approx(box.volume)
    assert integrate_box(lambda z: z[:, 0], box, QuadratureConfig(spatial_nodes_per_axis=3)) == pytest.approx(box.volume)


def test_oversized_rule_is_rejected():
    with pytest.raises(ValidationError):
        spatial_rule(Box.cube(0.0, 1.0, n=3), QuadratureConfig(spatial_nodes_per_axis=64))


def test_time_rule_collapses_for_autonomous(bump, quadrature):
    nodes, weights = time_rule(bump, quadrature)
    assert nodes.tolist() == [0.5] and weights.tolist() == [1.0]


def test_spacetime_calabi_of_a_bump_lies_between_plateau_and_box(bump, quadrature):
    cal = cal_from_hamiltonian(bump, quadrature)
    assert 0.25 * 4.0 * 0.3 < cal < 4.0 * 0.3


def test_spacetime_calabi_is_linear(bump, quadrature):
    assert cal_from_hamiltonian(2.5 * bump, quadrature) == pytest.approx(2.5 * cal_from_hamiltonian(bump, quadrature))


def test_time_dependent_calabi_averages_the_profile(unit_box, quadrature):
    field = PlateauBump(unit_box, 0.25, 1.0)
    H = Modulated(field, TimeProfile(poly=(0.2, 0.3)))
    steady = Modulated(field, TimeProfile(poly=(1.0,)))
    assert cal_from_hamiltonian(H, quadrature) == pytest.approx(0.35 * cal_from_hamiltonian(steady, quadrature))


def test_both_formulas_agree(bump, quadrature):
    integrator = IntegratorConfig(steps=200)
    report = calabi_report(bump, quadrature, integrator)

    assert set(report.cal_f) == {"radial", "xdy"}
    assert report.discrepancy < 1e-3
    assert cal_from_potential(bump, "xdy", quadrature, integrator) == pytest.approx(report.cal_f["xdy"])


def test_potential_formula_ignores_the_gauge(bump, quadrature, integrator):
    g = PlateauBump(Box.cube(-1.5, 1.5), 0.25, 0.4)
    form = gauge_shift("xdy", g)
    phi = realize_time_one(bump, integrator)
    report = calabi_report(bump, quadrature, integrator, ["radial", form], phi)
    assert report.cal_f["custom(xdy)"] == pytest.approx(report.cal_f["radial"], abs=1e-3)


def test_potential_vanishes_outside_the_support(bump, integrator):
    x = np.array([[1.5, 0.2], [-0.3, -2.0]])
    np.testing.assert_array_equal(f_potential(bump, "radial", x, integrator), [0.0, 0.0])


def test_l1inf_of_an_autonomous_bump_is_its_height(bump, quadrature):
    estimate = l1inf_norm(bump, quadrature, 9)
    assert estimate.value == pytest.approx(0.3)
    assert estimate.resolution == 9
    assert estimate.spacing == pytest.approx(2.0 / 9)


def test_zero_hamiltonian_has_zero_calabi(unit_box, quadrature, integrator):
    H = ZeroHamiltonian(unit_box)
    report = calabi_report(H, quadrature, integrator)
    assert report.cal_H == 0.0
    assert report.cal_f == {"radial": 0.0, "xdy": 0.0}
    assert l1inf_norm(H, quadrature, 5).value == 0.0
