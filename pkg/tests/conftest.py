import numpy as np
import pytest

from calabi_lab.config import LabConfig
from calabi_lab.core.geometry.fields import Autonomous, PlateauBump, rotation_well
from calabi_lab.models.configs import IntegratorConfig, QuadratureConfig
from calabi_lab.models.geometry import Box


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def unit_box():
    return Box.cube(-1.0, 1.0)


@pytest.fixture
def bump(unit_box):
    """Autonomous plateau bump of height 0.3, plateau [-0.5, 0.5]^2"""
    return Autonomous(PlateauBump(unit_box, 0.25, 0.3))


@pytest.fixture
def small_bump(unit_box):
    """Small enough that its time-one map is graphical"""
    return Autonomous(PlateauBump(unit_box, 0.1, 0.1))


@pytest.fixture
def well(unit_box):
    """Rigid rotation by -0.4 on the plateau [-0.6, 0.6]^2"""
    return Autonomous(rotation_well(unit_box, 0.36, 0.4))


@pytest.fixture
def integrator():
    return IntegratorConfig(steps=60)


@pytest.fixture
def quadrature():
    return QuadratureConfig(spatial_nodes_per_axis=40, time_nodes=8)


@pytest.fixture
def lab_config(tmp_path):
    return LabConfig(
        _env_file=None,
        quad=40,
        time_nodes=8,
        steps=60,
        grid_res=9,
        probe_count=12,
        eps="0.2,0.1",
        out=str(tmp_path / "results"),
    )
