from typing import Tuple

import numpy as np

from calabi_lab.core.flow.integrator import FlowMap, FlowSample
from calabi_lab.core.geometry.fields import Concatenation, TimeDepField
from calabi_lab.models.geometry import GridEstimate
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)


def probe_grid(phi: FlowMap, resolution: int) -> Tuple[np.ndarray, float]:
    """Nested uniform grid on the support box and its largest spacing"""
    points, spacing = phi.support.grid(resolution)
    return points, float(np.max(spacing))


def _estimate(values: np.ndarray, spacing: float, resolution: int) -> GridEstimate:
    return GridEstimate(value=float(np.max(values, initial=0.0)), spacing=spacing, resolution=resolution)


def c0_distance_to_identity(phi: FlowMap, resolution: int) -> GridEstimate:
    """
    max |phi(x) - x| over a resolution^{2n} grid of the support box

    A grid under-estimate of the C0 distance; the spacing is attached.
    """
    points, spacing = probe_grid(phi, resolution)
    moved = phi.forward(points)
    return _estimate(np.linalg.norm(moved - points, axis=1), spacing, resolution)


def c0_from_sample(sample: FlowSample, spacing: float, resolution: int) -> Tuple[GridEstimate, GridEstimate]:
    """(time-one, uniform-in-t) displacement estimates from an existing grid pass"""
    time_one = _estimate(np.linalg.norm(sample.points - sample.start, axis=1), spacing, resolution)
    uniform = _estimate(sample.excursion, spacing, resolution)
    return time_one, uniform


def c0_uniform_distance(phi: FlowMap, resolution: int) -> GridEstimate:
    """max over grid points and integrator steps of |phi^t(x) - x|"""
    points, spacing = probe_grid(phi, resolution)
    return _estimate(phi.evaluate(points).excursion, spacing, resolution)


def concatenate(H: TimeDepField, K: TimeDepField, smooth: bool = False) -> TimeDepField:
    """
    Hamiltonian whose time-one map is phi_H o phi_K

    K runs on [0, 1/2] and H on [1/2, 1], both at double speed, so the
    space-time integral is int H + int K.
    """
    logger.debug("Concatenating Hamiltonians", first=type(K).__name__, second=type(H).__name__, smooth=smooth)
    return Concatenation(K, H, smooth=smooth)
