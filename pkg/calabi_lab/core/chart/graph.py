"""
Graphs of Hamiltonian diffeomorphisms in the chart, graphicality and the
section one-form alpha.

L_phi = Psi(Gamma_phi) is parameterized by x -> Psi(phi(x), x), whose base
component is the midpoint map x -> (phi(x) + x)/2. phi is graphical when the
midpoint map is a diffeomorphism; L_phi is then the image of the one-form
alpha(q) = Omega (phi(x) - x) with q = (phi(x) + x)/2.
"""
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from calabi_lab.core.chart.darboux import dw_chart
from calabi_lab.core.flow.integrator import FlowMap
from calabi_lab.core.geometry.differences import curl_residual
from calabi_lab.core.geometry.symplectic import omega_matrix
from calabi_lab.models.configs import NewtonConfig
from calabi_lab.models.geometry import ChartPoint
from calabi_lab.models.reports import GraphicalityReport
from calabi_lab.utils.exceptions import NewtonConvergenceError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)


def graph_point(phi: FlowMap, x: np.ndarray) -> ChartPoint:
    """Psi(phi(x), x)"""
    x = np.asarray(x, dtype=float)
    return dw_chart(phi.forward(x), x)


def _grid_collisions(midpoints: np.ndarray, resolution: int, radius: float) -> int:
    """Midpoint images closer than radius whose start points are not grid neighbours"""
    if radius <= 0.0 or len(midpoints) < 2:
        return 0
    pairs = cKDTree(midpoints).query_pairs(r=radius, output_type="ndarray")
    if len(pairs) == 0:
        return 0
    dim = midpoints.shape[1]
    index = np.stack(np.unravel_index(np.arange(len(midpoints)), (resolution,) * dim), axis=1)
    separation = np.max(np.abs(index[pairs[:, 0]] - index[pairs[:, 1]]), axis=1)
    return int(np.count_nonzero(separation >= 2))


def graphicality_report(
    phi: FlowMap,
    resolution: int,
    threshold: float = 1e-6,
    collision_fraction: float = 0.5,
) -> GraphicalityReport:
    """
    Probe det((D phi + I)/2) and injectivity of the midpoint map on a grid

    Injectivity is tested by a k-d tree over midpoint images: two images
    closer than collision_fraction * spacing count as a collision unless the
    start points are grid neighbours.
    """
    points, spacing = phi.support.grid(resolution)
    sample = phi.evaluate(points, jacobian=True)
    eye = np.eye(phi.size)
    midpoint_derivative = 0.5 * (sample.jacobians + eye[None])
    dets = np.linalg.det(midpoint_derivative)
    radius = collision_fraction * float(np.min(spacing))
    collisions = _grid_collisions(0.5 * (sample.points + points), resolution, radius)
    c1 = float(np.max(np.linalg.norm(sample.jacobians - eye[None], ord=2, axis=(1, 2)), initial=0.0))

    min_abs_det = float(np.min(np.abs(dets)))
    report = GraphicalityReport(
        is_graphical=bool(min_abs_det > threshold and float(np.min(dets)) > 0.0 and collisions == 0),
        min_abs_det=min_abs_det,
        min_det=float(np.min(dets)),
        injectivity_collisions=collisions,
        resolution=resolution,
        threshold=threshold,
        collision_radius=radius,
        c1_distance=c1,
    )
    logger.debug(
        "Graphicality probed",
        is_graphical=report.is_graphical,
        min_det=report.min_det,
        collisions=collisions,
        resolution=resolution,
    )
    return report


def invert_midpoint(phi: FlowMap, q: np.ndarray, cfg: NewtonConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve (phi(x) + x)/2 = q for x by damped Newton

    Starts from x = q with Jacobian (D phi + I)/2; a point's step is halved
    while its residual grows.

    Returns:
        (x, phi(x)) for the (N, 2n) batch q

    Raises:
        NewtonConvergenceError: residual above tolerance after max_iter steps
    """
    q = np.atleast_2d(np.asarray(q, dtype=float))
    eye = np.eye(phi.size)
    x = q.copy()
    image = phi.forward(x)
    residual_vec = 0.5 * (image + x) - q
    residual = np.linalg.norm(residual_vec, axis=1)

    for _ in range(cfg.max_iter):
        pending = residual > cfg.tol
        if not np.any(pending):
            break
        idx = np.flatnonzero(pending)
        sample = phi.evaluate(x[idx], jacobian=True)
        derivative = 0.5 * (sample.jacobians + eye[None])
        delta = np.linalg.solve(derivative, residual_vec[idx][..., None])[..., 0]
        scale = np.ones(len(idx))
        for halving in range(cfg.max_halvings + 1):
            trial = x[idx] - scale[:, None] * delta
            trial_image = phi.forward(trial)
            trial_vec = 0.5 * (trial_image + trial) - q[idx]
            trial_res = np.linalg.norm(trial_vec, axis=1)
            worse = trial_res > residual[idx]
            if not np.any(worse) or halving == cfg.max_halvings:
                break
            scale[worse] *= 0.5
            logger.debug("Section Newton step damped", points=int(np.count_nonzero(worse)), halving=halving + 1)
        x[idx] = trial
        image[idx] = trial_image
        residual_vec[idx] = trial_vec
        residual[idx] = trial_res

    worst = float(np.max(residual, initial=0.0))
    if worst > cfg.tol:
        logger.error("Midpoint inversion failed", residual=worst, max_iter=cfg.max_iter)
        raise NewtonConvergenceError("midpoint map inversion did not converge; the map may be near a fold", worst)
    return x, image


def alpha_at(phi: FlowMap, q: np.ndarray, cfg: Optional[NewtonConfig] = None) -> np.ndarray:
    """
    The section alpha at base points q: Omega (phi(x) - x) where (phi(x) + x)/2 = q

    Zero at q outside the support box.
    """
    cfg = cfg or NewtonConfig()
    single = np.ndim(q) == 1
    x, image = invert_midpoint(phi, q, cfg)
    alpha = (image - x) @ omega_matrix(phi.n).T
    return alpha[0] if single else alpha


class SectionForm:
    """alpha as a one-form on the diagonal, for a graphical phi"""

    def __init__(self, phi: FlowMap, cfg: Optional[NewtonConfig] = None):
        self.phi = phi
        self.cfg = cfg or NewtonConfig()

    @property
    def domain(self):
        return self.phi.support

    def __call__(self, q: np.ndarray) -> np.ndarray:
        return alpha_at(self.phi, q, self.cfg)


def alpha_closedness_residual(
    phi: FlowMap,
    probes: np.ndarray,
    cfg: Optional[NewtonConfig] = None,
    step: float = 1e-4,
) -> float:
    """Largest entry of the finite-difference d(alpha) at the probes"""
    return curl_residual(SectionForm(phi, cfg), probes, step)
