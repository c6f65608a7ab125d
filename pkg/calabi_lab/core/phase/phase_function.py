"""
Generalized phase functions of graphical Hamiltonian diffeomorphisms.

On L_phi, parameterized by x -> Psi(phi(x), x), the phase function is

    S(x) = R(Psi(phi(x), x)) + f_{lambda, phi}(x)

and satisfies dS = -theta_can restricted to L_phi. Pulling back along
x -> (q(x), p(x)) this reads grad S = -Dq^T p with Dq = (D phi + I)/2.
This sign follows the construction through R; the opposite sign convention
dS = +theta_can appears in parts of the literature.
"""
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from calabi_lab.core.calabi.invariant import volume_factor
from calabi_lab.core.calabi.quadrature import spatial_rule
from calabi_lab.core.chart.darboux import dw_chart
from calabi_lab.core.chart.graph import alpha_at, graphicality_report, invert_midpoint
from calabi_lab.core.flow.integrator import FlowMap, primitive_key
from calabi_lab.core.geometry.differences import central_gradient
from calabi_lab.core.geometry.fields import TimeDepField
from calabi_lab.core.phase.correction import PrimitiveLike, as_form, r_function
from calabi_lab.models.configs import NewtonConfig, QuadratureConfig
from calabi_lab.models.reports import BoundReport, GraphicalityReport
from calabi_lab.utils.exceptions import NonGraphicalError, ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

CHUNK_POINTS = 4096


class PhaseData(BaseModel):
    """S, R and f along L_phi at a batch of parameter points x"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x: np.ndarray
    q: np.ndarray
    p: np.ndarray
    S: np.ndarray
    R: np.ndarray
    f: np.ndarray
    jacobians: Optional[np.ndarray] = None


def _check_source(phi: FlowMap, H: TimeDepField):
    if H is not phi.hamiltonian:
        raise ValidationError("phase data must use the Hamiltonian that generated the map")


def phase_data(phi: FlowMap, form: PrimitiveLike, x: np.ndarray, path_nodes: int = 8, jacobian: bool = False) -> PhaseData:
    """One integration pass giving the graph point, R, f and S at each x"""
    form = as_form(form)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    sample = phi.evaluate(x, jacobian=jacobian, primitives=[form])
    chart_point = dw_chart(sample.points, x)
    R = r_function(chart_point, path_nodes, form)
    f = sample.potentials[primitive_key(form)]
    return PhaseData(x=x, q=chart_point.q, p=chart_point.p, S=R + f, R=R, f=f, jacobians=sample.jacobians)


def phase_function(phi: FlowMap, H: TimeDepField, kind: PrimitiveLike, x: np.ndarray, path_nodes: int = 8):
    """S_phi at the graph point over x; zero for x outside the support box"""
    _check_source(phi, H)
    values = phase_data(phi, kind, x, path_nodes).S
    return float(values[0]) if np.ndim(x) == 1 else values


def phase_gradient_residual(
    phi: FlowMap,
    H: TimeDepField,
    kind: PrimitiveLike,
    probes: np.ndarray,
    path_nodes: int = 8,
    step: float = 1e-5,
) -> float:
    """max over probes of |grad_x S + Dq^T p|, with grad_x S by central differences"""
    _check_source(phi, H)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    data = phase_data(phi, kind, probes, path_nodes, jacobian=True)
    gradient = central_gradient(lambda z: phase_data(phi, kind, z, path_nodes).S, probes, step)
    midpoint_derivative = 0.5 * (data.jacobians + np.eye(phi.size)[None])
    pullback = np.einsum("nij,ni->nj", midpoint_derivative, data.p)
    return float(np.max(np.linalg.norm(gradient + pullback, axis=1), initial=0.0))


def phase_pullback_integrals(
    phi: FlowMap,
    H: TimeDepField,
    kind: PrimitiveLike,
    q: QuadratureConfig,
    path_nodes: int = 8,
) -> Tuple[float, float]:
    """
    (I_S, I_R): integrals of S and R over the graph parameterization against (d lambda)^n

    Since S - R = f along the graph, I_S - I_R = (n + 1) Cal(phi).
    """
    _check_source(phi, H)
    if H.is_zero:
        return 0.0, 0.0
    nodes, weights = spatial_rule(phi.support, q)
    I_S = 0.0
    I_R = 0.0
    for start in range(0, len(nodes), CHUNK_POINTS):
        stop = start + CHUNK_POINTS
        data = phase_data(phi, kind, nodes[start:stop], path_nodes)
        I_S += float(np.dot(weights[start:stop], data.S))
        I_R += float(np.dot(weights[start:stop], data.R))
    factor = volume_factor(phi.n)
    return factor * I_S, factor * I_R


def section_residual(
    phi: FlowMap,
    kind: PrimitiveLike,
    probes: np.ndarray,
    cfg: NewtonConfig,
    path_nodes: int = 8,
    step: float = 1e-5,
) -> float:
    """max over base points of |grad_q S(x(q)) + alpha(q)|"""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))

    def section_phase(base: np.ndarray) -> np.ndarray:
        x, _ = invert_midpoint(phi, base, cfg)
        return phase_data(phi, kind, x, path_nodes).S

    gradient = central_gradient(section_phase, probes, step)
    return float(np.max(np.linalg.norm(gradient + alpha_at(phi, probes, cfg), axis=1), initial=0.0))


def theorem_bound_check(
    phi: FlowMap,
    H: TimeDepField,
    kind: PrimitiveLike,
    resolution: int,
    cfg: Optional[NewtonConfig] = None,
    path_nodes: int = 8,
    graphicality: Optional[GraphicalityReport] = None,
    section_probes: Optional[np.ndarray] = None,
    step: float = 1e-5,
) -> BoundReport:
    """
    Check max |S| <= (A + 1) max |alpha| on the probe grid

    A is the Euclidean diameter of the support box. The slack is 1e-6 plus
    one grid spacing times max |alpha|. When section_probes are given the
    identity grad_q (S o alpha) = -alpha is also checked there.

    Raises:
        NonGraphicalError: phi fails the graphicality probe
    """
    _check_source(phi, H)
    cfg = cfg or NewtonConfig()
    graphicality = graphicality or graphicality_report(phi, resolution)
    if not graphicality.is_graphical:
        raise NonGraphicalError("phase bound needs a graphical map", graphicality)

    points, spacing = phi.support.grid(resolution)
    sup_S = float(np.max(np.abs(phase_data(phi, kind, points, path_nodes).S), initial=0.0))
    alpha = alpha_at(phi, points, cfg)
    sup_alpha = float(np.max(np.linalg.norm(alpha, axis=1), initial=0.0))
    diameter = phi.support.diameter
    slack = 1e-6 + float(np.max(spacing)) * sup_alpha
    residual = None
    if section_probes is not None and len(section_probes):
        residual = section_residual(phi, kind, section_probes, cfg, path_nodes, step)

    report = BoundReport(
        sup_S=sup_S,
        sup_alpha=sup_alpha,
        A=diameter,
        slack=slack,
        bound_ok=sup_S <= (diameter + 1.0) * sup_alpha + slack,
        section_residual=residual,
        resolution=resolution,
    )
    logger.info(
        "Phase bound checked",
        sup_S=sup_S,
        sup_alpha=sup_alpha,
        A=diameter,
        bound_ok=report.bound_ok,
        section_residual=residual,
    )
    return report
