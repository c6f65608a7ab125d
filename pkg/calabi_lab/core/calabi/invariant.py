"""
The Calabi invariant by two independent formulas.

Volume normalization: (d lambda)^n = n! dx_1 dy_1 ... dx_n dy_n, so

    Cal(phi_H) = n! int_0^1 int H(t, z) dz dt                  (space-time)
    Cal(phi_H) = n!/(n+1) int f_{lambda, phi}(z) dz             (potential)

with df = phi*lambda - lambda and f compactly supported.
"""
import math
from typing import Dict, Optional, Sequence, Union

import numpy as np

from calabi_lab.core.calabi.quadrature import integrate_nodes, spatial_rule, time_rule
from calabi_lab.core.flow.integrator import FlowMap, Primitive, primitive_key, realize_time_one
from calabi_lab.core.geometry.differences import central_gradient
from calabi_lab.core.geometry.fields import TimeDepField
from calabi_lab.core.geometry.forms import OneForm, primitive
from calabi_lab.models.configs import IntegratorConfig, PrimitiveKind, QuadratureConfig
from calabi_lab.models.geometry import GridEstimate
from calabi_lab.models.reports import CalabiReport
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

CHUNK_POINTS = 4096


def volume_factor(n: int) -> float:
    """(d lambda)^n / Lebesgue volume"""
    return float(math.factorial(n))


def cal_from_hamiltonian(H: TimeDepField, q: QuadratureConfig) -> float:
    """
    n! int_{[0,1] x support} H dt dvol by tensor quadrature

    Args:
        H: compactly supported Hamiltonian
        q: quadrature settings

    Returns:
        The Calabi invariant of phi_H^1
    """
    if H.is_zero:
        return 0.0
    nodes, weights = spatial_rule(H.support, q)
    t_nodes, t_weights = time_rule(H, q)
    total = 0.0
    for t, w in zip(t_nodes, t_weights):
        total += w * integrate_nodes(lambda z: H.value(float(t), z), nodes, weights)
    return volume_factor(H.n) * total


def f_potential(H: TimeDepField, kind: Primitive, x: np.ndarray, cfg: IntegratorConfig):
    """
    f_{lambda, phi_H}(x) = int_0^1 (lambda(X_H) + H) o phi^t(x) dt

    Accumulated along the trajectory with the same time discretization as the flow.
    """
    return realize_time_one(H, cfg).potential(kind, x)


def potential_integrals(phi: FlowMap, primitives: Sequence[Primitive], q: QuadratureConfig) -> Dict[str, float]:
    """int f dvol per primitive, from one integration pass over the quadrature nodes"""
    nodes, weights = spatial_rule(phi.support, q)
    totals = {primitive_key(p): 0.0 for p in primitives}
    if phi.hamiltonian.is_zero:
        return totals
    for start in range(0, len(nodes), CHUNK_POINTS):
        stop = start + CHUNK_POINTS
        sample = phi.evaluate(nodes[start:stop], primitives=primitives)
        for key in totals:
            totals[key] += float(np.dot(weights[start:stop], sample.potentials[key]))
    return totals


def cal_from_potential(H: TimeDepField, kind: Primitive, q: QuadratureConfig, cfg: IntegratorConfig) -> float:
    """n!/(n+1) int f_{lambda, phi} dvol"""
    phi = realize_time_one(H, cfg)
    integral = potential_integrals(phi, [kind], q)[primitive_key(kind)]
    return volume_factor(H.n) / (H.n + 1) * integral


def l1inf_norm(H: TimeDepField, q: QuadratureConfig, resolution: int) -> GridEstimate:
    """
    int_0^1 max_z |H(t, z)| dt with the max taken over a probe grid

    An under-estimate; the grid resolution is attached.
    """
    points, spacing = H.support.grid(resolution)
    t_nodes, t_weights = time_rule(H, q)
    value = 0.0
    if not H.is_zero:
        for t, w in zip(t_nodes, t_weights):
            value += w * float(np.max(np.abs(H.value(float(t), points)), initial=0.0))
    return GridEstimate(value=value, spacing=float(np.max(spacing)), resolution=resolution)


def calabi_report(
    H: TimeDepField,
    q: QuadratureConfig,
    cfg: IntegratorConfig,
    primitives: Sequence[Union[PrimitiveKind, OneForm]] = (PrimitiveKind.RADIAL, PrimitiveKind.XDY),
    phi: Optional[FlowMap] = None,
) -> CalabiReport:
    """Both formulas, every requested primitive, and their largest disagreement"""
    phi = phi or realize_time_one(H, cfg)
    cal_H = cal_from_hamiltonian(H, q)
    factor = volume_factor(H.n) / (H.n + 1)
    integrals = potential_integrals(phi, primitives, q) if primitives else {}
    report = CalabiReport(
        cal_H=cal_H,
        cal_f={key: factor * value for key, value in integrals.items()},
        quadrature=q.model_dump(mode="json"),
        integrator=phi.config.model_dump(mode="json"),
    )
    logger.info("Calabi invariant computed", cal_H=report.cal_H, cal_f=report.cal_f, discrepancy=report.discrepancy)
    return report


def potential_gradient_residual(phi: FlowMap, kind: Primitive, probes: np.ndarray, step: float = 1e-5) -> float:
    """
    max over probes of |grad f - (phi* lambda - lambda)|

    grad f comes from central differences of the trajectory potential, the
    pullback from the propagated Jacobian: (phi* lambda)(x) = D phi(x)^T lambda(phi(x)).
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    form = kind if isinstance(kind, OneForm) else primitive(kind)
    sample = phi.evaluate(probes, jacobian=True)
    pullback = np.einsum("nij,ni->nj", sample.jacobians, form(sample.points)) - form(probes)
    gradient = central_gradient(lambda z: phi.potential(kind, z), probes, step)
    return float(np.max(np.linalg.norm(gradient - pullback, axis=1), initial=0.0))
