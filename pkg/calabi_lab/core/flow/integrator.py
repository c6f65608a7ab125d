"""
Fixed-step integration of Hamiltonian isotopies.

The default scheme is the implicit midpoint rule, which is symplectic for
every Hamiltonian. It is run on whole batches of initial points at once:

    z1 = z0 + h X(t + h/2, (z0 + z1)/2)

solved by Newton with Jacobian I - (h/2) DX(m). Jacobians of the time-one map
are propagated with the exact derivative of the discrete step,
J <- (I - A)^{-1} (I + A) J with A = (h/2) DX(m), so they are symplectic up to
roundoff. The potential f = int (lambda(X) + H) o phi^t dt is accumulated with
the same midpoint evaluations, which makes df = phi*lambda - lambda hold
exactly for the discrete map when lambda is linear.

RK4 is kept for cross-validation only.
"""
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from calabi_lab.core.geometry.fields import TimeDepField, sampled_hessian_bound
from calabi_lab.core.geometry.forms import OneForm, liouville
from calabi_lab.core.geometry.symplectic import omega_matrix, pairing
from calabi_lab.models.configs import IntegratorConfig, PrimitiveKind, Scheme
from calabi_lab.utils.exceptions import DimensionMismatchError, IntegrationError, ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

Primitive = Union[PrimitiveKind, str, OneForm]


class FlowSample(BaseModel):
    """Everything one integration pass produces for a batch of start points"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    start: np.ndarray
    points: np.ndarray
    jacobians: Optional[np.ndarray] = None
    potentials: Dict[str, np.ndarray] = {}
    excursion: Optional[np.ndarray] = None
    confined: Optional[np.ndarray] = None


def time_segments(hamiltonian: TimeDepField, steps: int, t_final: float) -> List[Tuple[float, float, int]]:
    """
    Split [0, t_final] at the Hamiltonian's breakpoints

    Each segment gets steps proportional to its length, at least one.
    """
    cuts = [0.0] + [b for b in hamiltonian.breakpoints if 0.0 < b < t_final] + [t_final]
    segments = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            segments.append((a, b, max(1, int(round(steps * (b - a))))))
    return segments


def _builtin_kind(primitive: Primitive) -> PrimitiveKind:
    if isinstance(primitive, OneForm):
        return primitive.base
    return PrimitiveKind(primitive)


def primitive_key(primitive: Primitive) -> str:
    return primitive.label if isinstance(primitive, OneForm) else PrimitiveKind(primitive).value


class _Integrand:
    """lambda(X_H) + H at given points, per built-in primitive"""

    def __init__(self, hamiltonian: TimeDepField, kinds: Sequence[PrimitiveKind]):
        self.hamiltonian = hamiltonian
        self.kinds = list(kinds)
        self.omega = omega_matrix(hamiltonian.n)

    def __call__(self, t: float, z: np.ndarray) -> Dict[PrimitiveKind, np.ndarray]:
        if not self.kinds:
            return {}
        field = self.hamiltonian.gradient(t, z) @ self.omega.T
        value = self.hamiltonian.value(t, z)
        return {kind: pairing(liouville(kind, z), field) + value for kind in self.kinds}


def _midpoint_step(
    hamiltonian: TimeDepField,
    z0: np.ndarray,
    tm: float,
    h: float,
    cfg: IntegratorConfig,
    step_index: int,
    start_gradient: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One implicit midpoint step for a batch

    Returns:
        (z1, midpoint, Hessian of H at the midpoint)
    """
    omega = omega_matrix(hamiltonian.n)
    eye = np.eye(hamiltonian.size)
    if start_gradient is None:
        start_gradient = hamiltonian.gradient(tm, z0)
    z1 = z0 + h * start_gradient @ omega.T
    residual = np.inf
    for _ in range(cfg.newton_max_iter + 1):
        mid = 0.5 * (z0 + z1)
        grad, hess = hamiltonian.gradient_hessian(tm, mid)
        F = z1 - z0 - h * grad @ omega.T
        residual = float(np.max(np.abs(F), initial=0.0))
        if residual <= cfg.newton_tol:
            return z1, mid, hess
        A = 0.5 * h * (omega[None] @ hess)
        z1 = z1 - np.linalg.solve(eye[None] - A, F[..., None])[..., 0]
    logger.error("Implicit midpoint Newton failed", step=step_index, residual=residual)
    raise IntegrationError("implicit midpoint Newton did not converge", residual, step_index)


def _integrate_midpoint(
    hamiltonian: TimeDepField,
    x0: np.ndarray,
    cfg: IntegratorConfig,
    t_final: float,
    with_jacobian: bool,
    kinds: Sequence[PrimitiveKind],
    region: Optional[Callable[[np.ndarray], np.ndarray]],
) -> FlowSample:
    size = hamiltonian.size
    support = hamiltonian.support
    omega = omega_matrix(hamiltonian.n)
    eye = np.eye(size)
    integrand = _Integrand(hamiltonian, kinds)

    z = x0.copy()
    jac = np.broadcast_to(eye, (len(z), size, size)).copy() if with_jacobian else None
    potentials = {kind: np.zeros(len(z)) for kind in kinds}
    excursion = np.zeros(len(z))
    start_region = region(x0) if region is not None else None
    confined = np.ones(len(z), dtype=bool) if region is not None else None

    step_index = 0
    for a, b, count in time_segments(hamiltonian, cfg.steps, t_final):
        h = (b - a) / count
        for i in range(count):
            t0 = a + i * h
            tm = t0 + 0.5 * h
            active = support.contains(z)
            start_gradient = None
            if hamiltonian.autonomous and np.any(active):
                # stationary points of an autonomous field are fixed by the scheme,
                # their Jacobian still follows the linearized flow
                idx = np.flatnonzero(active)
                gradient = hamiltonian.gradient(tm, z[idx])
                moving = np.any(gradient != 0.0, axis=1)
                resting = idx[~moving]
                active[resting] = False
                start_gradient = gradient[moving]
                if jac is not None and len(resting):
                    A = 0.5 * h * (omega[None] @ hamiltonian.hessian(tm, z[resting]))
                    jac[resting] = np.linalg.solve(eye[None] - A, (eye[None] + A) @ jac[resting])
            mid = z.copy()
            if np.any(active):
                z_new, mid_active, hess = _midpoint_step(
                    hamiltonian, z[active], tm, h, cfg, step_index, start_gradient
                )
                if jac is not None:
                    A = 0.5 * h * (omega[None] @ hess)
                    jac[active] = np.linalg.solve(eye[None] - A, (eye[None] + A) @ jac[active])
                z[active] = z_new
                mid[active] = mid_active
            for kind, increment in integrand(tm, mid).items():
                potentials[kind] += h * increment
            excursion = np.maximum(excursion, np.linalg.norm(z - x0, axis=1))
            if confined is not None:
                confined &= np.all(region(z) == start_region, axis=1)
            step_index += 1

    return FlowSample(
        start=x0,
        points=z,
        jacobians=jac,
        potentials={kind.value: value for kind, value in potentials.items()},
        excursion=excursion,
        confined=confined,
    )


def _integrate_rk4(
    hamiltonian: TimeDepField,
    x0: np.ndarray,
    cfg: IntegratorConfig,
    t_final: float,
    with_jacobian: bool,
    kinds: Sequence[PrimitiveKind],
    region: Optional[Callable[[np.ndarray], np.ndarray]],
) -> FlowSample:
    size = hamiltonian.size
    omega = omega_matrix(hamiltonian.n)
    integrand = _Integrand(hamiltonian, kinds)

    def rhs(t, z, jac):
        dz = hamiltonian.gradient(t, z) @ omega.T
        dj = omega[None] @ hamiltonian.hessian(t, z) @ jac if jac is not None else None
        return dz, dj, integrand(t, z)

    z = x0.copy()
    jac = np.broadcast_to(np.eye(size), (len(z), size, size)).copy() if with_jacobian else None
    potentials = {kind: np.zeros(len(z)) for kind in kinds}
    excursion = np.zeros(len(z))
    start_region = region(x0) if region is not None else None
    confined = np.ones(len(z), dtype=bool) if region is not None else None

    for a, b, count in time_segments(hamiltonian, cfg.steps, t_final):
        h = (b - a) / count
        for i in range(count):
            t0 = a + i * h
            k1 = rhs(t0, z, jac)
            k2 = rhs(t0 + h / 2, z + h / 2 * k1[0], None if jac is None else jac + h / 2 * k1[1])
            k3 = rhs(t0 + h / 2, z + h / 2 * k2[0], None if jac is None else jac + h / 2 * k2[1])
            k4 = rhs(t0 + h, z + h * k3[0], None if jac is None else jac + h * k3[1])
            z = z + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            if jac is not None:
                jac = jac + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            for kind in kinds:
                potentials[kind] += h / 6 * (k1[2][kind] + 2 * k2[2][kind] + 2 * k3[2][kind] + k4[2][kind])
            excursion = np.maximum(excursion, np.linalg.norm(z - x0, axis=1))
            if confined is not None:
                confined &= np.all(region(z) == start_region, axis=1)

    return FlowSample(
        start=x0,
        points=z,
        jacobians=jac,
        potentials={kind.value: value for kind, value in potentials.items()},
        excursion=excursion,
        confined=confined,
    )


def integrate_batch(
    hamiltonian: TimeDepField,
    x0: np.ndarray,
    cfg: IntegratorConfig,
    t_final: float = 1.0,
    with_jacobian: bool = False,
    kinds: Sequence[PrimitiveKind] = (),
    region: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> FlowSample:
    """
    Integrate a batch of start points along the isotopy of H

    Args:
        hamiltonian: the generating Hamiltonian
        x0: (N, 2n) start points
        cfg: scheme and step settings
        t_final: end time in [0, 1]
        with_jacobian: also propagate the variational equations
        kinds: built-in primitives whose potential is accumulated
        region: optional labelling of space (e.g. subcube index); the sample
            then reports whether each trajectory kept its start label

    Raises:
        IntegrationError: Newton failed in the implicit scheme
    """
    if not 0.0 <= t_final <= 1.0:
        raise ValidationError(f"t_final must lie in [0, 1], got {t_final}")
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    if x0.shape[1] != hamiltonian.size:
        raise DimensionMismatchError(f"points have length {x0.shape[1]}, Hamiltonian lives in R^{hamiltonian.size}")
    kinds = [PrimitiveKind(kind) for kind in kinds]
    if PrimitiveKind.CUSTOM in kinds:
        raise ValidationError("custom primitives are handled by FlowMap.potential")

    if hamiltonian.is_zero or t_final == 0.0:
        size = hamiltonian.size
        return FlowSample(
            start=x0,
            points=x0.copy(),
            jacobians=np.broadcast_to(np.eye(size), (len(x0), size, size)).copy() if with_jacobian else None,
            potentials={kind.value: np.zeros(len(x0)) for kind in kinds},
            excursion=np.zeros(len(x0)),
            confined=np.ones(len(x0), dtype=bool) if region is not None else None,
        )

    runner = _integrate_midpoint if cfg.scheme is Scheme.IMPLICIT_MIDPOINT else _integrate_rk4
    return runner(hamiltonian, x0, cfg, t_final, with_jacobian, kinds, region)


def integrate_flow(hamiltonian: TimeDepField, x0: np.ndarray, cfg: IntegratorConfig, t_final: float = 1.0) -> np.ndarray:
    """phi_H^{t_final}(x0) for a point or a batch"""
    single = np.ndim(x0) == 1
    points = integrate_batch(hamiltonian, x0, cfg, t_final).points
    return points[0] if single else points


class FlowMap:
    """
    A realized Hamiltonian diffeomorphism phi_H^{t_final}

    Evaluation integrates on demand; the map is identity outside the support
    box of H.
    """

    def __init__(self, hamiltonian: TimeDepField, config: IntegratorConfig, t_final: float = 1.0):
        self.hamiltonian = hamiltonian
        self.config = config
        self.t_final = t_final

    @property
    def support(self):
        return self.hamiltonian.support

    @property
    def size(self) -> int:
        return self.hamiltonian.size

    @property
    def n(self) -> int:
        return self.hamiltonian.n

    @property
    def provenance(self) -> Dict[str, object]:
        return {
            "hamiltonian": type(self.hamiltonian).__name__,
            "scheme": self.config.scheme.value,
            "steps": self.config.steps,
            "t_final": self.t_final,
        }

    def evaluate(
        self,
        x: np.ndarray,
        jacobian: bool = False,
        primitives: Sequence[Primitive] = (),
        region: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> FlowSample:
        """
        Integrate once and return points, Jacobians and potentials together

        Potentials of custom primitives lambda_0 + dg are obtained from the
        base potential as f_0 + g o phi - g.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        bases = sorted({_builtin_kind(p) for p in primitives}, key=lambda kind: kind.value)
        sample = integrate_batch(self.hamiltonian, x, self.config, self.t_final, jacobian, bases, region)
        for p in primitives:
            if isinstance(p, OneForm) and p.gauge is not None:
                shift = p.gauge.value(sample.points) - p.gauge.value(x)
                sample.potentials[p.label] = sample.potentials[p.base.value] + shift
        return sample

    def forward(self, x: np.ndarray) -> np.ndarray:
        single = np.ndim(x) == 1
        points = self.evaluate(x).points
        return points[0] if single else points

    __call__ = forward

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        single = np.ndim(x) == 1
        jac = self.evaluate(x, jacobian=True).jacobians
        return jac[0] if single else jac

    def potential(self, primitive: Primitive, x: np.ndarray) -> np.ndarray:
        """f_{lambda, phi} at x"""
        single = np.ndim(x) == 1
        values = self.evaluate(x, primitives=[primitive]).potentials[primitive_key(primitive)]
        return float(values[0]) if single else values


def realize_time_one(hamiltonian: TimeDepField, cfg: IntegratorConfig) -> FlowMap:
    """The time-one map of H, with Jacobians from the variational equations"""
    return FlowMap(hamiltonian, cfg, 1.0)


def stiffness_steps(
    hamiltonian: TimeDepField,
    cfg: IntegratorConfig,
    max_step_stiffness: float,
    probes: Optional[np.ndarray] = None,
) -> IntegratorConfig:
    """
    Raise the step count until h * Lip(X_H) <= max_step_stiffness

    Lip(X_H) is the analytic Hessian bound when the Hamiltonian provides one,
    otherwise the largest Hessian norm over `probes` at a few times.
    """
    bound = hamiltonian.hessian_bound()
    if bound is None:
        if probes is None:
            return cfg
        bound = sampled_hessian_bound(hamiltonian, probes, np.linspace(0.0, 1.0, 9))
    needed = int(math.ceil(bound / max_step_stiffness))
    if needed <= cfg.steps:
        return cfg
    logger.info("Integrator steps raised for stiffness", requested=cfg.steps, steps=needed, lipschitz=bound)
    return cfg.model_copy(update={"steps": needed})
