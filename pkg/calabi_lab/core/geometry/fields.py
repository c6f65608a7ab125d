"""
Smooth, compactly supported scalar fields on R^{2n} and Hamiltonians on
[0, 1] x R^{2n}.

Every evaluator accepts a single point (2n,) or a batch (N, 2n) and returns a
matching scalar / array. Gradients and Hessians are analytic where the field
structure allows and fall back to central differences otherwise.
"""
from abc import ABC, abstractmethod
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from calabi_lab.core.geometry.differences import central_gradient, central_jacobian
from calabi_lab.models.geometry import Box, TimeProfile
from calabi_lab.utils.exceptions import DimensionMismatchError, PlateauInfeasibleError, ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

# exp(-1/t) underflows below this
_CUTOFF_FLOOR = 1.0 / 700.0


def _exp_cutoff(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """e(t) = exp(-1/t) for t > 0, else 0, with its first two derivatives"""
    t = np.asarray(t, dtype=float)
    positive = t > _CUTOFF_FLOOR
    safe = np.where(positive, t, 1.0)
    e = np.where(positive, np.exp(-1.0 / safe), 0.0)
    e1 = np.where(positive, e / safe ** 2, 0.0)
    e2 = np.where(positive, e * (1.0 / safe ** 4 - 2.0 / safe ** 3), 0.0)
    return e, e1, e2


def smooth_step(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The C-infinity transition s(t) = e(t) / (e(t) + e(1 - t))

    s = 0 for t <= 0 and s = 1 for t >= 1.

    Returns:
        (s, s', s'')
    """
    a, a1, a2 = _exp_cutoff(t)
    b, b1, b2 = _exp_cutoff(1.0 - np.asarray(t, dtype=float))
    b1 = -b1
    total = a + b
    numerator = a1 * b - a * b1
    s = a / total
    s1 = numerator / total ** 2
    s2 = (a2 * b - a * b2) / total ** 2 - 2.0 * numerator * (a1 + b1) / total ** 3
    return s, s1, s2


def _step_constants() -> Tuple[float, float]:
    _, s1, s2 = smooth_step(np.linspace(0.0, 1.0, 20001))
    return float(np.max(np.abs(s1))), float(np.max(np.abs(s2)))


STEP_MAX_SLOPE, STEP_MAX_CURVATURE = _step_constants()


def _axis_profile(x: np.ndarray, a: np.ndarray, b: np.ndarray, w: np.ndarray):
    """psi(x) = s((x - a)/w) s((b - x)/w) per axis, with derivatives"""
    s_a, s1_a, s2_a = smooth_step((x - a) / w)
    s_b, s1_b, s2_b = smooth_step((b - x) / w)
    psi = s_a * s_b
    dpsi = (s1_a * s_b - s_a * s1_b) / w
    d2psi = (s2_a * s_b - 2.0 * s1_a * s1_b + s_a * s2_b) / w ** 2
    return psi, dpsi, d2psi


def _tensor_value(psi: np.ndarray, scale: float) -> np.ndarray:
    return scale * np.prod(psi, axis=1)


def _tensor_gradient(psi: np.ndarray, dpsi: np.ndarray, scale: float) -> np.ndarray:
    dim = psi.shape[1]
    others = np.stack([np.prod(np.delete(psi, j, axis=1), axis=1) for j in range(dim)], axis=1)
    return scale * dpsi * others


def _tensor_hessian(psi: np.ndarray, dpsi: np.ndarray, d2psi: np.ndarray, scale: float) -> np.ndarray:
    count, dim = psi.shape
    hess = np.empty((count, dim, dim))
    for i in range(dim):
        hess[:, i, i] = scale * d2psi[:, i] * np.prod(np.delete(psi, i, axis=1), axis=1)
        for j in range(i + 1, dim):
            rest = np.prod(np.delete(psi, [i, j], axis=1), axis=1)
            hess[:, i, j] = hess[:, j, i] = scale * dpsi[:, i] * dpsi[:, j] * rest
    return hess


def _tensor_hessian_bound(widths: np.ndarray, scale: float) -> float:
    """Frobenius bound on the Hessian of scale * prod psi_j with transition widths w_j"""
    inv = 1.0 / np.asarray(widths, dtype=float)
    bound = np.outer(inv, inv) * STEP_MAX_SLOPE ** 2
    np.fill_diagonal(bound, STEP_MAX_CURVATURE * inv ** 2)
    return float(abs(scale) * np.linalg.norm(bound))


def _as_batch(z: np.ndarray, size: int) -> Tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    batch = np.atleast_2d(z)
    if batch.shape[-1] != size:
        raise DimensionMismatchError(f"point has length {batch.shape[-1]}, field lives in R^{size}")
    return batch, single


def max_plateau_fraction(smoothing_floor: float, size: int) -> float:
    """Largest plateau volume fraction whose transition widths respect the floor"""
    return (1.0 - 2.0 * smoothing_floor) ** size


def feasible_plateau_fraction(target: float, smoothing_floor: float, size: int, policy: str = "clamp") -> float:
    """
    Plateau fraction to build for a requested target

    Raises:
        PlateauInfeasibleError: target exceeds the floor-limited maximum under the strict policy
    """
    if not 0.0 < target < 1.0:
        raise ValidationError(f"plateau fraction must lie in (0, 1), got {target}")
    achievable = max_plateau_fraction(smoothing_floor, size)
    if target <= achievable:
        return target
    if policy == "strict":
        raise PlateauInfeasibleError(target, achievable)
    logger.warning("Plateau fraction clamped", target=target, achieved=achievable, smoothing_floor=smoothing_floor)
    return achievable


# ----------------------------------------------------------------------------
# Scalar fields
# ----------------------------------------------------------------------------


class ScalarField(ABC):
    """Smooth function on R^{2n}; `support` is None when not compactly supported"""

    def __init__(self, size: int, support: Optional[Box]):
        if support is not None and support.size != size:
            raise DimensionMismatchError(f"support box lives in R^{support.size}, field in R^{size}")
        self.size = size
        self.support = support

    @property
    def n(self) -> int:
        return self.size // 2

    def value(self, z: np.ndarray):
        batch, single = _as_batch(z, self.size)
        out = self._value(batch)
        return float(out[0]) if single else out

    def gradient(self, z: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(z, self.size)
        out = self._gradient(batch)
        return out[0] if single else out

    def hessian(self, z: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(z, self.size)
        out = self._hessian(batch)
        return out[0] if single else out

    __call__ = value

    @abstractmethod
    def _value(self, z: np.ndarray) -> np.ndarray:
        ...

    def _gradient(self, z: np.ndarray) -> np.ndarray:
        return central_gradient(self._value, z)

    def _hessian(self, z: np.ndarray) -> np.ndarray:
        hess = central_jacobian(self._gradient, z)
        return 0.5 * (hess + np.swapaxes(hess, 1, 2))

    def _gradient_hessian(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self._gradient(z), self._hessian(z)

    def hessian_bound(self) -> Optional[float]:
        """Upper bound of the spectral norm of the Hessian, None if unknown"""
        return None


class _TensorBump(ScalarField):
    """height * prod_j psi_j(z_j) for per-axis profiles supplied by _profiles"""
    height: float
    widths: np.ndarray

    @abstractmethod
    def _profiles(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        ...

    def _value(self, z):
        psi, _, _ = self._profiles(z)
        return _tensor_value(psi, self.height)

    def _gradient(self, z):
        psi, dpsi, _ = self._profiles(z)
        return _tensor_gradient(psi, dpsi, self.height)

    def _hessian(self, z):
        return _tensor_hessian(*self._profiles(z), self.height)

    def _gradient_hessian(self, z):
        psi, dpsi, d2psi = self._profiles(z)
        return _tensor_gradient(psi, dpsi, self.height), _tensor_hessian(psi, dpsi, d2psi, self.height)

    def hessian_bound(self) -> float:
        return _tensor_hessian_bound(self.widths, self.height)


class PlateauBump(_TensorBump):
    """
    c * prod_j psi_j(z_j): equal to c on a centered sub-box of volume
    rho * vol(box), zero outside the box, between 0 and c in the transition
    shell
    """

    def __init__(self, box: Box, rho: float, height: float = 1.0, smoothing_floor: float = 0.02):
        super().__init__(box.size, box)
        if not 0.0 < rho < 1.0:
            raise ValidationError(f"plateau fraction must lie in (0, 1), got {rho}")
        achievable = max_plateau_fraction(smoothing_floor, box.size)
        if rho > achievable:
            raise PlateauInfeasibleError(rho, achievable)
        self.box = box
        self.rho = rho
        self.height = height
        self.smoothing_floor = smoothing_floor
        self.widths = box.sides * (1.0 - rho ** (1.0 / box.size)) / 2.0
        self._lo = box.lo
        self._hi = box.hi

    @property
    def plateau(self) -> Box:
        return Box(lower=tuple((self._lo + self.widths).tolist()), upper=tuple((self._hi - self.widths).tolist()))

    def _profiles(self, z):
        return _axis_profile(z, self._lo, self._hi, self.widths)


def plateau_bump(box: Box, rho: float, height: float = 1.0, smoothing_floor: float = 0.02) -> PlateauBump:
    """
    Smooth bump equal to `height` on a centered sub-box of volume fraction rho

    Raises:
        PlateauInfeasibleError: rho needs transition widths below smoothing_floor * side
    """
    return PlateauBump(box, rho, height, smoothing_floor)


class TiledPlateauField(_TensorBump):
    """
    Plateau bumps on each of the k^{2n} equal subcubes of a box

    Evaluation looks up the subcube of each point, so the cost does not grow
    with k.
    """

    def __init__(self, box: Box, k: int, rho: float, height: float = 1.0, smoothing_floor: float = 0.2):
        super().__init__(box.size, box)
        if k < 1:
            raise ValidationError(f"subdivision count must be positive, got {k}")
        achievable = max_plateau_fraction(smoothing_floor, box.size)
        if not 0.0 < rho <= achievable:
            raise PlateauInfeasibleError(rho, achievable)
        self.box = box
        self.k = k
        self.rho = rho
        self.height = height
        self.cell = box.sides / k
        self.widths = self.cell * (1.0 - rho ** (1.0 / box.size)) / 2.0
        self._lo = box.lo
        self._hi = box.hi

    def cell_index(self, z: np.ndarray) -> np.ndarray:
        """Integer subcube index per axis, (N, 2n)"""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return np.clip(np.floor((z - self._lo) / self.cell), 0, self.k - 1).astype(int)

    def _profiles(self, z):
        a = self._lo + self.cell_index(z) * self.cell
        psi, dpsi, d2psi = _axis_profile(z, a, a + self.cell, self.widths)
        inside = np.all((z >= self._lo) & (z <= self._hi), axis=1)[:, None]
        return psi * inside, dpsi * inside, d2psi * inside


class QuadraticWell(ScalarField):
    """1/2 |z - center|^2, not compactly supported on its own"""

    def __init__(self, center: Sequence[float]):
        center = np.asarray(center, dtype=float)
        super().__init__(center.size, None)
        self.center = center

    def _value(self, z):
        return 0.5 * np.sum((z - self.center) ** 2, axis=1)

    def _gradient(self, z):
        return z - self.center

    def _hessian(self, z):
        return np.broadcast_to(np.eye(self.size), (z.shape[0], self.size, self.size)).copy()

    def hessian_bound(self) -> float:
        return 1.0


class ProductField(ScalarField):
    """f * g with product-rule derivatives"""

    def __init__(self, f: ScalarField, g: ScalarField):
        if f.size != g.size:
            raise DimensionMismatchError("factors live in different dimensions")
        if f.support is None or g.support is None:
            support = f.support or g.support
        else:
            support = f.support.union(g.support)
        super().__init__(f.size, support)
        self.f = f
        self.g = g

    def _value(self, z):
        return self.f._value(z) * self.g._value(z)

    def _gradient(self, z):
        return self.f._gradient(z) * self.g._value(z)[:, None] + self.f._value(z)[:, None] * self.g._gradient(z)

    def _hessian(self, z):
        df = self.f._gradient(z)
        dg = self.g._gradient(z)
        cross = df[:, :, None] * dg[:, None, :]
        return (
            self.f._hessian(z) * self.g._value(z)[:, None, None]
            + cross
            + np.swapaxes(cross, 1, 2)
            + self.f._value(z)[:, None, None] * self.g._hessian(z)
        )


class CallableField(ScalarField):
    """Wraps a batched callable; values are forced to zero outside the support box"""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], support: Box, gradient: Optional[Callable] = None):
        super().__init__(support.size, support)
        self._fn = fn
        self._grad_fn = gradient

    def _value(self, z):
        return np.where(self.support.contains(z), np.asarray(self._fn(z), dtype=float), 0.0)

    def _gradient(self, z):
        if self._grad_fn is None:
            return super()._gradient(z)
        return np.where(self.support.contains(z)[:, None], np.asarray(self._grad_fn(z), dtype=float), 0.0)


def rotation_well(box: Box, rho: float, rate: float, smoothing_floor: float = 0.02) -> ProductField:
    """
    1/2 c |z - center|^2 times a unit plateau bump

    On the plateau the flow is a rigid rotation by angle -c about the box center.
    """
    return ProductField(QuadraticWell(box.center), PlateauBump(box, rho, rate, smoothing_floor))


# ----------------------------------------------------------------------------
# Time-dependent Hamiltonians
# ----------------------------------------------------------------------------


class TimeDepField(ABC):
    """
    H(t, z) on [0, 1] x R^{2n}, zero outside [0, 1] x support

    `breakpoints` lists interior times where H may fail to be smooth in t;
    integrators and quadratures split there.
    """

    autonomous: bool = False
    is_zero: bool = False

    def __init__(self, size: int, support: Optional[Box]):
        self.size = size
        self.support = support

    @property
    def n(self) -> int:
        return self.size // 2

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def _in_time(self, t: float) -> bool:
        return 0.0 <= t <= 1.0

    def value(self, t: float, z: np.ndarray):
        batch, single = _as_batch(z, self.size)
        out = self._value(t, batch) if self._in_time(t) else np.zeros(batch.shape[0])
        return float(out[0]) if single else out

    def gradient(self, t: float, z: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(z, self.size)
        out = self._gradient(t, batch) if self._in_time(t) else np.zeros_like(batch)
        return out[0] if single else out

    def hessian(self, t: float, z: np.ndarray) -> np.ndarray:
        batch, single = _as_batch(z, self.size)
        if self._in_time(t):
            out = self._hessian(t, batch)
        else:
            out = np.zeros((batch.shape[0], self.size, self.size))
        return out[0] if single else out

    def gradient_hessian(self, t: float, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Gradient and Hessian of an (N, 2n) batch from one field evaluation where possible"""
        batch, _ = _as_batch(z, self.size)
        if self._in_time(t):
            return self._gradient_hessian(t, batch)
        return np.zeros_like(batch), np.zeros((batch.shape[0], self.size, self.size))

    __call__ = value

    @abstractmethod
    def _value(self, t: float, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _gradient(self, t: float, z: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _hessian(self, t: float, z: np.ndarray) -> np.ndarray:
        ...

    def _gradient_hessian(self, t: float, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self._gradient(t, z), self._hessian(t, z)

    def hessian_bound(self) -> Optional[float]:
        """sup over t and z of the Hessian spectral norm, None if unknown"""
        return None

    def __mul__(self, factor: float) -> "TimeDepField":
        return ScaledHamiltonian(self, factor)

    __rmul__ = __mul__

    def __add__(self, other: "TimeDepField") -> "TimeDepField":
        return Superposition([self, other])


class ZeroHamiltonian(TimeDepField):
    autonomous = True
    is_zero = True

    def __init__(self, support: Box):
        super().__init__(support.size, support)

    def _value(self, t, z):
        return np.zeros(z.shape[0])

    def _gradient(self, t, z):
        return np.zeros_like(z)

    def _hessian(self, t, z):
        return np.zeros((z.shape[0], self.size, self.size))

    def hessian_bound(self) -> float:
        return 0.0


class Autonomous(TimeDepField):
    """H(t, z) = F(z)"""
    autonomous = True

    def __init__(self, field: ScalarField):
        if field.support is None:
            raise ValidationError("Hamiltonians must be compactly supported")
        super().__init__(field.size, field.support)
        self.field = field

    def _value(self, t, z):
        return self.field._value(z)

    def _gradient(self, t, z):
        return self.field._gradient(z)

    def _hessian(self, t, z):
        return self.field._hessian(z)

    def _gradient_hessian(self, t, z):
        return self.field._gradient_hessian(z)

    def hessian_bound(self) -> Optional[float]:
        return self.field.hessian_bound()


class Modulated(TimeDepField):
    """H(t, z) = a(t) F(z)"""

    def __init__(self, field: ScalarField, profile: TimeProfile):
        if field.support is None:
            raise ValidationError("Hamiltonians must be compactly supported")
        super().__init__(field.size, field.support)
        self.field = field
        self.profile = profile
        self.autonomous = profile.is_constant

    def _value(self, t, z):
        return self.profile(t) * self.field._value(z)

    def _gradient(self, t, z):
        return self.profile(t) * self.field._gradient(z)

    def _hessian(self, t, z):
        return self.profile(t) * self.field._hessian(z)

    def _gradient_hessian(self, t, z):
        amplitude = self.profile(t)
        grad, hess = self.field._gradient_hessian(z)
        return amplitude * grad, amplitude * hess

    def hessian_bound(self) -> Optional[float]:
        bound = self.field.hessian_bound()
        return None if bound is None else self.profile.max_abs() * bound


class ScaledHamiltonian(TimeDepField):
    """c * H"""

    def __init__(self, hamiltonian: TimeDepField, factor: float):
        super().__init__(hamiltonian.size, hamiltonian.support)
        self.hamiltonian = hamiltonian
        self.factor = float(factor)
        self.autonomous = hamiltonian.autonomous
        self.is_zero = hamiltonian.is_zero or self.factor == 0.0

    @property
    def breakpoints(self):
        return self.hamiltonian.breakpoints

    def _value(self, t, z):
        return self.factor * self.hamiltonian._value(t, z)

    def _gradient(self, t, z):
        return self.factor * self.hamiltonian._gradient(t, z)

    def _hessian(self, t, z):
        return self.factor * self.hamiltonian._hessian(t, z)

    def _gradient_hessian(self, t, z):
        grad, hess = self.hamiltonian._gradient_hessian(t, z)
        return self.factor * grad, self.factor * hess

    def hessian_bound(self) -> Optional[float]:
        bound = self.hamiltonian.hessian_bound()
        return None if bound is None else abs(self.factor) * bound


class Superposition(TimeDepField):
    """Sum of Hamiltonians; the support is the union box"""

    def __init__(self, terms: Iterable[TimeDepField]):
        terms = list(terms)
        if not terms:
            raise ValidationError("a superposition needs at least one term")
        if len({term.size for term in terms}) != 1:
            raise DimensionMismatchError("superposed Hamiltonians live in different dimensions")
        support = terms[0].support
        for term in terms[1:]:
            support = support.union(term.support)
        super().__init__(terms[0].size, support)
        self.terms: List[TimeDepField] = terms
        self.autonomous = all(term.autonomous for term in terms)
        self.is_zero = all(term.is_zero for term in terms)

    @property
    def breakpoints(self):
        return tuple(sorted({b for term in self.terms for b in term.breakpoints}))

    def _value(self, t, z):
        return sum(term._value(t, z) for term in self.terms)

    def _gradient(self, t, z):
        return sum(term._gradient(t, z) for term in self.terms)

    def _hessian(self, t, z):
        return sum(term._hessian(t, z) for term in self.terms)

    def _gradient_hessian(self, t, z):
        parts = [term._gradient_hessian(t, z) for term in self.terms]
        return sum(grad for grad, _ in parts), sum(hess for _, hess in parts)

    def hessian_bound(self) -> Optional[float]:
        bounds = [term.hessian_bound() for term in self.terms]
        return None if any(b is None for b in bounds) else float(sum(bounds))


def _identity_time(s: float) -> Tuple[float, float]:
    return s, 1.0


def _smooth_time(s: float) -> Tuple[float, float]:
    """beta(s) = s - sin(2 pi s)/(2 pi): flat at both ends so the concatenation is smooth in t"""
    return s - np.sin(2.0 * np.pi * s) / (2.0 * np.pi), 1.0 - np.cos(2.0 * np.pi * s)


class Concatenation(TimeDepField):
    """
    K on [0, 1/2] at double speed, then H on [1/2, 1]

    The time-one map is phi_H o phi_K and the space-time integral is the sum
    of the two integrals. With smooth=True the halves are reparametrized by a
    map with vanishing speed at both ends.
    """

    def __init__(self, first_applied: TimeDepField, second_applied: TimeDepField, smooth: bool = False):
        if first_applied.size != second_applied.size:
            raise DimensionMismatchError("concatenated Hamiltonians live in different dimensions")
        super().__init__(first_applied.size, first_applied.support.union(second_applied.support))
        self.first = first_applied
        self.second = second_applied
        self.smooth = smooth
        self._time = _smooth_time if smooth else _identity_time
        self.is_zero = first_applied.is_zero and second_applied.is_zero

    def _inverse_time(self, b: float) -> float:
        if not self.smooth:
            return b
        return brentq(lambda s: self._time(s)[0] - b, 0.0, 1.0, xtol=1e-15)

    @property
    def breakpoints(self):
        times = {0.5}
        times.update(0.5 * self._inverse_time(b) for b in self.first.breakpoints)
        times.update(0.5 + 0.5 * self._inverse_time(b) for b in self.second.breakpoints)
        return tuple(sorted(times))

    def _select(self, t: float):
        if t < 0.5:
            s, speed = self._time(2.0 * t)
            return self.first, s, 2.0 * speed
        s, speed = self._time(2.0 * t - 1.0)
        return self.second, s, 2.0 * speed

    def _value(self, t, z):
        hamiltonian, s, speed = self._select(t)
        return speed * hamiltonian._value(s, z)

    def _gradient(self, t, z):
        hamiltonian, s, speed = self._select(t)
        return speed * hamiltonian._gradient(s, z)

    def _hessian(self, t, z):
        hamiltonian, s, speed = self._select(t)
        return speed * hamiltonian._hessian(s, z)

    def _gradient_hessian(self, t, z):
        hamiltonian, s, speed = self._select(t)
        grad, hess = hamiltonian._gradient_hessian(s, z)
        return speed * grad, speed * hess

    def hessian_bound(self) -> Optional[float]:
        bounds = [self.first.hessian_bound(), self.second.hessian_bound()]
        if any(b is None for b in bounds):
            return None
        return (4.0 if self.smooth else 2.0) * max(bounds)


def sampled_hessian_bound(hamiltonian: TimeDepField, points: np.ndarray, times: Sequence[float]) -> float:
    """Max of the Hessian spectral norm over sample points and times (an under-estimate)"""
    bound = 0.0
    for t in times:
        hess = hamiltonian.hessian(float(t), points)
        bound = max(bound, float(np.max(np.linalg.norm(hess, ord=2, axis=(1, 2)), initial=0.0)))
    return bound
