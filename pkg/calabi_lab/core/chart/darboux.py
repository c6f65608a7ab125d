"""
The global linear Darboux-Weinstein chart of the diagonal.

    Psi(X, Y) = (q, p),  q = (X + Y)/2,  p = Omega (X - Y)

Psi pulls dq ^ dp (= -d theta_can for theta_can = p dq) back to
omega (+) (-omega) on M x M, and sends the diagonal to the zero section.
Its inverse is X = q + u/2, Y = q - u/2 with u = -Omega p.
"""
from typing import Optional, Tuple

import numpy as np

from calabi_lab.core.geometry.differences import central_jacobian
from calabi_lab.core.geometry.symplectic import half_dimension, omega_matrix
from calabi_lab.models.geometry import ChartPoint


class LinearChart:
    """Psi with an optional sign flip of the fiber coordinate (a deliberately wrong chart)"""

    def __init__(self, flip_fiber: bool = False):
        self.flip_fiber = flip_fiber
        self._sign = -1.0 if flip_fiber else 1.0

    def forward(self, X: np.ndarray, Y: np.ndarray) -> ChartPoint:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        n = half_dimension(X, Y)
        return ChartPoint(q=0.5 * (X + Y), p=self._sign * (X - Y) @ omega_matrix(n).T)

    def inverse(self, c: ChartPoint) -> Tuple[np.ndarray, np.ndarray]:
        n = half_dimension(c.q)
        u = -self._sign * c.p @ omega_matrix(n).T
        return c.q + 0.5 * u, c.q - 0.5 * u

    def stacked(self, points: np.ndarray) -> np.ndarray:
        """(N, 4n) [X, Y] -> (N, 4n) [q, p]"""
        half = points.shape[-1] // 2
        return self.forward(points[..., :half], points[..., half:]).stacked()

    def __repr__(self) -> str:
        return f"LinearChart(flip_fiber={self.flip_fiber})"


DEFAULT_CHART = LinearChart()
CORRUPTED_CHART = LinearChart(flip_fiber=True)


def dw_chart(X: np.ndarray, Y: np.ndarray) -> ChartPoint:
    """Psi(X, Y); the diagonal X = Y lands on the zero section"""
    return DEFAULT_CHART.forward(X, Y)


def dw_chart_inverse(c: ChartPoint) -> Tuple[np.ndarray, np.ndarray]:
    return DEFAULT_CHART.inverse(c)


def target_form(n: int) -> np.ndarray:
    """Matrix of dq ^ dp in (q, p) coordinates, each block 2n x 2n"""
    return omega_matrix(2 * n)


def source_form(n: int) -> np.ndarray:
    """Matrix of omega (+) (-omega) in (X, Y) coordinates"""
    omega = omega_matrix(n)
    zero = np.zeros_like(omega)
    return np.block([[omega, zero], [zero, -omega]])


def chart_symplecticity_residual(
    n: int = 1,
    chart: Optional[LinearChart] = None,
    probes: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    count: int = 32,
    step: float = 1e-3,
) -> float:
    """
    max over probes of ||D Psi^T (dq ^ dp) D Psi - omega (+) (-omega)||

    D Psi comes from central differences; a linear chart is differentiated
    exactly by them, so the residual is pure roundoff.
    """
    chart = chart or DEFAULT_CHART
    if probes is None:
        rng = rng or np.random.default_rng(0)
        probes = rng.uniform(-1.0, 1.0, size=(count, 4 * n))
    derivative = central_jacobian(chart.stacked, probes, step)
    pulled = np.swapaxes(derivative, 1, 2) @ target_form(n) @ derivative
    defect = pulled - source_form(n)[None]
    return float(np.max(np.linalg.norm(defect, ord=2, axis=(1, 2)), initial=0.0))
