"""
Linear symplectic algebra on R^{2n}.

Coordinates are ordered (x_1, ..., x_n, y_1, ..., y_n) and the symplectic form
is omega = sum_i dx_i ^ dy_i, so omega(u, v) = u^T Omega v with
Omega = [[0, I], [-I, 0]].

Hamiltonian vector fields follow iota_{X_H} omega = dH. In these coordinates
X_H = Omega grad H, which for n = 1 reads X = (H_y, -H_x). Sign conventions
vary across the literature; this one is used everywhere in the package.
"""
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from calabi_lab.utils.exceptions import DimensionMismatchError

if TYPE_CHECKING:
    from calabi_lab.core.geometry.fields import TimeDepField


@lru_cache(maxsize=None)
def _omega(n: int) -> np.ndarray:
    eye = np.eye(n)
    zero = np.zeros((n, n))
    matrix = np.block([[zero, eye], [-eye, zero]])
    matrix.setflags(write=False)
    return matrix


def omega_matrix(n: int) -> np.ndarray:
    """The standard 2n x 2n matrix Omega (read-only)"""
    if n < 1:
        raise DimensionMismatchError(f"half-dimension must be positive, got {n}")
    return _omega(n)


def half_dimension(*arrays: np.ndarray) -> int:
    """Common n of arrays whose last axis has length 2n"""
    sizes = {np.shape(a)[-1] if np.ndim(a) else 1 for a in arrays}
    if len(sizes) != 1:
        raise DimensionMismatchError(f"vectors have different lengths: {sorted(sizes)}")
    size = sizes.pop()
    if size % 2 or size == 0:
        raise DimensionMismatchError(f"vector length {size} is not a positive even number")
    return size // 2


def omega_pairing(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """
    omega(u, v) = sum_i (u_{x_i} v_{y_i} - u_{y_i} v_{x_i})

    Accepts single vectors or broadcastable (..., 2n) batches.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = half_dimension(u, v)
    result = np.sum(u[..., :n] * v[..., n:] - u[..., n:] * v[..., :n], axis=-1)
    return result if np.ndim(result) else float(result)


def pairing(covector: np.ndarray, vector: np.ndarray) -> np.ndarray:
    """<covector, vector>"""
    covector = np.asarray(covector, dtype=float)
    vector = np.asarray(vector, dtype=float)
    half_dimension(covector, vector)
    result = np.sum(covector * vector, axis=-1)
    return result if np.ndim(result) else float(result)


def symplectic_defect(matrices: np.ndarray) -> float:
    """max over the batch of ||M^T Omega M - Omega|| (spectral norm)"""
    matrices = np.asarray(matrices, dtype=float)
    if matrices.ndim == 2:
        matrices = matrices[None]
    n = half_dimension(matrices[0, 0])
    omega = omega_matrix(n)
    defect = np.swapaxes(matrices, 1, 2) @ omega @ matrices - omega
    return float(np.max(np.linalg.norm(defect, ord=2, axis=(1, 2)), initial=0.0))


def vector_field_from_gradient(gradient: np.ndarray) -> np.ndarray:
    """X = Omega grad H for a (..., 2n) batch of gradients"""
    n = half_dimension(gradient)
    return np.asarray(gradient) @ omega_matrix(n).T


def hamiltonian_vector_field(H: "TimeDepField", t: float, p: np.ndarray) -> np.ndarray:
    """
    The unique X with omega(X, .) = dH_t at p

    Args:
        H: time-dependent Hamiltonian
        t: time in [0, 1]
        p: point or (N, 2n) batch

    Returns:
        Vector(s) of the same shape as p; zero outside the support of H
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != H.size:
        raise DimensionMismatchError(f"point has length {p.shape[-1]}, Hamiltonian lives in R^{H.size}")
    return vector_field_from_gradient(H.gradient(t, p))
