"""
Central finite differences for vectorized evaluators.

Every evaluator takes an (N, d) batch and returns an (N, ...) batch. Steps are
h_i = step * max(1, |x_i|), which keeps truncation and roundoff balanced at
double precision for coordinates of order one and above.
"""
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-5


def step_sizes(points: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    return step * np.maximum(1.0, np.abs(points))


def central_jacobian(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """
    Derivative of a batched evaluator by central differences

    Args:
        fn: maps (N, d) to (N, ...)
        points: (N, d) evaluation points
        step: relative step

    Returns:
        (N, ..., d) array; the last axis indexes the differentiation direction
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    count, dim = points.shape
    h = step_sizes(points, step)
    shift = h[:, :, None] * np.eye(dim)[None, :, :]
    plus = (points[:, None, :] + shift).reshape(count * dim, dim)
    minus = (points[:, None, :] - shift).reshape(count * dim, dim)
    f_plus = np.asarray(fn(plus), dtype=float)
    f_minus = np.asarray(fn(minus), dtype=float)
    tail = f_plus.shape[1:]
    f_plus = f_plus.reshape(count, dim, *tail)
    f_minus = f_minus.reshape(count, dim, *tail)
    denominator = (2.0 * h).reshape(count, dim, *([1] * len(tail)))
    return np.moveaxis((f_plus - f_minus) / denominator, 1, -1)


def central_gradient(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Gradient of a scalar evaluator (N, d) -> (N,), returned as (N, d)"""
    return central_jacobian(fn, points, step)


def exterior_derivative(form: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """
    d of a one-form given by its covector evaluator

    Returns the (N, d, d) antisymmetric matrices with entries
    (d lambda)_{ij} = d_i lambda_j - d_j lambda_i.
    """
    derivative = central_jacobian(form, points, step)  # [n, j, i] = d_i lambda_j
    return np.swapaxes(derivative, 1, 2) - derivative


def curl_residual(form: Callable[[np.ndarray], np.ndarray], points: np.ndarray, step: float = DEFAULT_STEP) -> float:
    """Largest entry of d(form) over the probes; zero for closed forms"""
    return float(np.max(np.abs(exterior_derivative(form, points, step)), initial=0.0))
