"""
The correction function R on T*Delta.

With theta_can = p dq and Lambda = lambda (+) (-lambda) on M x M, the one-form

    beta = -theta_can - (Psi^{-1})* Lambda

is closed, since Psi^{-1} carries d Lambda = omega (+) (-omega) to
dq ^ dp = -d theta_can. In chart coordinates, with (X, Y) = Psi^{-1}(q, p),

    beta_q = -p - (lambda(X) - lambda(Y))
    beta_p = -1/2 Omega (lambda(X) + lambda(Y))

beta vanishes on the zero section, so R(q, p), the integral of beta along the
fiber segment s -> (q, s p), satisfies R(q, 0) = 0 and dR = beta.
"""
from typing import Optional, Union

import numpy as np

from calabi_lab.core.chart.darboux import dw_chart_inverse
from calabi_lab.core.geometry.differences import central_gradient
from calabi_lab.core.geometry.forms import OneForm, primitive
from calabi_lab.core.geometry.symplectic import omega_matrix
from calabi_lab.models.configs import PrimitiveKind
from calabi_lab.models.geometry import ChartPoint

PrimitiveLike = Union[PrimitiveKind, str, OneForm]


def as_form(form: PrimitiveLike) -> OneForm:
    return form if isinstance(form, OneForm) else primitive(form)


def _split(stacked: np.ndarray) -> ChartPoint:
    half = stacked.shape[-1] // 2
    return ChartPoint(q=stacked[..., :half], p=stacked[..., half:])


def correction_form(form: PrimitiveLike, stacked: np.ndarray) -> np.ndarray:
    """
    beta at (N, 4n) points [q, p]

    Returns:
        (N, 4n) covectors [beta_q, beta_p]
    """
    form = as_form(form)
    stacked = np.atleast_2d(np.asarray(stacked, dtype=float))
    c = _split(stacked)
    n = c.q.shape[-1] // 2
    X, Y = dw_chart_inverse(c)
    lam_X = form(X)
    lam_Y = form(Y)
    beta_q = -c.p - (lam_X - lam_Y)
    beta_p = -0.5 * (lam_X + lam_Y) @ omega_matrix(n).T
    return np.concatenate([beta_q, beta_p], axis=-1)


def line_integral(form_fn, start: np.ndarray, end: np.ndarray, nodes: int) -> np.ndarray:
    """Gauss-Legendre integral of a covector field along straight segments start -> end"""
    start = np.atleast_2d(start)
    end = np.atleast_2d(end)
    s, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    direction = end - start
    total = np.zeros(len(start))
    for node, weight in zip(s, w):
        covector = form_fn(start + node * direction)
        total += weight * np.sum(covector * direction, axis=1)
    return total


def r_function(c: ChartPoint, path_nodes: int = 8, form: PrimitiveLike = PrimitiveKind.RADIAL):
    """
    R(q, p) by integrating beta along s -> (q, s p)

    Accepts a single chart point or a batch; returns a float or an (N,) array.
    """
    single = np.ndim(c.q) == 1
    stacked = np.atleast_2d(c.stacked())
    base = stacked.copy()
    base[:, stacked.shape[1] // 2:] = 0.0
    values = line_integral(lambda z: correction_form(form, z), base, stacked, path_nodes)
    return float(values[0]) if single else values


def r_closed_form(c: ChartPoint, form: PrimitiveLike = PrimitiveKind.RADIAL):
    """
    Closed forms of R

        radial   R = -1/2 <q, p>
        xdy      R = -<q_x, p_x>
        custom   R = R_0 - (g(X) - g(Y)) for lambda = lambda_0 + dg
    """
    form = as_form(form)
    q = np.atleast_2d(c.q)
    p = np.atleast_2d(c.p)
    n = q.shape[-1] // 2
    if form.base is PrimitiveKind.RADIAL:
        values = -0.5 * np.sum(q * p, axis=1)
    else:
        values = -np.sum(q[:, :n] * p[:, :n], axis=1)
    if form.gauge is not None:
        X, Y = dw_chart_inverse(ChartPoint(q=q, p=p))
        values = values - (form.gauge.value(X) - form.gauge.value(Y))
    return float(values[0]) if np.ndim(c.q) == 1 else values


def correction_residual(
    form: PrimitiveLike,
    probes: np.ndarray,
    path_nodes: int = 8,
    step: float = 1e-5,
) -> float:
    """max over (N, 4n) probes of |finite-difference dR - beta|"""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    gradient = central_gradient(lambda z: r_function(_split(z), path_nodes, form), probes, step)
    return float(np.max(np.abs(gradient - correction_form(form, probes)), initial=0.0))


def path_independence_residual(
    form: PrimitiveLike,
    probes: np.ndarray,
    path_nodes: int = 8,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """
    |straight fiber integral - dog-leg integral| between (q, 0) and (q, p)

    The dog-leg passes through a random point off the fiber.
    """
    rng = rng or np.random.default_rng(0)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    start = probes.copy()
    start[:, probes.shape[1] // 2:] = 0.0
    corner = 0.5 * (start + probes) + rng.normal(scale=0.5, size=probes.shape)

    def beta(z):
        return correction_form(form, z)

    straight = line_integral(beta, start, probes, path_nodes)
    dog_leg = line_integral(beta, start, corner, path_nodes) + line_integral(beta, corner, probes, path_nodes)
    return float(np.max(np.abs(straight - dog_leg), initial=0.0))
