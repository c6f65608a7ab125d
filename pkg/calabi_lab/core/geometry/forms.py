"""
Primitive one-forms lambda with d(lambda) = omega.

Built-in kinds:
    radial  lambda = 1/2 sum_i (x_i dy_i - y_i dx_i)
    xdy     lambda = sum_i x_i dy_i
    custom  lambda = lambda_0 + dg for a compactly supported g
"""
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np

from calabi_lab.core.geometry.differences import DEFAULT_STEP, exterior_derivative
from calabi_lab.core.geometry.symplectic import half_dimension, omega_matrix
from calabi_lab.models.configs import PrimitiveKind
from calabi_lab.utils.exceptions import ValidationError

if TYPE_CHECKING:
    from calabi_lab.core.geometry.fields import ScalarField


def liouville(kind: Union[PrimitiveKind, str], p: np.ndarray) -> np.ndarray:
    """
    Covector of a built-in primitive at p

    Args:
        kind: radial or xdy
        p: point or (N, 2n) batch

    Returns:
        Covector(s) with the shape of p
    """
    kind = PrimitiveKind(kind)
    p = np.asarray(p, dtype=float)
    n = half_dimension(p)
    x, y = p[..., :n], p[..., n:]
    if kind is PrimitiveKind.RADIAL:
        return np.concatenate([-0.5 * y, 0.5 * x], axis=-1)
    if kind is PrimitiveKind.XDY:
        return np.concatenate([np.zeros_like(x), x], axis=-1)
    raise ValidationError(f"liouville() only evaluates built-in primitives, got {kind.value}")


class OneForm:
    """
    A covector-valued evaluator on R^{2n}

    Primitives of omega are the main instances; `gauge` is set for custom
    primitives lambda_0 + dg and records g together with the base kind.
    """

    def __init__(
        self,
        kind: PrimitiveKind,
        evaluator: Callable[[np.ndarray], np.ndarray],
        base: Optional[PrimitiveKind] = None,
        gauge: Optional["ScalarField"] = None,
    ):
        self.kind = PrimitiveKind(kind)
        self._evaluator = evaluator
        self.base = PrimitiveKind(base) if base is not None else self.kind
        self.gauge = gauge

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self._evaluator(np.asarray(points, dtype=float))

    @property
    def label(self) -> str:
        if self.gauge is None:
            return self.kind.value
        return f"{self.kind.value}({self.base.value})"

    def __repr__(self) -> str:
        return f"OneForm({self.label})"


def primitive(kind: Union[PrimitiveKind, str]) -> OneForm:
    """Built-in primitive as a OneForm"""
    kind = PrimitiveKind(kind)
    if kind is PrimitiveKind.CUSTOM:
        raise ValidationError("custom primitives are built with gauge_shift()")
    return OneForm(kind, lambda points: liouville(kind, points))


def gauge_shift(base: Union[PrimitiveKind, str], g: "ScalarField") -> OneForm:
    """lambda_0 + dg; still a primitive of omega since d(dg) = 0"""
    base_form = primitive(base)
    return OneForm(
        PrimitiveKind.CUSTOM,
        lambda points: base_form(points) + g.gradient(points),
        base=base_form.kind,
        gauge=g,
    )


def primitive_residual(form: OneForm, points: np.ndarray, step: float = DEFAULT_STEP) -> float:
    """max over probes of |d(lambda) - Omega| with d taken by central differences"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = half_dimension(points)
    d_form = exterior_derivative(form, points, step)
    return float(np.max(np.abs(d_form - omega_matrix(n)[None]), initial=0.0))
