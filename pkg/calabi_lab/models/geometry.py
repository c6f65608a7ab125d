from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from calabi_lab.utils.exceptions import ValidationError


class Box(BaseModel):
    """Axis-aligned box in R^{2n}, coordinates ordered (x_1..x_n, y_1..y_n)"""
    model_config = ConfigDict(frozen=True)

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_corners(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper corners must have the same length")
        if len(self.lower) == 0 or len(self.lower) % 2:
            raise ValueError("box must live in an even-dimensional space")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("box must be nondegenerate along every axis")
        return self

    @classmethod
    def from_pairs(cls, x_range: Sequence[float], y_range: Sequence[float], n: int = 1) -> "Box":
        """Same (x, y) extent for every conjugate pair"""
        lower = (x_range[0],) * n + (y_range[0],) * n
        upper = (x_range[1],) * n + (y_range[1],) * n
        return cls(lower=lower, upper=upper)

    @classmethod
    def cube(cls, low: float, high: float, n: int = 1) -> "Box":
        return cls.from_pairs((low, high), (low, high), n)

    @property
    def size(self) -> int:
        return len(self.lower)

    @property
    def n(self) -> int:
        return self.size // 2

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.sides))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed-box membership for an (..., 2n) array"""
        points = np.asarray(points, dtype=float)
        return np.all((points >= self.lo) & (points <= self.hi), axis=-1)

    def union(self, other: "Box") -> "Box":
        """Smallest box containing both"""
        return Box(
            lower=tuple(np.minimum(self.lo, other.lo).tolist()),
            upper=tuple(np.maximum(self.hi, other.hi).tolist()),
        )

    def scaled(self, factor: float) -> "Box":
        """Box with the same center and every side multiplied by factor"""
        half = 0.5 * factor * self.sides
        return Box(lower=tuple((self.center - half).tolist()), upper=tuple((self.center + half).tolist()))

    def grid(self, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Uniform probe grid with `resolution` points per axis

        Points sit at lo + i*side/resolution for i = 0..resolution-1, so the
        grid for 2*resolution contains the grid for resolution.

        Returns:
            (points of shape (resolution**2n, 2n), spacing per axis)
        """
        if resolution < 2:
            raise ValidationError(f"grid resolution must be at least 2 per axis, got {resolution}")
        spacing = self.sides / resolution
        axes = [self.lo[j] + spacing[j] * np.arange(resolution) for j in range(self.size)]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        return points, spacing

    def sample(self, rng: np.random.Generator, count: int, margin: float = 0.0) -> np.ndarray:
        """Uniform random probes, optionally shrunk away from the faces by a side fraction"""
        lo = self.lo + margin * self.sides
        hi = self.hi - margin * self.sides
        return rng.uniform(lo, hi, size=(count, self.size))


class ChartPoint(BaseModel):
    """A point (q, p) of T*Delta = R^{2n} x R^{2n}; arrays may carry a leading batch axis"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    q: np.ndarray
    p: np.ndarray

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.q.shape != self.p.shape:
            raise ValueError("base point and fiber covector must have the same shape")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("chart points must have finite entries")
        return self

    def stacked(self) -> np.ndarray:
        """(..., 4n) array [q, p]"""
        return np.concatenate([self.q, self.p], axis=-1)


class GridEstimate(BaseModel):
    """A maximum taken over a probe grid: an under-estimate of the true supremum"""
    model_config = ConfigDict(frozen=True)

    value: float
    spacing: float = Field(description="Largest grid spacing over all axes")
    resolution: int = Field(description="Grid points per axis")


class TimeProfile(BaseModel):
    """
    Time modulation a(t) = sum_k poly[k] t^k + sum_j amp_j sin(2 pi freq_j t)

    Used to build time-dependent Hamiltonians a(t) F(x).
    """
    model_config = ConfigDict(frozen=True)

    poly: Tuple[float, ...] = (1.0,)
    sines: Tuple[Tuple[float, float], ...] = Field(default=(), description="(amplitude, frequency) pairs")

    @property
    def is_constant(self) -> bool:
        return not self.sines and all(c == 0.0 for c in self.poly[1:])

    def __call__(self, t: float) -> float:
        value = sum(c * t ** k for k, c in enumerate(self.poly))
        value += sum(a * np.sin(2.0 * np.pi * f * t) for a, f in self.sines)
        return float(value)

    def max_abs(self, samples: int = 257) -> float:
        """Sampled max of |a| over [0, 1]"""
        return float(max(abs(self(t)) for t in np.linspace(0.0, 1.0, samples)))
