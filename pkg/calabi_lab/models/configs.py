from enum import Enum

from pydantic import BaseModel, ConfigDict, Field


class Scheme(str, Enum):
    IMPLICIT_MIDPOINT = "implicit_midpoint"
    RK4 = "rk4"


class QuadratureRule(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    MIDPOINT = "midpoint"


class PrimitiveKind(str, Enum):
    RADIAL = "radial"
    XDY = "xdy"
    CUSTOM = "custom"


class IntegratorConfig(BaseModel):
    """Fixed-step integration of the Hamiltonian isotopy"""
    model_config = ConfigDict(frozen=True)

    scheme: Scheme = Scheme.IMPLICIT_MIDPOINT
    steps: int = Field(default=200, ge=1, description="Uniform steps over [0, 1]")
    newton_tol: float = Field(default=1e-12, gt=0.0)
    newton_max_iter: int = Field(default=25, ge=1)


class QuadratureConfig(BaseModel):
    """Tensor quadrature over [0, 1] x support box"""
    model_config = ConfigDict(frozen=True)

    spatial_nodes_per_axis: int = Field(default=64, ge=2)
    time_nodes: int = Field(default=32, ge=2, description="Nodes per smooth time segment")
    rule: QuadratureRule = QuadratureRule.GAUSS_LEGENDRE
    panels_per_axis: int = Field(default=1, ge=1, description="Composite panels; nodes are per panel")


class NewtonConfig(BaseModel):
    """Inversion of the midpoint map x -> (phi(x) + x)/2"""
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default=1e-10, gt=0.0)
    max_iter: int = Field(default=50, ge=1)
    max_halvings: int = Field(default=12, ge=0)
