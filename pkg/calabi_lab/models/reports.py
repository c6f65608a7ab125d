import math
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class CalabiReport(BaseModel):
    """Calabi invariant by the spacetime formula and by the potential formula"""
    cal_H: float
    cal_f: Dict[str, float] = Field(default_factory=dict, description="Potential formula per primitive kind")
    discrepancy: float = 0.0
    quadrature: Dict[str, Any] = Field(default_factory=dict)
    integrator: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _fill_discrepancy(self):
        values = [self.cal_H, *self.cal_f.values()]
        self.discrepancy = max(
            (abs(a - b) for i, a in enumerate(values) for b in values[i + 1:]),
            default=0.0,
        )
        return self


class GraphicalityReport(BaseModel):
    is_graphical: bool
    min_abs_det: float = Field(description="min over probes of |det((D phi + I)/2)|")
    min_det: float = Field(description="Signed minimum; negative means the midpoint map folds")
    injectivity_collisions: int
    resolution: int
    threshold: float
    collision_radius: float
    c1_distance: float = Field(description="max over probes of the operator norm of D phi - I")


class BoundReport(BaseModel):
    sup_S: float
    sup_alpha: float
    A: float = Field(description="Euclidean diameter of the support box")
    slack: float
    bound_ok: bool
    section_residual: Optional[float] = Field(default=None, description="max |d(S o alpha) + alpha| at probes")
    resolution: int


class InvariantCheck(BaseModel):
    name: str
    tolerance: float
    measured: Optional[float] = None
    passed: bool = False
    skipped: bool = False
    detail: str = ""


class VerifyReport(BaseModel):
    suite: str
    checks: List[InvariantCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if not check.skipped) and not any(
            check.skipped for check in self.checks
        )

    @property
    def failures(self) -> List[InvariantCheck]:
        return [check for check in self.checks if not check.passed and not check.skipped]


class ExperimentRecord(BaseModel):
    """One row of a sequence experiment"""
    family: str
    param: float
    cal_H: float
    cal_f: Dict[str, Optional[float]] = Field(default_factory=dict)
    c0_dist: float
    c0_spacing: float
    l1inf: float
    l1inf_spacing: float
    sup_S: Optional[float] = None
    sup_alpha: Optional[float] = None
    bound_ok: Optional[bool] = None
    res_dS: Optional[float] = None
    res_bridge: Optional[float] = None
    wall_ms: float = 0.0

    # provenance and supplementary diagnostics
    resolution: int = 0
    steps: int = 0
    rho_target: Optional[float] = None
    rho_achieved: Optional[float] = None
    graphical: Optional[bool] = None
    trajectories_confined: Optional[bool] = None
    c0_uniform: Optional[float] = None
    I_S: Optional[float] = None
    I_R: Optional[float] = None
    res_section: Optional[float] = None
    notes: str = ""

    @model_validator(mode="after")
    def _check_finite(self):
        for name, value in self.model_dump(exclude={"family", "notes", "cal_f"}).items():
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"record field {name} is not finite")
        for kind, value in self.cal_f.items():
            if value is not None and not math.isfinite(value):
                raise ValueError(f"record field cal_f[{kind}] is not finite")
        return self


class FoldRecord(BaseModel):
    """One height of the graphicality sweep"""
    height: float
    is_graphical: bool
    min_abs_det: float
    min_det: float
    collisions: int
    c0_dist: float
    c1_distance: float


class RunSummary(BaseModel):
    """Machine-readable companion of every emitted table"""
    command: str
    config: Dict[str, Any]
    records: List[Dict[str, Any]] = Field(default_factory=list)
    extra: Dict[str, Any] = Field(default_factory=dict)
