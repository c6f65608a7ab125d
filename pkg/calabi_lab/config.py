from typing import List, Literal, Tuple, Type

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, EnvSettingsSource, PydanticBaseSettingsSource, SettingsConfigDict

from calabi_lab.models.configs import (
    IntegratorConfig,
    NewtonConfig,
    PrimitiveKind,
    QuadratureConfig,
    QuadratureRule,
    Scheme,
)

ENV_PREFIX = "CALABI_LAB_"

LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


class LabConfig(BaseSettings):
    """
    Flat settings for every lab run

    Read in order of precedence: CLI flags, then the config file (flat
    `key = value` lines with `#` comments), then CALABI_LAB_* environment
    variables, then defaults. Nothing is read at import; the entry point
    builds one instance per run.
    """
    model_config = SettingsConfigDict(env_file="lab.conf", case_sensitive=False, extra="forbid")

    # Runtime
    environment: str = "development"
    debug: bool = False
    log_level: LogLevel = "INFO"

    # Geometry and experiment families
    dim: int = Field(default=1, ge=1)
    delta: float = Field(default=0.5, gt=0.0)
    kmin: int = Field(default=2, ge=1)
    kmax: int = Field(default=8, ge=1)
    eps: str = "0.2,0.1,0.05,0.025"
    sequence_base: str = "sequence_base"
    suite: str = "standard"
    lambda_kinds: Literal["radial", "xdy", "both"] = "both"
    fold_heights: str = "0.5,1.0,2.0,4.0,6.0"
    shrink_kmax: int = Field(default=3, ge=1)

    # Plateau fields
    plateau_policy: Literal["clamp", "strict"] = "clamp"
    smoothing_floor: float = Field(default=0.02, gt=0.0, lt=0.5)
    grid_smoothing_floor: float = Field(default=0.2, gt=0.0, lt=0.5)

    # Integrator
    scheme: Scheme = Scheme.IMPLICIT_MIDPOINT
    steps: int = Field(default=200, ge=1)
    newton_tol: float = Field(default=1e-12, gt=0.0)
    newton_max_iter: int = Field(default=25, ge=1)
    max_step_stiffness: float = Field(default=1.5, gt=0.0)

    # Quadrature
    quad: int = Field(default=64, ge=2)
    time_nodes: int = Field(default=32, ge=2)
    rule: QuadratureRule = QuadratureRule.GAUSS_LEGENDRE
    grid_nodes_per_cell: int = Field(default=16, ge=8)
    grid_potential: bool = False

    # Probing
    grid_res: int = Field(default=33, ge=2)
    probe_count: int = Field(default=200, ge=1)
    seed: int = 1509213
    path_nodes: int = Field(default=8, ge=1)
    fd_step: float = Field(default=1e-5, gt=0.0)

    # Graph chart
    det_threshold: float = Field(default=1e-6, gt=0.0)
    collision_fraction: float = Field(default=0.5, gt=0.0)
    alpha_tol: float = Field(default=1e-10, gt=0.0)
    alpha_max_iter: int = Field(default=50, ge=1)

    # Invariant tolerances
    tol_chart: float = 1e-10
    tol_flow: float = 5e-6
    tol_calabi: float = 1e-3
    tol_potential: float = 1e-4
    tol_correction: float = 1e-6
    tol_path: float = 1e-8
    tol_phase: float = 1e-3
    tol_bridge: float = 1e-3
    tol_section: float = 1e-3

    # Output
    out: str = "results"
    svg: bool = False

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # the config file outranks the environment; only prefixed variables count
        prefixed_env = EnvSettingsSource(settings_cls, case_sensitive=False, env_prefix=ENV_PREFIX)
        return init_settings, dotenv_settings, prefixed_env

    @field_validator("log_level", mode="before")
    @classmethod
    def _upper_level(cls, value):
        return value.upper() if isinstance(value, str) else value

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.kmax < self.kmin:
            raise ValueError("kmax must not be smaller than kmin")
        self.eps_values()
        self.fold_values()
        return self

    def eps_values(self) -> List[float]:
        return _parse_floats(self.eps, "eps")

    def fold_values(self) -> List[float]:
        return _parse_floats(self.fold_heights, "fold_heights")

    def kinds(self) -> List[PrimitiveKind]:
        if self.lambda_kinds == "both":
            return [PrimitiveKind.RADIAL, PrimitiveKind.XDY]
        return [PrimitiveKind(self.lambda_kinds)]

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(
            scheme=self.scheme,
            steps=self.steps,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
        )

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(spatial_nodes_per_axis=self.quad, time_nodes=self.time_nodes, rule=self.rule)

    def newton(self) -> NewtonConfig:
        return NewtonConfig(tol=self.alpha_tol, max_iter=self.alpha_max_iter)


def _parse_floats(text: str, name: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ValueError(f"{name} must be a comma-separated list of numbers: {e}")
    if not values:
        raise ValueError(f"{name} must not be empty")
    if any(value < 0 for value in values):
        raise ValueError(f"{name} entries must be non-negative")
    return values
