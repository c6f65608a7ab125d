import math
import time
from typing import Dict, List, Optional, Tuple

from calabi_lab.config import LabConfig
from calabi_lab.core.calabi.invariant import cal_from_hamiltonian, l1inf_norm, potential_integrals, volume_factor
from calabi_lab.core.flow.integrator import realize_time_one, stiffness_steps
from calabi_lab.core.flow.operations import c0_from_sample, probe_grid
from calabi_lab.core.geometry.fields import (
    Autonomous,
    PlateauBump,
    TiledPlateauField,
    feasible_plateau_fraction,
)
from calabi_lab.models.configs import QuadratureConfig
from calabi_lab.models.geometry import Box
from calabi_lab.models.reports import ExperimentRecord
from calabi_lab.utils.exceptions import ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

# plateau fraction of the shrinking-support bump; kept low so the transition shell stays wide
SHRINK_PLATEAU = 0.25


def grid_target_fraction(k: int) -> float:
    """1 - 1/k per subcube; k = 1 has no subdivision, so it takes 1/2"""
    return max(1.0 - 1.0 / k, 0.5)


def grid_panels_per_cell(k: int, floor: float) -> int:
    """
    Transitions of the k-th grid field are 1/P of a subcell wide, P = P_2 + (k - 2)

    P_2 comes from the smoothing floor, so the achievable plateau fraction
    (1 - 2/P)^{2n} grows strictly with k. Quadrature panels of width 1/P
    line up with the transitions, where the symmetric rules are exact.
    """
    return max(3, round(1.0 / floor)) + max(k - 2, 0)


class GridService:
    """The grid counterexample and the shrinking-support family"""

    def grid_field(self, delta: float, k: int, config: LabConfig) -> Tuple[TiledPlateauField, float, float]:
        """
        F_k on [0, delta]^{2n} with its target and achieved plateau fractions

        Raises:
            PlateauInfeasibleError: the target is out of reach under the strict policy
        """
        if delta <= 0:
            raise ValidationError(f"delta must be positive, got {delta}")
        if k < 1:
            raise ValidationError(f"k must be at least 1, got {k}")
        box = Box.cube(0.0, delta, config.dim)
        floor = 1.0 / grid_panels_per_cell(k, config.grid_smoothing_floor)
        target = grid_target_fraction(k)
        rho = feasible_plateau_fraction(target, floor, box.size, config.plateau_policy)
        return TiledPlateauField(box, k, rho, 1.0, floor), target, rho

    def grid_quadrature(self, k: int, config: LabConfig) -> QuadratureConfig:
        """Composite rule with panel edges on every subcell transition, about grid_nodes_per_cell nodes per subcell"""
        panels = grid_panels_per_cell(k, config.grid_smoothing_floor)
        return QuadratureConfig(
            spatial_nodes_per_axis=max(4, math.ceil(config.grid_nodes_per_cell / panels)),
            time_nodes=config.time_nodes,
            rule=config.rule,
            panels_per_axis=k * panels,
        )

    def run_grid_example(self, delta: float, k: int, config: LabConfig) -> ExperimentRecord:
        """
        H_k = F_k with a plateau bump on each of the k^{2n} subcubes of [0, delta]^{2n}

        Args:
            delta: side of the cube
            k: subdivisions per axis
            config: lab settings

        Returns:
            One record; trajectories_confined says whether every probe stayed in its subcube
        """
        started = time.perf_counter()
        n = config.dim
        field, target, rho = self.grid_field(delta, k, config)
        H = Autonomous(field)

        cfg = stiffness_steps(H, config.integrator(), config.max_step_stiffness)
        q = self.grid_quadrature(k, config)
        phi = realize_time_one(H, cfg)

        logger.info("Grid example started", delta=delta, k=k, n=n, rho_target=target, rho=rho, steps=cfg.steps)

        cal_H = cal_from_hamiltonian(H, q)
        cal_f: Dict[str, Optional[float]] = {kind.value: None for kind in config.kinds()}
        if config.grid_potential:
            factor = volume_factor(n) / (n + 1)
            integrals = potential_integrals(phi, config.kinds(), q)
            cal_f = {key: factor * value for key, value in integrals.items()}

        # at least four probes per subcube side so every plateau is hit
        resolution = max(config.grid_res, 4 * k)
        points, spacing = probe_grid(phi, resolution)
        sample = phi.evaluate(points, region=field.cell_index)
        c0, c0_uniform = c0_from_sample(sample, spacing, resolution)
        l1inf = l1inf_norm(H, q, resolution)
        confined = bool(sample.confined.all())
        if not confined:
            logger.warning("Trajectories left their subcube", k=k, escaped=int((~sample.confined).sum()))

        record = ExperimentRecord(
            family="grid",
            param=float(k),
            cal_H=cal_H,
            cal_f=cal_f,
            c0_dist=c0.value,
            c0_spacing=c0.spacing,
            l1inf=l1inf.value,
            l1inf_spacing=l1inf.spacing,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            resolution=resolution,
            steps=cfg.steps,
            rho_target=target,
            rho_achieved=rho,
            trajectories_confined=confined,
            c0_uniform=c0_uniform.value,
        )
        logger.info("Grid example finished", k=k, cal_H=cal_H, c0_dist=c0.value, l1inf=l1inf.value)
        return record

    def sweep(self, config: LabConfig, delta: Optional[float] = None) -> List[ExperimentRecord]:
        """One record per k in [kmin, kmax]"""
        delta = config.delta if delta is None else delta
        return [self.run_grid_example(delta, k, config) for k in range(config.kmin, config.kmax + 1)]

    def envelope(self, records: List[ExperimentRecord], delta: float, n: int) -> Dict[str, bool]:
        """
        The quantitative envelope of the grid sweep

        Each k: c0 within the subcube diameter, cal_H between rho * vol and vol,
        l1inf in [0.95, 1]. Across the sweep: c0 at the largest k is at most a
        quarter of c0 at the smallest, while cal_H keeps half of its first value.
        """
        volume = volume_factor(n) * delta ** (2 * n)
        checks = {"c0_within_diameter": True, "cal_within_bounds": True, "l1inf_near_one": True}
        for record in records:
            k = record.param
            checks["c0_within_diameter"] &= record.c0_dist <= math.sqrt(2 * n) * delta / k + 1e-3
            checks["cal_within_bounds"] &= record.rho_achieved * volume - 1e-6 <= record.cal_H <= volume + 1e-6
            checks["l1inf_near_one"] &= 0.95 <= record.l1inf <= 1.0 + 1e-12
        if len(records) >= 2:
            first, last = records[0], records[-1]
            checks["c0_shrinks"] = last.c0_dist <= first.c0_dist / 4.0
            checks["cal_persists"] = last.cal_H >= first.rho_achieved * volume / 2.0
        return {name: bool(value) for name, value in checks.items()}

    def run_shrinking_support(self, delta: float, k: int, config: LabConfig) -> ExperimentRecord:
        """
        H_k = k^{2n} times a plateau bump on the centered cube of side delta/k

        The Calabi invariant does not depend on k while the time-one maps
        C0-converge and the L^(1,inf) norm grows like k^{2n}.
        """
        if k < 1:
            raise ValidationError(f"k must be at least 1, got {k}")
        started = time.perf_counter()
        n = config.dim
        box = Box.cube(0.0, delta, n).scaled(1.0 / k)
        height = float(k ** (2 * n))
        H = Autonomous(PlateauBump(box, SHRINK_PLATEAU, height, config.smoothing_floor))
        cfg = stiffness_steps(H, config.integrator(), config.max_step_stiffness)
        q = config.quadrature()
        phi = realize_time_one(H, cfg)

        points, spacing = probe_grid(phi, config.grid_res)
        c0, c0_uniform = c0_from_sample(phi.evaluate(points), spacing, config.grid_res)
        l1inf = l1inf_norm(H, q, config.grid_res)
        record = ExperimentRecord(
            family="shrink",
            param=float(k),
            cal_H=cal_from_hamiltonian(H, q),
            c0_dist=c0.value,
            c0_spacing=c0.spacing,
            l1inf=l1inf.value,
            l1inf_spacing=l1inf.spacing,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            resolution=config.grid_res,
            steps=cfg.steps,
            rho_target=SHRINK_PLATEAU,
            rho_achieved=SHRINK_PLATEAU,
            c0_uniform=c0_uniform.value,
        )
        logger.info("Shrinking support member finished", k=k, cal_H=record.cal_H, c0_dist=c0.value, l1inf=l1inf.value)
        return record

    def shrink_sweep(self, config: LabConfig) -> List[ExperimentRecord]:
        return [self.run_shrinking_support(config.delta, k, config) for k in range(1, config.shrink_kmax + 1)]


# Global instance
grid_service = GridService()
