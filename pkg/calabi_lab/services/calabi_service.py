import time
from typing import Optional

from calabi_lab.config import LabConfig
from calabi_lab.core.calabi.invariant import calabi_report, l1inf_norm
from calabi_lab.core.flow.integrator import realize_time_one, stiffness_steps
from calabi_lab.core.flow.operations import c0_from_sample, probe_grid
from calabi_lab.core.suites.catalog import suite_catalog
from calabi_lab.models.reports import ExperimentRecord
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)


class CalabiService:
    """Calabi invariant of a single named Hamiltonian"""

    def __init__(self):
        self.catalog = suite_catalog

    def run_named(self, name: str, config: LabConfig, scale: float = 1.0, suite: Optional[str] = None) -> ExperimentRecord:
        """
        Both Calabi formulas, C0 distance and L^(1,inf) norm for scale * H_name

        Members are looked up in `suite` or, when omitted, in every loaded suite.
        """
        started = time.perf_counter()
        H = scale * self.catalog.build(name, config.dim, suite, config.smoothing_floor)
        cfg = stiffness_steps(H, config.integrator(), config.max_step_stiffness)
        q = config.quadrature()
        phi = realize_time_one(H, cfg)

        report = calabi_report(H, q, cfg, config.kinds(), phi)
        points, spacing = probe_grid(phi, config.grid_res)
        c0, c0_uniform = c0_from_sample(phi.evaluate(points), spacing, config.grid_res)
        l1inf = l1inf_norm(H, q, config.grid_res)
        record = ExperimentRecord(
            family=name,
            param=float(scale),
            cal_H=report.cal_H,
            cal_f=report.cal_f,
            c0_dist=c0.value,
            c0_spacing=c0.spacing,
            l1inf=l1inf.value,
            l1inf_spacing=l1inf.spacing,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            resolution=config.grid_res,
            steps=cfg.steps,
            c0_uniform=c0_uniform.value,
            notes=f"discrepancy={report.discrepancy:.3e}",
        )
        logger.info("Calabi computed", hamiltonian=name, scale=scale, cal_H=record.cal_H, discrepancy=report.discrepancy)
        return record


# Global instance
calabi_service = CalabiService()
