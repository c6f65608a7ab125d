import time
from typing import List, Optional, Sequence

import numpy as np

from calabi_lab.config import LabConfig
from calabi_lab.core.calabi.invariant import calabi_report, l1inf_norm
from calabi_lab.core.chart.graph import graphicality_report
from calabi_lab.core.flow.integrator import realize_time_one, stiffness_steps
from calabi_lab.core.flow.operations import c0_distance_to_identity
from calabi_lab.core.geometry.fields import TimeDepField
from calabi_lab.core.phase.phase_function import (
    phase_gradient_residual,
    phase_pullback_integrals,
    theorem_bound_check,
)
from calabi_lab.core.suites.catalog import suite_catalog
from calabi_lab.models.reports import ExperimentRecord
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

SECTION_PROBES = 6


class SequenceService:
    """The epsilon-scaled graphical family"""

    def __init__(self):
        self.catalog = suite_catalog

    def base_hamiltonian(self, config: LabConfig, name: Optional[str] = None) -> TimeDepField:
        return self.catalog.build(name or config.sequence_base, config.dim, smoothing_floor=config.smoothing_floor)

    def run_member(self, base: TimeDepField, eps: float, config: LabConfig) -> ExperimentRecord:
        """
        Calabi both ways, C0 distance, and the phase bound for phi_{eps H}

        A non-graphical member is recorded with graphical=False and no bound data.
        """
        started = time.perf_counter()
        H = eps * base
        kinds = config.kinds()
        cfg = stiffness_steps(H, config.integrator(), config.max_step_stiffness)
        q = config.quadrature()
        phi = realize_time_one(H, cfg)
        rng = np.random.default_rng(config.seed)

        calabi = calabi_report(H, q, cfg, kinds, phi)
        c0 = c0_distance_to_identity(phi, config.grid_res)
        l1inf = l1inf_norm(H, q, config.grid_res)
        graphicality = graphicality_report(phi, config.grid_res, config.det_threshold, config.collision_fraction)

        fields = dict(
            family="sequence",
            param=float(eps),
            cal_H=calabi.cal_H,
            cal_f=calabi.cal_f,
            c0_dist=c0.value,
            c0_spacing=c0.spacing,
            l1inf=l1inf.value,
            l1inf_spacing=l1inf.spacing,
            resolution=config.grid_res,
            steps=cfg.steps,
            graphical=graphicality.is_graphical,
        )
        if not graphicality.is_graphical:
            logger.warning(
                "Sequence member is not graphical",
                eps=eps,
                min_det=graphicality.min_det,
                collisions=graphicality.injectivity_collisions,
            )
            return ExperimentRecord(
                **fields,
                notes="non-graphical; bound checks skipped",
                wall_ms=(time.perf_counter() - started) * 1000.0,
            )

        kind = kinds[0]
        section_probes = phi.support.sample(rng, SECTION_PROBES, margin=0.1)
        bound = theorem_bound_check(
            phi,
            H,
            kind,
            config.grid_res,
            config.newton(),
            config.path_nodes,
            graphicality,
            section_probes,
            config.fd_step,
        )
        probes = phi.support.sample(rng, config.probe_count)
        I_S, I_R = phase_pullback_integrals(phi, H, kind, q, config.path_nodes)

        record = ExperimentRecord(
            **fields,
            sup_S=bound.sup_S,
            sup_alpha=bound.sup_alpha,
            bound_ok=bound.bound_ok,
            res_dS=phase_gradient_residual(phi, H, kind, probes, config.path_nodes, config.fd_step),
            res_bridge=abs((H.n + 1) * calabi.cal_H - (I_S - I_R)),
            I_S=I_S,
            I_R=I_R,
            res_section=bound.section_residual,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        logger.info(
            "Sequence member finished",
            eps=eps,
            cal_H=record.cal_H,
            c0_dist=record.c0_dist,
            sup_S=record.sup_S,
            sup_alpha=record.sup_alpha,
            bound_ok=record.bound_ok,
        )
        return record

    def run_graphical_sequence(
        self,
        config: LabConfig,
        schedule: Optional[Sequence[float]] = None,
        base: Optional[TimeDepField] = None,
    ) -> List[ExperimentRecord]:
        """
        One record per epsilon, in schedule order

        The first non-graphical epsilon, if any, is logged; later members still run.
        """
        schedule = list(config.eps_values() if schedule is None else schedule)
        base = base or self.base_hamiltonian(config)
        logger.info("Graphical sequence started", schedule=schedule, base=config.sequence_base)
        records = [self.run_member(base, eps, config) for eps in schedule]
        failing = [record.param for record in records if record.graphical is False]
        if failing:
            logger.warning("Graphical sequence has non-graphical members", first_failing=failing[0])
        return records


# Global instance
sequence_service = SequenceService()
