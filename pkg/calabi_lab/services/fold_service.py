from typing import List, Optional, Sequence

from calabi_lab.config import LabConfig
from calabi_lab.core.chart.graph import graphicality_report
from calabi_lab.core.flow.integrator import realize_time_one, stiffness_steps
from calabi_lab.core.flow.operations import c0_distance_to_identity
from calabi_lab.core.geometry.fields import Autonomous, rotation_well
from calabi_lab.models.geometry import Box
from calabi_lab.models.reports import FoldRecord
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

FOLD_PLATEAU = 0.36


class FoldService:
    """
    Sweeps the rotation rate of a rotation well until the graph stops being a section

    On the plateau the time-one map is a rotation by -c, whose midpoint map
    degenerates at c = pi; the transition shell shears and folds earlier.
    """

    def run_fold_sweep(
        self,
        config: LabConfig,
        heights: Optional[Sequence[float]] = None,
        box: Optional[Box] = None,
    ) -> List[FoldRecord]:
        heights = list(config.fold_values() if heights is None else heights)
        box = box or Box.cube(-1.0, 1.0, config.dim)
        probes, _ = box.grid(9)
        records = []
        for height in heights:
            H = Autonomous(rotation_well(box, FOLD_PLATEAU, height, config.smoothing_floor))
            cfg = stiffness_steps(H, config.integrator(), config.max_step_stiffness, probes)
            phi = realize_time_one(H, cfg)
            graphicality = graphicality_report(phi, config.grid_res, config.det_threshold, config.collision_fraction)
            c0 = c0_distance_to_identity(phi, config.grid_res)
            records.append(
                FoldRecord(
                    height=height,
                    is_graphical=graphicality.is_graphical,
                    min_abs_det=graphicality.min_abs_det,
                    min_det=graphicality.min_det,
                    collisions=graphicality.injectivity_collisions,
                    c0_dist=c0.value,
                    c1_distance=graphicality.c1_distance,
                )
            )
            logger.info(
                "Fold sweep member finished",
                height=height,
                is_graphical=graphicality.is_graphical,
                min_det=graphicality.min_det,
                c1_distance=graphicality.c1_distance,
            )

        first_fold = next((record.height for record in records if not record.is_graphical), None)
        logger.info("Fold sweep finished", heights=heights, first_fold=first_fold)
        return records


# Global instance
fold_service = FoldService()
